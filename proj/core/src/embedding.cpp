#include "iclmia/embedding.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include <json.hpp>

namespace iclmia {

double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.size() != v.size())
    throw DimensionMismatch("dot: dimensions " + std::to_string(u.size()) + " vs " +
                            std::to_string(v.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += u[i] * v[i];
  if (sum > 1.0 && sum <= 1.0 + 1e-6) sum = 1.0;
  if (sum < -1.0 && sum >= -1.0 - 1e-6) sum = -1.0;
  return sum;
}

double norm2(const EmbeddingVector& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

namespace {

// Portable Box-Muller over counter-based uniforms. Implementation-defined
// stdlib distributions would break cross-platform reproducibility.
double gaussian(std::uint64_t seed, std::uint64_t counter) {
  double u1 = uniform01(seed, 2 * counter);
  double u2 = uniform01(seed, 2 * counter + 1);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

EmbeddingVector normalize_or_throw(EmbeddingVector v, const char* what) {
  double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw ZeroVector(what);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

EmbeddingVector hash_embed(std::string_view text, std::size_t dimension) {
  if (dimension < 2) throw Error("hash_embed: dimension must be >= 2");
  std::uint64_t base = fnv1a64(text);
  for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
    std::uint64_t seed = mix_seed({base, attempt});
    EmbeddingVector v(dimension);
    for (std::size_t i = 0; i < dimension; ++i) v[i] = gaussian(seed, i);
    double n = norm2(v);
    if (n > 1e-12 && std::isfinite(n)) {
      for (double& x : v) x /= n;
      return v;
    }
  }
  throw ZeroVector("hash_embed: degenerate vector after 8 salted attempts");
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension < 2) throw Error("HashEmbedder: dimension must be >= 2");
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  return hash_embed(text, dimension_);
}

WordHashEmbedder::WordHashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension < 2) throw Error("WordHashEmbedder: dimension must be >= 2");
}

EmbeddingVector WordHashEmbedder::embed(std::string_view text) const {
  auto words = split_words(text);
  if (words.empty()) throw ZeroVector("WordHashEmbedder: text has no words");
  EmbeddingVector sum(dimension_, 0.0);
  for (const auto& w : words) {
    EmbeddingVector wv = hash_embed(w, dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) sum[i] += wv[i];
  }
  return normalize_or_throw(std::move(sum), "WordHashEmbedder: words cancelled to zero");
}

namespace {

class StoreEmbedder final : public EmbeddingProvider {
 public:
  StoreEmbedder(std::size_t dimension,
                std::unordered_map<std::uint64_t, EmbeddingVector> vectors)
      : dimension_(dimension), vectors_(std::move(vectors)) {}

  std::size_t dimension() const override { return dimension_; }

  EmbeddingVector embed(std::string_view text) const override {
    std::uint64_t key = fnv1a64(text);
    auto it = vectors_.find(key);
    if (it == vectors_.end()) throw MissingEmbedding(key);
    return it->second;
  }

 private:
  std::size_t dimension_;
  std::unordered_map<std::uint64_t, EmbeddingVector> vectors_;
};

std::uint64_t parse_key(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_string()) return std::stoull(j.get<std::string>());
  throw Error("embedding store: key must be an unsigned integer or decimal string");
}

}  // namespace

std::shared_ptr<EmbeddingProvider> load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding store: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error("embedding store is empty: " + path.string());
  nlohmann::json header = nlohmann::json::parse(line);
  if (!header.contains("dimension")) throw Error("embedding store: missing dimension header");
  std::size_t dimension = header.at("dimension").get<std::size_t>();
  if (dimension < 1) throw Error("embedding store: dimension must be positive");

  std::unordered_map<std::uint64_t, EmbeddingVector> vectors;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line);
    std::uint64_t key = parse_key(obj.at("key"));
    EmbeddingVector v = obj.at("vector").get<EmbeddingVector>();
    if (v.size() != dimension)
      throw InconsistentDimension("embedding store line " + std::to_string(line_number) +
                                  ": dimension " + std::to_string(v.size()) + " != " +
                                  std::to_string(dimension));
    double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n))
      throw ZeroVector("embedding store line " + std::to_string(line_number));
    if (std::abs(n - 1.0) > 1e-6) {
      for (double& x : v) x /= n;
    }
    vectors[key] = std::move(v);
  }
  return std::make_shared<StoreEmbedder>(dimension, std::move(vectors));
}

void write_store(const std::filesystem::path& path, std::size_t dimension,
                 const std::vector<std::pair<std::uint64_t, EmbeddingVector>>& entries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding store: " + path.string());
  out << nlohmann::json{{"dimension", dimension}}.dump() << '\n';
  for (const auto& [key, v] : entries) {
    nlohmann::ordered_json obj;
    obj["key"] = key;
    obj["vector"] = v;
    out << obj.dump() << '\n';
  }
}

}  // namespace iclmia
