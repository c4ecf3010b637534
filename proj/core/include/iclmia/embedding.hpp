#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "iclmia/common.hpp"

namespace iclmia {

// Unit-norm real vector; the currency of retrieval and of the similarity
// function used by every attack score.
using EmbeddingVector = std::vector<double>;

struct DimensionMismatch : Error {
  using Error::Error;
};

struct ZeroVector : Error {
  using Error::Error;
};

struct MissingEmbedding : Error {
  explicit MissingEmbedding(std::uint64_t key)
      : Error("no stored embedding for text key " + std::to_string(key)) {}
};

struct InconsistentDimension : Error {
  using Error::Error;
};

// Dot product with fixed ascending-index summation order. The result is
// clamped into [-1, 1] only when the overshoot is rounding-sized (<= 1e-6).
double dot(const EmbeddingVector& u, const EmbeddingVector& v);

double norm2(const EmbeddingVector& v);

// Deterministic embedding map: same text, same vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

// Seeds a counter-based generator from a 64-bit hash of the exact text
// bytes, draws Gaussian coordinates, and normalizes. Resamples with a salted
// hash on a (vanishingly unlikely) zero vector, erroring after 8 attempts.
EmbeddingVector hash_embed(std::string_view text, std::size_t dimension);

class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

// Averages hash_embed vectors of the text's whitespace words and normalizes.
// Texts sharing words map to correlated vectors, so a word prefix retrieves
// its own full text; this is the default provider for synthetic campaigns.
class WordHashEmbedder final : public EmbeddingProvider {
 public:
  explicit WordHashEmbedder(std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

// Lookup-backed provider over a JSONL store of precomputed embeddings keyed
// by the 64-bit hash of the exact text bytes.
std::shared_ptr<EmbeddingProvider> load_store(const std::filesystem::path& path);

// Writes a store file in the same format (used by tests and tooling).
void write_store(const std::filesystem::path& path, std::size_t dimension,
                 const std::vector<std::pair<std::uint64_t, EmbeddingVector>>& entries);

}  // namespace iclmia
