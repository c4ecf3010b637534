#include "iclmia/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace iclmia {

FlatIndex::FlatIndex(std::vector<std::pair<std::string, EmbeddingVector>> entries,
                     std::size_t dimension)
    : entries_(std::move(entries)), dimension_(dimension) {
  std::unordered_set<std::string> ids;
  for (const auto& [id, v] : entries_) {
    if (v.size() != dimension_)
      throw DimensionMismatch("index entry '" + id + "' has dimension " +
                              std::to_string(v.size()));
    if (std::abs(norm2(v) - 1.0) > 1e-6)
      throw Error("index entry '" + id + "' is not unit-norm");
    if (!ids.insert(id).second) throw IdCollision(id);
  }
}

SearchResult FlatIndex::search(const EmbeddingVector& query, std::size_t k) const {
  if (entries_.empty()) throw EmptyIndex("search on empty index");
  if (query.size() != dimension_)
    throw DimensionMismatch("query dimension " + std::to_string(query.size()) +
                            " != index dimension " + std::to_string(dimension_));
  if (k < 1) throw Error("search: k must be >= 1");

  struct Hit {
    double score;
    std::size_t position;
  };
  std::vector<Hit> hits;
  hits.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    hits.push_back({dot(query, entries_[i].second), i});
  }
  auto better = [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.position < b.position;
  };
  std::size_t take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                    better);

  SearchResult result;
  result.ranked.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    result.ranked.push_back({entries_[hits[i].position].first, hits[i].score});
  }
  return result;
}

FlatIndex build_index(const CorpusSet& records, const EmbeddingProvider& provider) {
  if (records.records.empty()) throw EmptyIndex("build_index: no records");
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  entries.reserve(records.records.size());
  for (const auto& rec : records.records) {
    entries.emplace_back(rec.id, provider.embed(rec.text));
  }
  return FlatIndex(std::move(entries), provider.dimension());
}

namespace {

FlatIndex build_union(const CorpusSet& a, const CorpusSet& b, const EmbeddingProvider& provider) {
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  entries.reserve(a.records.size() + b.records.size());
  for (const auto& rec : a.records) entries.emplace_back(rec.id, provider.embed(rec.text));
  for (const auto& rec : b.records) entries.emplace_back(rec.id, provider.embed(rec.text));
  return FlatIndex(std::move(entries), provider.dimension());
}

}  // namespace

FlatIndex build_member_index(const CorpusSet& demos, const CorpusSet& queries,
                             const EmbeddingProvider& provider) {
  return build_union(demos, queries, provider);
}

FlatIndex build_nonmember_index(const CorpusSet& demos, const CorpusSet& queries,
                                const EmbeddingProvider& provider) {
  // The non-member index ignores queries entirely, but still rejects id
  // collisions between the two sets to keep the arms comparable.
  std::unordered_set<std::string> demo_ids;
  for (const auto& rec : demos.records) demo_ids.insert(rec.id);
  for (const auto& rec : queries.records) {
    if (demo_ids.contains(rec.id)) throw IdCollision(rec.id);
  }
  return build_index(demos, provider);
}

}  // namespace iclmia
