#pragma once

#include <string>
#include <utility>
#include <vector>

#include "iclmia/corpus.hpp"
#include "iclmia/embedding.hpp"

namespace iclmia {

struct EmptyIndex : Error {
  using Error::Error;
};

struct IdCollision : Error {
  explicit IdCollision(const std::string& id) : Error("id collision in index: " + id) {}
};

struct ScoredId {
  std::string id;
  double score;
};

struct SearchResult {
  // Descending score; ties broken by smaller insertion position.
  std::vector<ScoredId> ranked;
};

// Exact flat index: one unit-norm vector per record, immutable after build.
class FlatIndex {
 public:
  FlatIndex(std::vector<std::pair<std::string, EmbeddingVector>> entries, std::size_t dimension);

  std::size_t size() const { return entries_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<std::pair<std::string, EmbeddingVector>>& entries() const { return entries_; }

  SearchResult search(const EmbeddingVector& query, std::size_t k) const;

 private:
  std::vector<std::pair<std::string, EmbeddingVector>> entries_;
  std::size_t dimension_;
};

// One entry per record, embedding of record.text, input order preserved.
FlatIndex build_index(const CorpusSet& records, const EmbeddingProvider& provider);

// Member protocol: the index holds demonstrations and queries, so a query
// can be retrieved as its own in-context example.
FlatIndex build_member_index(const CorpusSet& demos, const CorpusSet& queries,
                             const EmbeddingProvider& provider);

// Non-member protocol: demonstrations only.
FlatIndex build_nonmember_index(const CorpusSet& demos, const CorpusSet& queries,
                                const EmbeddingProvider& provider);

}  // namespace iclmia
