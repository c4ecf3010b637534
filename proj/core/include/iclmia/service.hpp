#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "iclmia/lm.hpp"
#include "iclmia/prompt.hpp"
#include "iclmia/retrieval.hpp"

namespace iclmia {

struct InsufficientNeighbors : Error {
  using Error::Error;
};

// Ensemble-prompting defense: answer from m independent k-shot prompts,
// tally the c most frequent answer words, and re-prompt for a final answer.
struct EnsembleDefenseConfig {
  std::size_t m = 2;
  std::size_t c = 1;
  // Rendered as: instruction + prefix + words (space-joined) + joiner + query.
  std::string final_prompt_prefix = "candidate words: ";
};

// Case-folded whitespace words counted across all answers; top c by count,
// ties broken lexicographically.
std::vector<std::string> top_c_frequent_words(const std::vector<std::string>& answers,
                                              std::size_t c);

// Server side of the two-party setting: retrieval + prompt assembly + LM
// call. Immutable after construction; concurrent serve calls are safe.
class IclService {
 public:
  IclService(FlatIndex index, std::vector<DqaRecord> demos, PromptTemplate tmpl,
             std::shared_ptr<EmbeddingProvider> provider, std::shared_ptr<LmBackend> backend,
             std::size_t k, std::size_t answer_token_budget = 25,
             std::optional<EnsembleDefenseConfig> defense = std::nullopt);

  const PromptTemplate& prompt_template() const { return template_; }
  const EmbeddingProvider& provider() const { return *provider_; }
  LmBackend& backend() const { return *backend_; }
  std::size_t k() const { return k_; }
  std::size_t answer_token_budget() const { return answer_token_budget_; }
  bool defended() const { return defense_.has_value(); }

  // Retrieved records for a query text, in rank order.
  std::vector<DqaRecord> retrieve(const std::string& query_text, std::size_t count) const;

  // The exact prompt serve() would send (retrieval + prompt assembly).
  std::string render(const std::string& query_text, const FormattedQuery& formatted) const;

  GenerationResult serve(const std::string& query_text, const FormattedQuery& formatted,
                         std::size_t max_output_tokens, bool want_logits = false) const;

  GenerationResult serve_defended(const std::string& query_text,
                                  const FormattedQuery& formatted) const;

 private:
  FlatIndex index_;
  std::unordered_map<std::string, DqaRecord> demos_by_id_;
  PromptTemplate template_;
  std::shared_ptr<EmbeddingProvider> provider_;
  std::shared_ptr<LmBackend> backend_;
  std::size_t k_;
  std::size_t answer_token_budget_;
  std::optional<EnsembleDefenseConfig> defense_;
};

}  // namespace iclmia
