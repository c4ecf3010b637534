#include "iclmia/service.hpp"

#include <algorithm>
#include <map>

namespace iclmia {

std::vector<std::string> top_c_frequent_words(const std::vector<std::string>& answers,
                                              std::size_t c) {
  if (c < 1) throw Error("top_c_frequent_words: c must be >= 1");
  std::map<std::string, std::size_t> counts;  // ordered map gives the lexicographic tie-break
  for (const auto& answer : answers) {
    for (const auto& word : split_words(answer)) ++counts[ascii_lower(word)];
  }
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (const auto& [word, count] : items) {
    if (out.size() == c) break;
    out.push_back(word);
  }
  return out;
}

IclService::IclService(FlatIndex index, std::vector<DqaRecord> demos, PromptTemplate tmpl,
                       std::shared_ptr<EmbeddingProvider> provider,
                       std::shared_ptr<LmBackend> backend, std::size_t k,
                       std::size_t answer_token_budget,
                       std::optional<EnsembleDefenseConfig> defense)
    : index_(std::move(index)),
      template_(std::move(tmpl)),
      provider_(std::move(provider)),
      backend_(std::move(backend)),
      k_(k),
      answer_token_budget_(answer_token_budget),
      defense_(std::move(defense)) {
  if (k_ < 1) throw Error("service: k must be >= 1");
  if (defense_ && defense_->m < 2) throw Error("defense: m must be >= 2");
  if (defense_ && defense_->c < 1) throw Error("defense: c must be >= 1");
  for (auto& rec : demos) {
    std::string id = rec.id;
    demos_by_id_.emplace(std::move(id), std::move(rec));
  }
  for (const auto& [id, vec] : index_.entries()) {
    if (!demos_by_id_.contains(id)) throw Error("service: index id '" + id + "' has no record");
  }
}

std::vector<DqaRecord> IclService::retrieve(const std::string& query_text,
                                            std::size_t count) const {
  SearchResult result = index_.search(provider_->embed(query_text), count);
  std::vector<DqaRecord> out;
  out.reserve(result.ranked.size());
  for (const auto& hit : result.ranked) out.push_back(demos_by_id_.at(hit.id));
  return out;
}

std::string IclService::render(const std::string& query_text,
                               const FormattedQuery& formatted) const {
  return build_prompt(retrieve(query_text, k_), formatted, template_);
}

GenerationResult IclService::serve(const std::string& query_text, const FormattedQuery& formatted,
                                   std::size_t max_output_tokens, bool want_logits) const {
  if (query_text.empty()) throw Error("serve: query_text must be non-empty");
  if (defense_) return serve_defended(query_text, formatted);
  GenerationRequest request;
  request.prompt = render(query_text, formatted);
  request.max_output_tokens = max_output_tokens;
  request.want_logits = want_logits;
  return backend_->generate(request);
}

GenerationResult IclService::serve_defended(const std::string& query_text,
                                            const FormattedQuery& formatted) const {
  if (!defense_) throw Error("serve_defended: no defense configured");
  std::size_t needed = k_ * defense_->m;
  if (index_.size() < needed)
    throw InsufficientNeighbors("defense needs " + std::to_string(needed) +
                                " neighbors, index holds " + std::to_string(index_.size()));

  std::vector<DqaRecord> neighbors = retrieve(query_text, needed);

  // Contiguous rank partition: group j holds ranks [j*k, (j+1)*k).
  std::vector<std::string> answers;
  answers.reserve(defense_->m);
  for (std::size_t group = 0; group < defense_->m; ++group) {
    std::vector<DqaRecord> shots(neighbors.begin() + static_cast<std::ptrdiff_t>(group * k_),
                                 neighbors.begin() + static_cast<std::ptrdiff_t>((group + 1) * k_));
    GenerationRequest request;
    request.prompt = build_prompt(shots, formatted, template_);
    request.max_output_tokens = answer_token_budget_;
    answers.push_back(backend_->generate(request).text);
  }

  std::vector<std::string> frequent = top_c_frequent_words(answers, defense_->c);
  GenerationRequest final_request;
  final_request.prompt = template_.instruction + defense_->final_prompt_prefix +
                         join_words(frequent) + template_.joiner + formatted.rendered;
  final_request.max_output_tokens = answer_token_budget_;
  return backend_->generate(final_request);
}

}  // namespace iclmia
