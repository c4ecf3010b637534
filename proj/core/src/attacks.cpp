#include "iclmia/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace iclmia {

KnnRegressor::KnnRegressor(std::vector<std::pair<double, double>> pairs, std::size_t k_neighbors)
    : pairs_(std::move(pairs)), k_neighbors_(k_neighbors) {
  if (pairs_.empty()) throw Error("KnnRegressor: needs at least one training pair");
  if (k_neighbors_ < 1) throw Error("KnnRegressor: k_neighbors must be >= 1");
}

double KnnRegressor::predict(double query_s) const {
  struct Neighbor {
    double distance;
    std::size_t index;
  };
  std::vector<Neighbor> neighbors;
  neighbors.reserve(pairs_.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    neighbors.push_back({std::abs(pairs_[i].first - query_s), i});
  }
  std::size_t take = std::min(k_neighbors_, neighbors.size());
  std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(take),
                    neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
                      if (a.distance != b.distance) return a.distance < b.distance;
                      return a.index < b.index;
                    });
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum += pairs_[neighbors[i].index].second;
  return sum / static_cast<double>(take);
}

double PenaltyFn::evaluate(std::size_t i) const {
  if (i < 1) throw Error("PenaltyFn: index must be >= 1");
  switch (kind) {
    case PenaltyKind::inverse:
      return 1.0 / static_cast<double>(i);
    case PenaltyKind::inverse_log:
      // 1/log(i), with i clamped to 2 to sidestep the log(1)=0 singularity.
      return 1.0 / std::log(static_cast<double>(std::max<std::size_t>(i, 2)));
  }
  throw Error("PenaltyFn: unknown kind");
}

const std::string& attack_text(const DqaRecord& record, bool use_paraphrased) {
  if (use_paraphrased && record.paraphrased_text && !record.paraphrased_text->empty())
    return *record.paraphrased_text;
  return record.text;
}

double weighted_similarity_score(const std::vector<std::pair<std::size_t, double>>& similarities,
                                 const PenaltyFn& penalty) {
  double score = 0.0;
  for (const auto& [i, s] : similarities) score += s * penalty.evaluate(i);
  return score;
}

namespace {

// Similarity f between a prediction and a target string; 0 for an empty
// prediction (nothing to embed).
double prediction_similarity(const EmbeddingProvider& provider, const std::string& prediction,
                             const std::string& target) {
  if (split_words(prediction).empty()) return 0.0;
  return dot(provider.embed(prediction), provider.embed(target));
}

}  // namespace

AttackTrace reference_attack(const IclService& victim, const IclService& reference,
                             const DqaRecord& record, const PrefixPlan& plan,
                             std::size_t regressor_k, bool use_paraphrased) {
  const std::string& text = attack_text(record, use_paraphrased);
  const auto words = split_words(text);
  const auto& tmpl = victim.prompt_template();
  const auto& provider = victim.provider();
  std::size_t n = plan.n();

  AttackTrace trace;
  trace.record_id = record.id;

  std::vector<std::pair<double, double>> training;  // (S^r, L^r)
  std::vector<double> victim_similarities;

  for (std::size_t i : plan.effective_indices()) {
    bool full = (i == n);
    std::string prefix = word_prefix(text, i);
    FormattedQuery formatted =
        full ? format_query(tmpl, prefix, record.question) : format_query(tmpl, prefix, {});
    std::size_t budget = full ? victim.answer_token_budget() : 1;
    std::string target = full ? record.answer : words[i];

    GenerationResult victim_result = victim.serve(prefix, formatted, budget);
    ++trace.generate_calls;

    std::string reference_prompt = reference.render(prefix, formatted);
    GenerationRequest reference_request;
    reference_request.prompt = reference_prompt;
    reference_request.max_output_tokens = budget;
    GenerationResult reference_result = reference.backend().generate(reference_request);
    ++trace.generate_calls;

    auto scored = reference.backend().score_continuation(reference_prompt, target);
    ++trace.scoring_calls;
    double reference_logprob = sum_logprobs(scored);
    if (full && !scored.empty()) reference_logprob /= static_cast<double>(scored.size());

    double s_v = prediction_similarity(provider, victim_result.text, target);
    double s_r = prediction_similarity(provider, reference_result.text, target);
    training.emplace_back(s_r, reference_logprob);
    victim_similarities.push_back(s_v);

    TraceRow row;
    row.prefix_index = i;
    row.victim_prediction = victim_result.text;
    row.reference_prediction = reference_result.text;
    row.victim_similarity = s_v;
    row.reference_similarity = s_r;
    row.reference_logprob = reference_logprob;
    trace.rows.push_back(std::move(row));
  }

  KnnRegressor regressor(training, regressor_k);
  double sum = 0.0;
  for (std::size_t r = 0; r < trace.rows.size(); ++r) {
    double predicted = regressor.predict(victim_similarities[r]);
    trace.rows[r].predicted_victim_logprob = predicted;
    sum += predicted;
  }
  trace.score = sum / static_cast<double>(trace.rows.size());
  return trace;
}

AttackTrace prediction_only_attack(const IclService& service, const DqaRecord& record,
                                   const PrefixPlan& plan, const PenaltyFn& penalty,
                                   bool use_paraphrased) {
  const std::string& text = attack_text(record, use_paraphrased);
  const auto& tmpl = service.prompt_template();

  AttackTrace trace;
  trace.record_id = record.id;
  std::vector<std::pair<std::size_t, double>> similarities;

  for (std::size_t i : plan.indices()) {
    std::string prefix = word_prefix(text, i);
    FormattedQuery formatted = format_query(tmpl, prefix, record.question);
    GenerationResult result = service.serve(prefix, formatted, service.answer_token_budget());
    ++trace.serve_calls;

    double s = prediction_similarity(service.provider(), result.text, record.answer);
    similarities.emplace_back(i, s);

    TraceRow row;
    row.prefix_index = i;
    row.victim_prediction = result.text;
    row.victim_similarity = s;
    row.weight = penalty.evaluate(i);
    trace.rows.push_back(std::move(row));
  }

  trace.score = weighted_similarity_score(similarities, penalty);
  return trace;
}

AttackTrace logit_attack(const IclService& service, const DqaRecord& record,
                         bool use_paraphrased) {
  const std::string& text = attack_text(record, use_paraphrased);
  FormattedQuery formatted = format_query(service.prompt_template(), text, record.question);

  GenerationResult result =
      service.serve(text, formatted, service.answer_token_budget(), /*want_logits=*/true);
  if (!result.logits || result.logits->rows.empty())
    throw LogitsUnavailable("backend returned no logits");

  std::vector<std::size_t> answer_ids = service.backend().token_ids(record.answer);
  std::size_t count = std::min({service.answer_token_budget(), answer_ids.size(),
                                result.logits->rows.size()});
  if (count == 0) throw LogitsUnavailable("no scorable answer tokens");

  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += result.logits->rows[i][answer_ids[i]];

  AttackTrace trace;
  trace.record_id = record.id;
  trace.generate_calls = 1;
  trace.score = sum / static_cast<double>(count);
  TraceRow row;
  row.prefix_index = word_count(text);
  row.victim_prediction = result.text;
  trace.rows.push_back(std::move(row));
  return trace;
}

AttackTrace repeat_attack(const IclService& service, const DqaRecord& record, double p,
                          bool use_paraphrased) {
  const std::string& text = attack_text(record, use_paraphrased);
  auto words = split_words(text);
  std::size_t n = words.size();
  if (n < 2) throw Error("repeat_attack: text must have at least 2 words");
  if (!(p > 0.0) || p > 1.0) throw Error("repeat_attack: p must be in (0, 1]");

  auto i = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));
  if (i < 1) i = 1;
  if (i >= n) i = n - 1;
  std::size_t budget = std::min<std::size_t>(250, n - i);

  std::string prefix = word_prefix(text, i);
  FormattedQuery formatted = format_query(service.prompt_template(), prefix, {});
  GenerationResult result = service.serve(prefix, formatted, budget);

  std::vector<std::string> suffix_words(words.begin() + static_cast<std::ptrdiff_t>(i),
                                        words.end());
  std::string true_suffix = join_words(suffix_words);

  AttackTrace trace;
  trace.record_id = record.id;
  trace.serve_calls = 1;
  trace.score = prediction_similarity(service.provider(), result.text, true_suffix);
  TraceRow row;
  row.prefix_index = i;
  row.victim_prediction = result.text;
  row.victim_similarity = trace.score;
  trace.rows.push_back(std::move(row));
  return trace;
}

AttackTrace brainwash_attack(const IclService& service, const DqaRecord& record,
                             const BrainwashConfig& config, bool use_paraphrased) {
  if (config.max_tries < 1) throw Error("brainwash_attack: max_tries must be >= 1");
  const std::string& text = attack_text(record, use_paraphrased);
  const auto& tmpl = service.prompt_template();
  FormattedQuery base = format_query(tmpl, text, record.question);
  std::string normalized_dummy = ascii_lower(normalize_words(config.dummy_answer));

  AttackTrace trace;
  trace.record_id = record.id;
  std::size_t flipped_at = config.max_tries;
  for (std::size_t iteration = 1; iteration <= config.max_tries; ++iteration) {
    FormattedQuery composite = base;
    composite.rendered.clear();
    for (std::size_t c = 0; c < iteration; ++c) {
      composite.rendered += base.rendered + config.dummy_answer + tmpl.joiner;
    }
    composite.rendered += base.rendered;

    GenerationResult result = service.serve(text, composite, service.answer_token_budget());
    ++trace.serve_calls;
    TraceRow row;
    row.prefix_index = iteration;
    row.victim_prediction = result.text;
    trace.rows.push_back(std::move(row));

    if (ascii_lower(normalize_words(result.text)) == normalized_dummy) {
      flipped_at = iteration;
      break;
    }
  }
  trace.score = static_cast<double>(flipped_at);
  return trace;
}

}  // namespace iclmia
