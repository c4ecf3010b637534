#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iclmia/service.hpp"

namespace iclmia {

// Per-prefix record of predictions, similarities, and weights behind a
// single membership score.
struct TraceRow {
  std::size_t prefix_index = 0;
  std::string victim_prediction;
  std::optional<std::string> reference_prediction;
  double victim_similarity = 0.0;
  std::optional<double> reference_similarity;
  std::optional<double> reference_logprob;
  std::optional<double> predicted_victim_logprob;
  std::optional<double> weight;
};

struct AttackTrace {
  std::string record_id;
  std::vector<TraceRow> rows;
  double score = 0.0;
  std::size_t generate_calls = 0;
  std::size_t scoring_calls = 0;
  std::size_t serve_calls = 0;
};

// 1-d kNN regression: mean of the l-values of the nearest training
// s-values by absolute difference, ties broken by lower training index.
class KnnRegressor {
 public:
  explicit KnnRegressor(std::vector<std::pair<double, double>> pairs, std::size_t k_neighbors = 5);
  double predict(double query_s) const;

 private:
  std::vector<std::pair<double, double>> pairs_;
  std::size_t k_neighbors_;
};

enum class PenaltyKind { inverse, inverse_log };

// Positive decaying weight amplifying early-prefix membership signals.
struct PenaltyFn {
  PenaltyKind kind = PenaltyKind::inverse;
  double evaluate(std::size_t i) const;
};

struct BrainwashConfig {
  std::size_t max_tries = 10;
  std::string dummy_answer = "banana";
};

// Selects the adversary-side text: the paraphrase when requested and present.
const std::string& attack_text(const DqaRecord& record, bool use_paraphrased);

// Sum of similarity * penalty over (prefix index, similarity) pairs; the
// prediction-only score algebra, exposed for direct testing.
double weighted_similarity_score(const std::vector<std::pair<std::size_t, double>>& similarities,
                                 const PenaltyFn& penalty);

// Reference-model attack: probes both services over the prefix plan, learns
// the similarity-to-logprob map on the reference, and scores the victim with
// the mean predicted log-likelihood.
AttackTrace reference_attack(const IclService& victim, const IclService& reference,
                             const DqaRecord& record, const PrefixPlan& plan,
                             std::size_t regressor_k = 5, bool use_paraphrased = false);

// Prediction-only attack: weighted sum of answer similarities over prefixes.
AttackTrace prediction_only_attack(const IclService& service, const DqaRecord& record,
                                   const PrefixPlan& plan, const PenaltyFn& penalty,
                                   bool use_paraphrased = false);

// Mean logit assigned to the true-answer tokens of a full-query generation.
AttackTrace logit_attack(const IclService& service, const DqaRecord& record,
                         bool use_paraphrased = false);

// Similarity between the predicted and true text suffix after a p-fraction prefix.
AttackTrace repeat_attack(const IclService& service, const DqaRecord& record, double p = 0.1,
                          bool use_paraphrased = false);

// Iteration at which prepended wrong-answer copies flip the model's reply.
AttackTrace brainwash_attack(const IclService& service, const DqaRecord& record,
                             const BrainwashConfig& config, bool use_paraphrased = false);

}  // namespace iclmia
