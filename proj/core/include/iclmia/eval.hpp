#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "iclmia/attacks.hpp"

namespace iclmia {

struct SingleClass : Error {
  using Error::Error;
};

struct InvalidArgs : Error {
  using Error::Error;
};

enum class Arm { member_index, nonmember_index };

inline const char* arm_name(Arm arm) {
  return arm == Arm::member_index ? "member_index" : "nonmember_index";
}

struct AttackRow {
  std::string record_id;
  double score = 0.0;
  int label = 0;  // member=1, nonmember=0; equals the arm
  Arm arm = Arm::nonmember_index;
};

// Balanced: each record contributes one row per arm.
struct AttackDataset {
  std::vector<AttackRow> rows;
};

struct Forest1dConfig {
  std::size_t estimators = 20;
  std::size_t max_depth = 4;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

struct PooledProbability {
  std::string record_id;
  Arm arm = Arm::nonmember_index;
  double probability = 0.0;
  int label = 0;
};

struct RocPoint {
  double fpr;
  double tpr;
};

struct EvalReport {
  std::vector<PooledProbability> pooled;
  double auc = 0.0;      // on classifier probabilities
  double raw_auc = 0.0;  // on raw attack scores, bypassing the classifier
  std::map<double, double> tpr_at_fpr;  // targets 0.01 / 0.05 / 0.10
  std::vector<RocPoint> roc_points;
};

using AttackRunner = std::function<double(const IclService&, const DqaRecord&)>;

// Runs the attack against both arms for every record; 2*|records| rows.
AttackDataset build_attack_dataset(const AttackRunner& runner,
                                   const std::vector<DqaRecord>& records,
                                   const IclService& member_service,
                                   const IclService& nonmember_service, std::size_t jobs = 1);

// Stratified cross-validated probabilities from a bootstrap ensemble of
// depth-limited 1-d threshold trees; held-out probability is the fraction
// of trees voting member. Deterministic given (dataset order, seed).
std::vector<PooledProbability> forest_cv_probabilities(const AttackDataset& dataset,
                                                       const Forest1dConfig& config);

// Threshold sweep over descending unique values (ties grouped); AUC by
// trapezoid. Points start at (0,0) and end at (1,1).
std::pair<std::vector<RocPoint>, double> roc_auc(const std::vector<PooledProbability>& pooled);

// Max TPR over sweep thresholds with FPR <= target; no interpolation.
std::map<double, double> tpr_at_fpr(const std::vector<PooledProbability>& pooled,
                                    const std::vector<double>& targets = {0.01, 0.05, 0.10});

// Full evaluation: classifier CV, ROC/AUC on probabilities, raw-score AUC.
EvalReport evaluate(const AttackDataset& dataset, const Forest1dConfig& config);

// k/N * (1 - 1/N)^(k-1): probability that a random k-shot prompt samples
// the query, per the random-demonstration baseline analysis.
double random_inclusion_probability(std::size_t k, std::size_t N);

}  // namespace iclmia
