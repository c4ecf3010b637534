#include "iclmia/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace iclmia {

AttackDataset build_attack_dataset(const AttackRunner& runner,
                                   const std::vector<DqaRecord>& records,
                                   const IclService& member_service,
                                   const IclService& nonmember_service, std::size_t jobs) {
  AttackDataset dataset;
  dataset.rows.resize(records.size() * 2);

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const DqaRecord& rec = records[r];
      try {
        dataset.rows[2 * r] = {rec.id, runner(member_service, rec), 1, Arm::member_index};
        dataset.rows[2 * r + 1] = {rec.id, runner(nonmember_service, rec), 0,
                                   Arm::nonmember_index};
      } catch (const Error& e) {
        throw Error("attack failed on record '" + rec.id + "': " + e.what());
      }
    }
  };

  if (jobs <= 1 || records.size() < 2) {
    run_range(0, records.size());
  } else {
    std::size_t workers = std::min(jobs, records.size());
    std::size_t chunk = (records.size() + workers - 1) / workers;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> failures(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(begin + chunk, records.size());
      threads.emplace_back([&, w, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  for (const auto& row : dataset.rows) {
    if (!std::isfinite(row.score)) throw Error("non-finite score for record '" + row.record_id + "'");
  }
  return dataset;
}

namespace {

struct TrainPoint {
  double score;
  int label;
};

// Depth-limited 1-d threshold tree on (score, label) points. Splits on
// midpoints between sorted distinct scores by Gini gain, ties broken
// toward the lower threshold.
class ThresholdTree {
 public:
  ThresholdTree(std::vector<TrainPoint> points, std::size_t max_depth) {
    std::sort(points.begin(), points.end(),
              [](const TrainPoint& a, const TrainPoint& b) { return a.score < b.score; });
    root_ = build(points, 0, points.size(), max_depth);
  }

  bool votes_member(double score) const {
    std::size_t node = root_;
    while (!nodes_[node].leaf) {
      node = score <= nodes_[node].threshold ? nodes_[node].left : nodes_[node].right;
    }
    return nodes_[node].member_vote;
  }

 private:
  struct Node {
    bool leaf = true;
    bool member_vote = false;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  static double gini(std::size_t members, std::size_t total) {
    if (total == 0) return 0.0;
    double p = static_cast<double>(members) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
  }

  // points[begin, end) sorted by score.
  std::size_t build(const std::vector<TrainPoint>& points, std::size_t begin, std::size_t end,
                    std::size_t depth_left) {
    std::size_t total = end - begin;
    std::size_t members = 0;
    for (std::size_t i = begin; i < end; ++i) members += points[i].label;

    std::size_t best_split = end;  // position of the first right-side point
    double best_gain = 0.0;
    if (depth_left > 0 && members > 0 && members < total) {
      double parent = gini(members, total);
      std::size_t left_members = 0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        left_members += points[i].label;
        if (points[i].score == points[i + 1].score) continue;  // not a distinct boundary
        std::size_t left_total = i + 1 - begin;
        std::size_t right_total = total - left_total;
        double child =
            (static_cast<double>(left_total) * gini(left_members, left_total) +
             static_cast<double>(right_total) * gini(members - left_members, right_total)) /
            static_cast<double>(total);
        double gain = parent - child;
        // Strictly-greater keeps the first (lowest-threshold) best split.
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_split = i + 1;
        }
      }
    }

    Node node;
    if (best_split == end) {
      node.leaf = true;
      node.member_vote = 2 * members > total;
      nodes_.push_back(node);
      return nodes_.size() - 1;
    }
    node.leaf = false;
    node.threshold = 0.5 * (points[best_split - 1].score + points[best_split].score);
    nodes_.push_back(node);
    std::size_t self = nodes_.size() - 1;
    std::size_t left = build(points, begin, best_split, depth_left - 1);
    std::size_t right = build(points, best_split, end, depth_left - 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  std::vector<Node> nodes_;
  std::size_t root_ = 0;
};

void require_both_labels(const std::vector<int>& labels) {
  bool has_member = false;
  bool has_nonmember = false;
  for (int l : labels) (l == 1 ? has_member : has_nonmember) = true;
  if (!has_member || !has_nonmember)
    throw SingleClass("both member and non-member rows are required");
}

// Sweep points over descending unique values, ties grouped, with (0,0)
// prepended; the final point is (1,1).
std::vector<RocPoint> sweep_points(const std::vector<double>& values,
                                   const std::vector<int>& labels) {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  for (int l : labels) (l == 1 ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0)
    throw SingleClass("ROC needs both member and non-member rows");

  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double v = values[order[i]];
    while (i < order.size() && values[order[i]] == v) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                      static_cast<double>(tp) / static_cast<double>(positives)});
  }
  return points;
}

double trapezoid_auc(const std::vector<RocPoint>& points) {
  double auc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    auc += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
  }
  return auc;
}

}  // namespace

std::vector<PooledProbability> forest_cv_probabilities(const AttackDataset& dataset,
                                                       const Forest1dConfig& config) {
  if (config.folds < 2) throw Error("forest: folds must be >= 2");
  if (config.estimators < 1) throw Error("forest: estimators must be >= 1");
  std::vector<int> labels;
  labels.reserve(dataset.rows.size());
  for (const auto& row : dataset.rows) labels.push_back(row.label);
  require_both_labels(labels);

  // Stratified fold assignment: seeded shuffle within each label, then
  // round-robin into folds.
  std::vector<std::size_t> fold_of(dataset.rows.size());
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
      if (dataset.rows[i].label == label) members.push_back(i);
    }
    std::mt19937_64 rng(mix_seed({config.seed, static_cast<std::uint64_t>(label)}));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) fold_of[members[j]] = j % config.folds;
  }

  std::vector<PooledProbability> pooled(dataset.rows.size());
  for (std::size_t fold = 0; fold < config.folds; ++fold) {
    std::vector<TrainPoint> train;
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
      if (fold_of[i] == fold) {
        held_out.push_back(i);
      } else {
        train.push_back({dataset.rows[i].score, dataset.rows[i].label});
      }
    }
    if (held_out.empty()) continue;
    if (train.empty()) throw Error("forest: empty training fold");

    std::vector<ThresholdTree> trees;
    trees.reserve(config.estimators);
    for (std::size_t b = 0; b < config.estimators; ++b) {
      std::mt19937_64 rng(mix_seed({config.seed, fold, b, 0x7265657473ULL}));
      std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
      std::vector<TrainPoint> sample;
      sample.reserve(train.size());
      for (std::size_t s = 0; s < train.size(); ++s) sample.push_back(train[pick(rng)]);
      trees.emplace_back(std::move(sample), config.max_depth);
    }

    for (std::size_t i : held_out) {
      std::size_t votes = 0;
      for (const auto& tree : trees) votes += tree.votes_member(dataset.rows[i].score) ? 1 : 0;
      pooled[i] = {dataset.rows[i].record_id, dataset.rows[i].arm,
                   static_cast<double>(votes) / static_cast<double>(config.estimators),
                   dataset.rows[i].label};
    }
  }
  return pooled;
}

std::pair<std::vector<RocPoint>, double> roc_auc(const std::vector<PooledProbability>& pooled) {
  std::vector<double> values;
  std::vector<int> labels;
  for (const auto& p : pooled) {
    values.push_back(p.probability);
    labels.push_back(p.label);
  }
  auto points = sweep_points(values, labels);
  return {points, trapezoid_auc(points)};
}

std::map<double, double> tpr_at_fpr(const std::vector<PooledProbability>& pooled,
                                    const std::vector<double>& targets) {
  auto [points, auc] = roc_auc(pooled);
  (void)auc;
  std::map<double, double> out;
  for (double target : targets) {
    double best = 0.0;
    for (const auto& point : points) {
      if (point.fpr <= target) best = std::max(best, point.tpr);
    }
    out[target] = best;
  }
  return out;
}

EvalReport evaluate(const AttackDataset& dataset, const Forest1dConfig& config) {
  EvalReport report;
  report.pooled = forest_cv_probabilities(dataset, config);
  auto [points, auc] = roc_auc(report.pooled);
  report.roc_points = std::move(points);
  report.auc = auc;
  report.tpr_at_fpr = tpr_at_fpr(report.pooled);

  std::vector<PooledProbability> raw;
  raw.reserve(dataset.rows.size());
  for (const auto& row : dataset.rows) {
    raw.push_back({row.record_id, row.arm, row.score, row.label});
  }
  report.raw_auc = roc_auc(raw).second;
  return report;
}

double random_inclusion_probability(std::size_t k, std::size_t N) {
  if (k < 1 || N < 1 || k > N) throw InvalidArgs("require 1 <= k <= N");
  double n = static_cast<double>(N);
  return (static_cast<double>(k) / n) *
         std::pow(1.0 - 1.0 / n, static_cast<double>(k - 1));
}

}  // namespace iclmia
