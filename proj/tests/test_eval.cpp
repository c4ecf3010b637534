#include <doctest.h>

#include <cmath>
#include <random>

#include "iclmia/eval.hpp"
#include "iclmia/oracle_lm.hpp"
#include "synthetic.hpp"

using namespace iclmia;

namespace {

AttackDataset make_dataset(const std::vector<double>& member_scores,
                           const std::vector<double>& nonmember_scores) {
  AttackDataset d;
  for (std::size_t i = 0; i < member_scores.size(); ++i)
    d.rows.push_back({"m" + std::to_string(i), member_scores[i], 1, Arm::member_index});
  for (std::size_t i = 0; i < nonmember_scores.size(); ++i)
    d.rows.push_back({"n" + std::to_string(i), nonmember_scores[i], 0, Arm::nonmember_index});
  return d;
}

std::vector<PooledProbability> make_pooled(const std::vector<std::pair<double, int>>& rows) {
  std::vector<PooledProbability> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push_back({"r" + std::to_string(i),
                   rows[i].second ? Arm::member_index : Arm::nonmember_index, rows[i].first,
                   rows[i].second});
  return out;
}

// Mann-Whitney pair statistic: (concordant + ties/2) / (P*N).
double mann_whitney(const std::vector<PooledProbability>& pooled) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (const auto& a : pooled) {
    if (a.label != 1) continue;
    for (const auto& b : pooled) {
      if (b.label != 0) continue;
      ++pairs;
      if (a.probability > b.probability) num += 1.0;
      if (a.probability == b.probability) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("build_attack_dataset is balanced, ordered, and parallel-safe") {
  CorpusSet corpus = testutil::make_corpus(7, 8);
  CorpusSet demos, queries;
  demos.records.assign(corpus.records.begin(), corpus.records.begin() + 5);
  queries.records.assign(corpus.records.begin() + 5, corpus.records.end());
  queries.role = CorpusRole::query;
  auto provider = std::make_shared<WordHashEmbedder>(32);
  OracleLmConfig cfg;
  cfg.seed = 3;
  auto backend = std::make_shared<OracleLm>(cfg, corpus);
  IclService member(build_member_index(demos, queries, *provider), corpus.records,
                    PromptTemplate::compact(), provider, backend, 1);
  IclService nonmember(build_nonmember_index(demos, queries, *provider), corpus.records,
                       PromptTemplate::compact(), provider, backend, 1);

  const IclService* member_ptr = &member;
  AttackRunner runner = [&](const IclService& svc, const DqaRecord& rec) {
    return (&svc == member_ptr ? 10.0 : 1.0) + static_cast<double>(rec.text.size()) * 1e-3;
  };

  AttackDataset d1 = build_attack_dataset(runner, queries.records, member, nonmember, 1);
  REQUIRE(d1.rows.size() == 4);
  CHECK(d1.rows[0].record_id == "rec5");
  CHECK(d1.rows[0].label == 1);
  CHECK(d1.rows[0].arm == Arm::member_index);
  CHECK(d1.rows[1].record_id == "rec5");
  CHECK(d1.rows[1].label == 0);

  AttackDataset d2 = build_attack_dataset(runner, queries.records, member, nonmember, 4);
  REQUIRE(d2.rows.size() == d1.rows.size());
  for (std::size_t i = 0; i < d1.rows.size(); ++i) {
    CHECK(d1.rows[i].record_id == d2.rows[i].record_id);
    CHECK(d1.rows[i].score == d2.rows[i].score);
  }

  AttackRunner failing = [](const IclService&, const DqaRecord&) -> double {
    throw Error("boom");
  };
  CHECK_THROWS_WITH_AS(build_attack_dataset(failing, queries.records, member, nonmember, 1),
                       "attack failed on record 'rec5': boom", Error);
}

TEST_CASE("forest: perfect separation yields probabilities 1/0 and AUC 1") {
  AttackDataset d = make_dataset({2.0, 2.1, 2.2, 2.3, 2.4, 2.5, 2.6, 2.7, 2.8, 2.9},
                                 {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  Forest1dConfig cfg;
  cfg.seed = 12;
  auto pooled = forest_cv_probabilities(d, cfg);
  REQUIRE(pooled.size() == 20);
  for (const auto& p : pooled) CHECK(p.probability == (p.label == 1 ? 1.0 : 0.0));
  CHECK(roc_auc(pooled).second == 1.0);
}

TEST_CASE("forest: identical scores carry no signal") {
  AttackDataset d = make_dataset(std::vector<double>(10, 0.5), std::vector<double>(10, 0.5));
  Forest1dConfig cfg;
  cfg.seed = 5;
  auto pooled = forest_cv_probabilities(d, cfg);
  CHECK(roc_auc(pooled).second == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("forest is deterministic and rejects degenerate inputs") {
  AttackDataset d = make_dataset({1.0, 2.0, 1.5, 2.5, 0.9}, {0.2, 0.8, 0.1, 1.1, 0.3});
  Forest1dConfig cfg;
  cfg.seed = 77;
  cfg.folds = 5;
  auto a = forest_cv_probabilities(d, cfg);
  auto b = forest_cv_probabilities(d, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].probability == b[i].probability);

  AttackDataset single = make_dataset({1.0, 2.0}, {});
  CHECK_THROWS_AS(forest_cv_probabilities(single, cfg), SingleClass);
}

TEST_CASE("roc_auc worked examples") {
  CHECK(roc_auc(make_pooled({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}})).second == 1.0);
  CHECK(roc_auc(make_pooled({{0.9, 1}, {0.4, 1}, {0.8, 0}, {0.3, 0}})).second ==
        doctest::Approx(0.75).epsilon(1e-12));

  auto swapped = make_pooled({{0.9, 0}, {0.4, 0}, {0.8, 1}, {0.3, 1}});
  CHECK(roc_auc(swapped).second == doctest::Approx(0.25).epsilon(1e-12));

  auto [points, auc] = roc_auc(make_pooled({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}}));
  CHECK(points.front().fpr == 0.0);
  CHECK(points.front().tpr == 0.0);
  CHECK(points.back().fpr == 1.0);
  CHECK(points.back().tpr == 1.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    CHECK(points[i].fpr >= points[i - 1].fpr);
    CHECK(points[i].tpr >= points[i - 1].tpr);
  }
  CHECK_THROWS_AS(roc_auc(make_pooled({{0.5, 1}})), SingleClass);
}

TEST_CASE("trapezoid AUC equals the Mann-Whitney pair statistic") {
  std::mt19937_64 rng(909);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = 4 + rng() % 100;
    std::vector<std::pair<double, int>> rows;
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid forces plenty of ties.
      double v = static_cast<double>(rng() % 9) / 8.0;
      int label = static_cast<int>(rng() % 2);
      (label ? has1 : has0) = true;
      rows.emplace_back(v, label);
    }
    if (!has0 || !has1) continue;
    auto pooled = make_pooled(rows);
    CHECK(std::abs(roc_auc(pooled).second - mann_whitney(pooled)) < 1e-12);
  }
}

TEST_CASE("tpr_at_fpr worked examples and monotonicity") {
  auto perfect = make_pooled({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}});
  auto t = tpr_at_fpr(perfect);
  CHECK(t.at(0.01) == 1.0);
  CHECK(t.at(0.05) == 1.0);
  CHECK(t.at(0.10) == 1.0);

  std::vector<std::pair<double, int>> rows{{0.9, 1}};
  for (int i = 0; i < 99; ++i) rows.emplace_back(0.1 + i * 1e-3, 0);
  CHECK(tpr_at_fpr(make_pooled(rows)).at(0.01) == 1.0);

  auto flat = make_pooled({{0.5, 1}, {0.5, 1}, {0.5, 0}, {0.5, 0}});
  CHECK(tpr_at_fpr(flat).at(0.01) == 0.0);  // first achievable step is FPR 1

  auto mixed = make_pooled({{0.9, 1}, {0.8, 0}, {0.7, 1}, {0.1, 0}});
  auto tm = tpr_at_fpr(mixed, {0.01, 0.05, 0.10, 0.5, 1.0});
  double last = 0.0;
  for (const auto& [target, tpr] : tm) {
    CHECK(tpr >= last);
    last = tpr;
  }
}

TEST_CASE("monotone transforms leave raw-score metrics unchanged") {
  std::mt19937_64 rng(4);
  std::vector<std::pair<double, int>> rows;
  for (int i = 0; i < 60; ++i)
    rows.emplace_back(static_cast<double>(rng() % 12) / 4.0 - 1.0, static_cast<int>(rng() % 2));
  rows.emplace_back(0.0, 1);
  rows.emplace_back(0.0, 0);
  auto base = make_pooled(rows);

  auto transform = [&](auto&& f) {
    auto out = base;
    for (auto& p : out) p.probability = f(p.probability);
    return out;
  };
  auto affine = transform([](double x) { return 2.0 * x + 3.0; });
  auto cubic = transform([](double x) { return x * x * x; });

  CHECK(roc_auc(base).second == roc_auc(affine).second);
  CHECK(roc_auc(base).second == roc_auc(cubic).second);
  for (double target : {0.01, 0.05, 0.10}) {
    CHECK(tpr_at_fpr(base).at(target) == tpr_at_fpr(affine).at(target));
    CHECK(tpr_at_fpr(base).at(target) == tpr_at_fpr(cubic).at(target));
  }
}

TEST_CASE("evaluate produces classifier and raw AUC plus ROC artifacts") {
  AttackDataset d = make_dataset({2.0, 2.1, 2.2, 2.3, 2.4}, {0.0, 0.1, 0.2, 0.3, 0.4});
  Forest1dConfig cfg;
  cfg.seed = 1;
  cfg.folds = 5;
  EvalReport report = evaluate(d, cfg);
  CHECK(report.auc == 1.0);
  CHECK(report.raw_auc == 1.0);
  CHECK(report.tpr_at_fpr.at(0.01) == 1.0);
  CHECK(report.roc_points.size() >= 2);
  CHECK(report.pooled.size() == 10);
}

TEST_CASE("random_inclusion_probability") {
  CHECK(random_inclusion_probability(1, 10) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(random_inclusion_probability(2, 100) == doctest::Approx(0.0198).epsilon(1e-12));
  CHECK(random_inclusion_probability(1, 1) == 1.0);
  CHECK_THROWS_AS(random_inclusion_probability(0, 5), InvalidArgs);
  CHECK_THROWS_AS(random_inclusion_probability(6, 5), InvalidArgs);
}
