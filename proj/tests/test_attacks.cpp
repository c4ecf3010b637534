#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "iclmia/attacks.hpp"
#include "iclmia/oracle_lm.hpp"
#include "synthetic.hpp"

using namespace iclmia;

namespace {

// Two-arm oracle setup shared by the attack tests.
struct Arms {
  CorpusSet corpus = testutil::make_corpus(10, 20);
  CorpusSet demos;
  CorpusSet queries;
  // High dimension keeps single-word prefixes retrieving their own record.
  std::shared_ptr<EmbeddingProvider> provider = std::make_shared<WordHashEmbedder>(256);
  std::shared_ptr<CallCountingBackend> backend;
  std::unique_ptr<IclService> member;
  std::unique_ptr<IclService> nonmember;
  std::unique_ptr<IclService> reference;

  explicit Arms(std::optional<std::size_t> brainwash_break = {}) {
    demos.records.assign(corpus.records.begin(), corpus.records.begin() + 7);
    queries.records.assign(corpus.records.begin() + 7, corpus.records.end());
    queries.role = CorpusRole::query;
    OracleLmConfig cfg;
    cfg.seed = 23;
    cfg.brainwash_break_iteration = brainwash_break;
    backend = std::make_shared<CallCountingBackend>(std::make_shared<OracleLm>(cfg, corpus));
    auto tmpl = PromptTemplate::compact();
    member = std::make_unique<IclService>(build_member_index(demos, queries, *provider),
                                          corpus.records, tmpl, provider, backend, 1);
    nonmember = std::make_unique<IclService>(build_nonmember_index(demos, queries, *provider),
                                             corpus.records, tmpl, provider, backend, 1);
    reference = std::make_unique<IclService>(build_index(queries, *provider), queries.records,
                                             tmpl, provider, backend, 1);
  }
};

double brute_knn(const std::vector<std::pair<double, double>>& pairs, std::size_t k, double s) {
  struct Row {
    double d;
    std::size_t i;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < pairs.size(); ++i) rows.push_back({std::abs(pairs[i].first - s), i});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.d != b.d) return a.d < b.d;
    return a.i < b.i;
  });
  std::size_t take = std::min(k, rows.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum += pairs[rows[i].i].second;
  return sum / static_cast<double>(take);
}

}  // namespace

TEST_CASE("KnnRegressor matches the brute-force oracle bit-exactly") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng() % 60;
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(uni(rng), uni(rng));
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
      KnnRegressor reg(pairs, k);
      for (int q = 0; q < 5; ++q) {
        double s = uni(rng);
        CHECK(reg.predict(s) == brute_knn(pairs, k, s));
      }
    }
  }
  CHECK_THROWS_AS(KnnRegressor({}, 3), Error);
  CHECK_THROWS_AS(KnnRegressor({{0.0, 0.0}}, 0), Error);
}

TEST_CASE("penalty functions") {
  PenaltyFn inv{PenaltyKind::inverse};
  CHECK(inv.evaluate(1) == 1.0);
  CHECK(inv.evaluate(4) == 0.25);
  PenaltyFn invlog{PenaltyKind::inverse_log};
  CHECK(invlog.evaluate(1) == invlog.evaluate(2));  // singularity at 1 clamped
  CHECK(invlog.evaluate(9) == doctest::Approx(1.0 / std::log(9.0)));
  CHECK_THROWS_AS(inv.evaluate(0), Error);
}

TEST_CASE("prediction-only score algebra") {
  PenaltyFn inv{PenaltyKind::inverse};
  double score = weighted_similarity_score({{1, 0.2}, {2, 0.4}, {4, 0.8}}, inv);
  CHECK(score == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("prediction-only attack separates arms and counts serve calls") {
  Arms arms;
  PenaltyFn inv{PenaltyKind::inverse};
  for (const auto& rec : arms.queries.records) {
    PrefixPlan plan(word_count(rec.text), 1.0, false);
    AttackTrace m = prediction_only_attack(*arms.member, rec, plan, inv);
    AttackTrace n = prediction_only_attack(*arms.nonmember, rec, plan, inv);
    CHECK(m.score > n.score);
    CHECK(m.serve_calls == plan.indices().size());
    CHECK(m.rows.size() == plan.indices().size());
    for (std::size_t i = 0; i < m.rows.size(); ++i)
      CHECK(m.rows[i].weight == inv.evaluate(plan.indices()[i]));
  }
}

TEST_CASE("reference attack: call budget and arm separation") {
  Arms arms;
  const DqaRecord& rec = arms.queries.records[0];
  // n=20, p=0.25 -> indices {1..5}; include_full appends 20 -> 6 probes.
  PrefixPlan plan(word_count(rec.text), 0.25, true);
  REQUIRE(plan.indices().size() == 5);
  REQUIRE(plan.effective_indices().size() == 6);

  arms.backend->reset_counts();
  AttackTrace m = reference_attack(*arms.member, *arms.reference, rec, plan);
  CHECK(m.generate_calls == 12);  // 6 victim + 6 reference
  CHECK(m.scoring_calls == 6);
  CHECK(arms.backend->generate_calls() == 12);
  CHECK(arms.backend->scoring_calls() == 6);

  // Separation over the full prefix plan, aggregated across query records.
  double member_sum = 0.0;
  double nonmember_sum = 0.0;
  for (const auto& q : arms.queries.records) {
    PrefixPlan full(word_count(q.text), 1.0, true);
    member_sum += reference_attack(*arms.member, *arms.reference, q, full).score;
    nonmember_sum += reference_attack(*arms.nonmember, *arms.reference, q, full).score;
  }
  CHECK(member_sum > nonmember_sum);
}

TEST_CASE("repeat attack regurgitation gap") {
  Arms arms;
  const DqaRecord& rec = arms.queries.records[1];
  AttackTrace m = repeat_attack(*arms.member, rec, 0.1);
  AttackTrace n = repeat_attack(*arms.nonmember, rec, 0.1);
  CHECK(m.rows[0].prefix_index == 2);  // floor(0.1 * 20)
  CHECK(m.score > n.score);
  CHECK(m.serve_calls == 1);

  DqaRecord tiny{"t", "word", "q", "a", std::nullopt};
  CHECK_THROWS_AS(repeat_attack(*arms.member, tiny, 0.1), Error);
  CHECK_THROWS_AS(repeat_attack(*arms.member, rec, 0.0), Error);
}

TEST_CASE("brainwash attack returns the flip iteration per arm") {
  Arms arms(std::size_t{3});
  BrainwashConfig cfg;  // max_tries 10, dummy "banana"
  const DqaRecord& rec = arms.queries.records[2];
  AttackTrace m = brainwash_attack(*arms.member, rec, cfg);
  AttackTrace n = brainwash_attack(*arms.nonmember, rec, cfg);
  CHECK(n.score == 3.0);
  CHECK(m.score == 4.0);
  CHECK(m.serve_calls == 4);  // stops at the flip

  BrainwashConfig zero;
  zero.max_tries = 0;
  CHECK_THROWS_AS(brainwash_attack(*arms.member, rec, zero), Error);
}

TEST_CASE("logit attack reads true-answer token logits") {
  Arms arms;
  const DqaRecord& rec = arms.queries.records[0];
  AttackTrace m = logit_attack(*arms.member, rec);
  AttackTrace n = logit_attack(*arms.nonmember, rec);
  CHECK(m.score == doctest::Approx(std::log(0.9)));
  CHECK(m.score > n.score);
  CHECK(m.generate_calls == 1);
}

TEST_CASE("attack_text honors the paraphrase toggle") {
  DqaRecord rec{"r", "original words", "q", "a", std::string("paraphrased words")};
  CHECK(attack_text(rec, false) == "original words");
  CHECK(attack_text(rec, true) == "paraphrased words");
  DqaRecord plain{"r2", "original", "q", "a", std::nullopt};
  CHECK(attack_text(plain, true) == "original");
}
