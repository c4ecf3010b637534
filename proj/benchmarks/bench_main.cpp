// Microbenchmarks for the hot paths: embedding, exact retrieval, prompt
// assembly, and the cross-validated threshold forest.
#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "iclmia/embedding.hpp"
#include "iclmia/eval.hpp"
#include "iclmia/prompt.hpp"
#include "iclmia/retrieval.hpp"

namespace {

using namespace iclmia;

std::string make_text(std::size_t words, std::uint64_t salt) {
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) text += ' ';
    text += "w" + std::to_string(salt) + "x" + std::to_string(i);
  }
  return text;
}

void BM_HashEmbed(benchmark::State& state) {
  std::string text = make_text(static_cast<std::size_t>(state.range(0)), 7);
  WordHashEmbedder embedder(64);
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(text));
}
BENCHMARK(BM_HashEmbed)->Arg(16)->Arg(128)->Arg(512);

void BM_IndexSearch(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingVector v(64);
    for (double& x : v) x = gauss(rng);
    double norm = norm2(v);
    for (double& x : v) x /= norm;
    entries.emplace_back("id" + std::to_string(i), std::move(v));
  }
  FlatIndex index(entries, 64);
  const EmbeddingVector& query = entries[n / 2].second;
  for (auto _ : state) benchmark::DoNotOptimize(index.search(query, 8));
}
BENCHMARK(BM_IndexSearch)->Arg(100)->Arg(1000)->Arg(10000);

void BM_BuildPrompt(benchmark::State& state) {
  PromptTemplate tmpl = PromptTemplate::compact();
  std::vector<DqaRecord> demos;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i)
    demos.push_back({"d" + std::to_string(i), make_text(120, i), "question " + std::to_string(i),
                     "answer " + std::to_string(i), std::nullopt});
  FormattedQuery q = format_query(tmpl, make_text(120, 999), std::string("the question"));
  for (auto _ : state) benchmark::DoNotOptimize(build_prompt(demos, q, tmpl));
}
BENCHMARK(BM_BuildPrompt)->Arg(1)->Arg(4)->Arg(16);

void BM_ForestCv(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  AttackDataset dataset;
  for (std::size_t i = 0; i < n; ++i) {
    dataset.rows.push_back({"m" + std::to_string(i), gauss(rng) + 1.0, 1, Arm::member_index});
    dataset.rows.push_back({"n" + std::to_string(i), gauss(rng), 0, Arm::nonmember_index});
  }
  Forest1dConfig cfg;
  cfg.seed = 9;
  for (auto _ : state) benchmark::DoNotOptimize(forest_cv_probabilities(dataset, cfg));
}
BENCHMARK(BM_ForestCv)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
