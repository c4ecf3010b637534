#include <doctest.h>

#include <cmath>

#include "iclmia/embedding.hpp"
#include "synthetic.hpp"

using namespace iclmia;

TEST_CASE("hash_embed is deterministic and unit-norm") {
  EmbeddingVector v = hash_embed("some text", 64);
  CHECK(v.size() == 64);
  CHECK(std::abs(norm2(v) - 1.0) < 1e-9);
  CHECK(v == hash_embed("some text", 64));
  CHECK(hash_embed("some text", 64) != hash_embed("other text", 64));
  CHECK_THROWS_AS(hash_embed("x", 1), Error);
}

TEST_CASE("unrelated texts embed near-orthogonally at dimension 64") {
  // Monte Carlo: the mean pairwise dot of distinct random-word embeddings
  // concentrates near 0.
  double sum = 0.0;
  const int pairs = 200;
  for (int i = 0; i < pairs; ++i) {
    EmbeddingVector a = hash_embed("left" + std::to_string(i), 64);
    EmbeddingVector b = hash_embed("right" + std::to_string(i), 64);
    sum += dot(a, b);
  }
  CHECK(std::abs(sum / pairs) < 0.05);
}

TEST_CASE("dot checks dimensions and self-similarity") {
  EmbeddingVector v = hash_embed("t", 16);
  CHECK(std::abs(dot(v, v) - 1.0) < 1e-9);
  EmbeddingVector w = hash_embed("t", 8);
  CHECK_THROWS_AS(dot(v, w), DimensionMismatch);
}

TEST_CASE("word-level embedder makes prefixes similar to their own text") {
  WordHashEmbedder provider(64);
  CorpusSet corpus = testutil::make_corpus(5, 12);
  const std::string& text = corpus.records[2].text;
  std::string prefix = "tok2x0 tok2x1 tok2x2";

  double own = dot(provider.embed(prefix), provider.embed(text));
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    if (i == 2) continue;
    double other = dot(provider.embed(prefix), provider.embed(corpus.records[i].text));
    CHECK(own > other + 0.2);
  }
  CHECK_THROWS_AS(provider.embed("   "), ZeroVector);
}

TEST_CASE("embedding store round-trips and validates") {
  auto dir = testutil::fresh_dir("embedding_store");
  auto path = dir / "store.jsonl";

  EmbeddingVector unit = hash_embed("alpha", 8);
  EmbeddingVector doubled = unit;
  for (double& x : doubled) x *= 2.0;  // store should re-normalize
  write_store(path, 8, {{fnv1a64("alpha"), doubled}});

  auto provider = load_store(path);
  CHECK(provider->dimension() == 8);
  EmbeddingVector back = provider->embed("alpha");
  REQUIRE(back.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(back[i] == doctest::Approx(unit[i]).epsilon(1e-12));
  CHECK_THROWS_AS(provider->embed("beta"), MissingEmbedding);

  write_store(path, 8, {{1, hash_embed("x", 4)}});
  CHECK_THROWS_AS(load_store(path), InconsistentDimension);
}
