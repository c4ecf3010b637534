#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iclmia/common.hpp"

namespace iclmia {

struct GenerationRequest {
  std::string prompt;
  std::size_t max_output_tokens = 1;
  bool want_token_logprobs = false;
  bool want_logits = false;
};

struct TokenLogprob {
  std::string token;
  double logprob;  // <= 0
};

// Row r holds the logit vector for the r-th generated token over a
// fixed-size vocabulary view.
struct LogitMatrix {
  std::size_t vocab_size = 0;
  std::vector<std::vector<double>> rows;
};

struct GenerationResult {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  std::optional<LogitMatrix> logits;
};

struct ScoringUnsupported : Error {
  using Error::Error;
};

struct LogitsUnavailable : Error {
  using Error::Error;
};

struct TokenizerUnavailable : Error {
  using Error::Error;
};

// Language-model backend contract. Deterministic at temperature 0; a
// backend must tolerate concurrent generate calls.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  virtual GenerationResult generate(const GenerationRequest& request) = 0;

  // Per-token conditional log-probabilities of the continuation given the
  // prompt. Tokens concatenate to the continuation (word granularity for
  // the oracle). Throws ScoringUnsupported when the backend cannot score.
  virtual std::vector<TokenLogprob> score_continuation(const std::string& prompt,
                                                       const std::string& continuation) = 0;

  // Token-id view of a text in the backend's vocabulary, as needed by the
  // logit attack. Optional capability.
  virtual std::vector<std::size_t> token_ids(const std::string& text) const {
    (void)text;
    throw TokenizerUnavailable("backend exposes no tokenizer");
  }
};

// Decorator counting generate/scoring calls; used for call-budget checks.
class CallCountingBackend final : public LmBackend {
 public:
  explicit CallCountingBackend(std::shared_ptr<LmBackend> inner) : inner_(std::move(inner)) {}

  GenerationResult generate(const GenerationRequest& request) override {
    generate_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->generate(request);
  }

  std::vector<TokenLogprob> score_continuation(const std::string& prompt,
                                               const std::string& continuation) override {
    scoring_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->score_continuation(prompt, continuation);
  }

  std::vector<std::size_t> token_ids(const std::string& text) const override {
    return inner_->token_ids(text);
  }

  std::size_t generate_calls() const { return generate_calls_.load(); }
  std::size_t scoring_calls() const { return scoring_calls_.load(); }
  void reset_counts() {
    generate_calls_.store(0);
    scoring_calls_.store(0);
  }

 private:
  std::shared_ptr<LmBackend> inner_;
  std::atomic<std::size_t> generate_calls_{0};
  std::atomic<std::size_t> scoring_calls_{0};
};

// Summed log-probability over the continuation's tokens.
double sum_logprobs(const std::vector<TokenLogprob>& tokens);

}  // namespace iclmia
