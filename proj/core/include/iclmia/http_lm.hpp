#pragma once

#include <string>

#include "iclmia/lm.hpp"

namespace iclmia {

struct Transport : Error {
  using Error::Error;
};

struct Protocol : Error {
  Protocol(int status, const std::string& body_excerpt)
      : Error("HTTP " + std::to_string(status) + ": " + body_excerpt), status(status) {}
  int status;
};

struct MissingLogprobs : Error {
  using Error::Error;
};

// Completion-API endpoint configuration. The wire schema is the widely
// deployed completions shape:
//   request  {"prompt", "max_tokens", "temperature": 0, "logprobs", "echo"}
//   response {"choices": [{"text", "logprobs": {"tokens", "token_logprobs"}}]}
struct HttpEndpointConfig {
  std::string base_url;            // e.g. http://127.0.0.1:8080
  std::string path = "/v1/completions";
  std::string auth_token;          // sent as "Authorization: Bearer <token>" if non-empty
  int timeout_seconds = 60;
  int max_retries = 3;             // attempts on transport errors and 429
  int max_in_flight = 4;
};

class HttpLm final : public LmBackend {
 public:
  explicit HttpLm(HttpEndpointConfig config);
  ~HttpLm() override;

  GenerationResult generate(const GenerationRequest& request) override;

  // Scores by echoing prompt logprobs: sends prompt+continuation with
  // echo=true and max_tokens=0, then keeps the tokens covering the
  // continuation. Throws ScoringUnsupported when the endpoint omits them.
  std::vector<TokenLogprob> score_continuation(const std::string& prompt,
                                               const std::string& continuation) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace iclmia
