#include "iclmia/http_lm.hpp"

#include <chrono>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace iclmia {

namespace {

std::string excerpt(const std::string& body) {
  return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

}  // namespace

struct HttpLm::Impl {
  explicit Impl(HttpEndpointConfig cfg)
      : config(std::move(cfg)),
        client(config.base_url),
        in_flight(std::max(config.max_in_flight, 1)) {
    client.set_connection_timeout(config.timeout_seconds, 0);
    client.set_read_timeout(config.timeout_seconds, 0);
    if (!config.auth_token.empty()) client.set_bearer_token_auth(config.auth_token);
  }

  nlohmann::json post(const nlohmann::json& payload) {
    std::string body = payload.dump();
    std::string last_error;
    for (int attempt = 0; attempt < std::max(config.max_retries, 1); ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
      }
      in_flight.acquire();
      auto result = client.Post(config.path, body, "application/json");
      in_flight.release();
      if (!result) {
        last_error = httplib::to_string(result.error());
        continue;
      }
      if (result->status == 429) {
        last_error = "HTTP 429";
        if (result->has_header("Retry-After")) {
          int secs = std::atoi(result->get_header_value("Retry-After").c_str());
          if (secs > 0 && secs <= 30) std::this_thread::sleep_for(std::chrono::seconds(secs));
        }
        continue;
      }
      if (result->status != 200) throw Protocol(result->status, excerpt(result->body));
      try {
        return nlohmann::json::parse(result->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Protocol(result->status, std::string("unparseable body: ") + e.what());
      }
    }
    throw Transport("request failed after retries: " + last_error);
  }

  HttpEndpointConfig config;
  httplib::Client client;
  std::counting_semaphore<256> in_flight;
};

HttpLm::HttpLm(HttpEndpointConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
HttpLm::~HttpLm() = default;

GenerationResult HttpLm::generate(const GenerationRequest& request) {
  nlohmann::json payload = {
      {"prompt", request.prompt},
      {"max_tokens", request.max_output_tokens},
      {"temperature", 0},
      {"logprobs", request.want_token_logprobs ? nlohmann::json(1) : nlohmann::json(nullptr)},
      {"echo", false},
  };
  nlohmann::json response = impl_->post(payload);

  if (!response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty())
    throw Protocol(200, "response has no choices");
  const auto& choice = response["choices"][0];

  GenerationResult result;
  result.text = choice.value("text", std::string{});
  if (request.want_token_logprobs) {
    if (!choice.contains("logprobs") || choice["logprobs"].is_null())
      throw MissingLogprobs("logprobs requested but absent from response");
    const auto& lp = choice["logprobs"];
    const auto& tokens = lp.at("tokens");
    const auto& values = lp.at("token_logprobs");
    std::vector<TokenLogprob> out;
    for (std::size_t i = 0; i < tokens.size() && i < values.size(); ++i) {
      if (values[i].is_null()) continue;
      out.push_back({tokens[i].get<std::string>(), values[i].get<double>()});
    }
    result.token_logprobs = std::move(out);
  }
  // The completions wire format carries no logits; the logit attack is only
  // runnable against backends that expose them.
  return result;
}

std::vector<TokenLogprob> HttpLm::score_continuation(const std::string& prompt,
                                                     const std::string& continuation) {
  if (continuation.empty()) return {};
  nlohmann::json payload = {
      {"prompt", prompt + continuation}, {"max_tokens", 0}, {"temperature", 0},
      {"logprobs", 1},                   {"echo", true},
  };
  nlohmann::json response = impl_->post(payload);
  if (!response.contains("choices") || response["choices"].empty())
    throw Protocol(200, "response has no choices");
  const auto& choice = response["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null())
    throw ScoringUnsupported("endpoint does not echo prompt logprobs");

  const auto& lp = choice["logprobs"];
  const auto& tokens = lp.at("tokens");
  const auto& values = lp.at("token_logprobs");
  std::vector<TokenLogprob> all;
  for (std::size_t i = 0; i < tokens.size() && i < values.size(); ++i) {
    all.push_back({tokens[i].get<std::string>(),
                   values[i].is_null() ? 0.0 : values[i].get<double>()});
  }

  // Keep the trailing tokens that cover the continuation's bytes.
  std::size_t covered = 0;
  std::size_t first = all.size();
  while (first > 0 && covered < continuation.size()) {
    --first;
    covered += all[first].token.size();
  }
  return {all.begin() + static_cast<std::ptrdiff_t>(first), all.end()};
}

}  // namespace iclmia
