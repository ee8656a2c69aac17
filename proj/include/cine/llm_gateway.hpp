#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cine/http.hpp"

namespace cine {

enum class Role { System, User };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::string model_name;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  /// "<stage>:<agent id>" -- shows up in the run log and selects the mock's output format.
  std::string request_tag;

  std::size_t total_chars() const;
  /// Messages joined as "<role>: <content>" blocks; what the mock hashes and matches against.
  std::string concatenated() const;
};

struct ChatResponse {
  std::string content;
  std::string provider;
  double latency_ms = 0;
  int attempt = 1;
};

/// One chat backend. send() returns the raw completion text (possibly empty)
/// and throws Error(TransportError) for retryable failures, RateLimitedError
/// when the server asks for a pause, Error(ProviderError) for anything else.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual std::string send(const ChatRequest& request) = 0;
};

struct MockRule {
  std::string marker;
  std::string reply_template;
};
using Rulebook = std::vector<MockRule>;

/// JSON array of {"marker": str, "reply": str}.
Rulebook load_rulebook(const std::filesystem::path& path);

/// Deterministic stand-in for a chat model. The first rule whose marker occurs
/// in the request text wins; otherwise the reply is drawn from
/// SHA-256(seed, request text) in the format of the requesting stage: a five
/// item numbered list for "reflect" tags, one "Question n ... Response: k"
/// block per question for "survey" tags.
ChatResponse mock_complete(const ChatRequest& request, std::uint64_t seed, const Rulebook& rulebook);

class MockProvider final : public Provider {
 public:
  MockProvider(std::uint64_t seed, Rulebook rulebook) : seed_(seed), rulebook_(std::move(rulebook)) {}

  std::string name() const override { return "mock"; }
  std::string send(const ChatRequest& request) override;
  int calls() const { return calls_.load(); }

 private:
  std::uint64_t seed_;
  Rulebook rulebook_;
  std::atomic<int> calls_{0};
};

struct HttpProviderConfig {
  std::string endpoint;
  std::string api_key;
  std::string model;
};

/// Reads CINE_LLM_KEY, CINE_LLM_ENDPOINT and CINE_LLM_MODEL. A missing key is a
/// ConfigError; endpoint and model fall back to defaults.
HttpProviderConfig http_provider_config_from_env();

/// Chat-completions wire format: POST {model, messages, temperature}, read
/// choices[0].message.content.
class HttpProvider final : public Provider {
 public:
  HttpProvider(HttpProviderConfig config, std::shared_ptr<HttpTransport> transport);

  std::string name() const override { return "http"; }
  std::string send(const ChatRequest& request) override;

  static nlohmann::json request_body(const ChatRequest& request, const std::string& default_model);

 private:
  HttpProviderConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

/// Append-only JSON-lines log; one record per provider attempt.
class RunLog {
 public:
  explicit RunLog(std::filesystem::path path);

  void append(const nlohmann::json& record);
  std::size_t records() const { return records_.load(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
  std::atomic<std::size_t> records_{0};
};

struct GatewayConfig {
  int max_attempts = 3;
  Seconds base_backoff = Seconds(1.0);
  double jitter = 0.2;
  std::uint64_t jitter_seed = 0;
  std::size_t char_budget = 60000;
  int max_rate_limit_waits = 16;
  std::ptrdiff_t max_in_flight = 4;
  double requests_per_second = 0;
};

/// Retrying, rate-limited, logged front door to a Provider. Thread-safe.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, GatewayConfig config, std::shared_ptr<RunLog> log = nullptr,
          Sleeper sleeper = real_sleeper());

  /// Transport failures are retried up to max_attempts in total with
  /// exponential backoff; an empty completion is retried once; rate-limit
  /// pauses do not count against the retry budget. Requests over the
  /// character budget are refused with Error(OverBudget) before any attempt.
  ChatResponse complete(const ChatRequest& request);

  /// Delay before retry number `retry` (1-based), without jitter.
  Seconds backoff_delay(int retry) const;
  Seconds jittered_delay(int retry, const std::string& request_tag) const;

  const GatewayConfig& config() const { return config_; }
  Provider& provider() { return *provider_; }

 private:
  void log_attempt(const ChatRequest& request, int attempt, std::string_view status, const std::string& content,
                   double latency_ms, const std::string& error);

  std::shared_ptr<Provider> provider_;
  GatewayConfig config_;
  std::shared_ptr<RunLog> log_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  std::counting_semaphore<1024> in_flight_;
};

}  // namespace cine
