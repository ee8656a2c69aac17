#include "cine/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

using nlohmann::json;

std::string_view to_string(Role role) { return role == Role::System ? "system" : "user"; }

std::size_t ChatRequest::total_chars() const {
  std::size_t n = 0;
  for (const auto& m : messages) n += m.content.size();
  return n;
}

std::string ChatRequest::concatenated() const {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "\n\n";
    out += std::string(to_string(m.role)) + ": " + m.content;
  }
  return out;
}

Rulebook load_rulebook(const std::filesystem::path& path) {
  Rulebook rules;
  try {
    const json doc = json::parse(read_file(path));
    for (const auto& r : doc) rules.push_back({r.at("marker").get<std::string>(), r.at("reply").get<std::string>()});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "rulebook " + path.string() + ": " + e.what());
  }
  return rules;
}

// ---- mock provider ----

namespace {

constexpr std::string_view kMockObservations[] = {
    "takes charge of practical arrangements before anyone asks",
    "answers pressure with short, controlled sentences",
    "keeps private feelings out of view and stays on the task",
    "defers to the group when a decision carries real risk",
    "uses dry humor to defuse tension with colleagues",
    "treats loyalty to a small circle as a binding obligation",
    "questions authority when the stated facts do not add up",
    "prefers to act first and explain later",
    "frames choices in terms of duty rather than desire",
    "looks for approval from whoever holds formal power",
    "mediates between people who disagree",
    "signals competence through preparation and attention to detail",
};

constexpr std::string_view kMockLenses[] = {"Across the record", "In the quoted exchanges", "Taken together",
                                            "Repeatedly", "In moments of conflict"};

std::uint64_t draw(const std::string& digest, std::string_view label) { return hash64(digest + "/" + std::string(label)); }

std::string mock_reflections(const std::string& digest, const std::string& text) {
  static const std::regex kNodeTag(R"(\[(Dialogue|Action) (\d+)\])");
  std::vector<std::string> tags;
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kNodeTag); it != std::sregex_iterator(); ++it) {
    if (seen.insert(it->str()).second) tags.push_back(it->str());
  }
  std::ostringstream out;
  out << "Mock trace: " << digest.substr(0, 12) << "\n";
  for (int k = 1; k <= 5; ++k) {
    const auto r = draw(digest, "reflection" + std::to_string(k));
    out << k << ". " << kMockLenses[r % std::size(kMockLenses)] << ", the character "
        << kMockObservations[(r >> 8) % std::size(kMockObservations)];
    if (!tags.empty()) out << " (see " << tags[(r >> 16) % tags.size()] << ")";
    out << ".\n";
  }
  return out.str();
}

std::string mock_survey_answers(const std::string& digest, const std::string& text) {
  static const std::regex kQuestionHeader(R"((^|\n)Question (\d+))");
  std::set<int> questions;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kQuestionHeader); it != std::sregex_iterator();
       ++it) {
    questions.insert(std::stoi((*it)[2].str()));
  }
  if (questions.empty()) questions.insert(1);
  std::ostringstream out;
  out << "Mock trace: " << digest.substr(0, 12) << "\n";
  for (int q : questions) {
    const auto r = draw(digest, "question" + std::to_string(q));
    out << "\nQuestion " << q << "\n"
        << "Option Interpretation: Each option marks a different degree of agreement with the statement.\n"
        << "Option Choice: The notes favour a settled view over a hesitant one.\n"
        << "Reasoning: Mock draw " << digest.substr(12 + 4 * (q % 8), 4) << ".\n"
        << "Response: " << 1 + r % 5 << "\n";
  }
  return out.str();
}

}  // namespace

ChatResponse mock_complete(const ChatRequest& request, std::uint64_t seed, const Rulebook& rulebook) {
  const std::string text = request.concatenated();
  ChatResponse res;
  res.provider = "mock";
  for (const auto& rule : rulebook) {
    if (!rule.marker.empty() && text.find(rule.marker) != std::string::npos) {
      res.content = rule.reply_template;
      return res;
    }
  }
  const std::string digest = sha256_hex(std::to_string(seed) + "\x1f" + text);
  if (request.request_tag.starts_with("reflect")) {
    res.content = mock_reflections(digest, text);
  } else if (request.request_tag.starts_with("survey")) {
    res.content = mock_survey_answers(digest, text);
  } else {
    res.content = "Mock reply " + digest.substr(0, 16);
  }
  return res;
}

std::string MockProvider::send(const ChatRequest& request) {
  ++calls_;
  return mock_complete(request, seed_, rulebook_).content;
}

// ---- HTTP provider ----

HttpProviderConfig http_provider_config_from_env() {
  HttpProviderConfig cfg;
  const char* key = std::getenv("CINE_LLM_KEY");
  if (key == nullptr || *key == '\0') throw Error(ErrorCode::ConfigError, "CINE_LLM_KEY is not set");
  cfg.api_key = key;
  const char* endpoint = std::getenv("CINE_LLM_ENDPOINT");
  cfg.endpoint = endpoint && *endpoint ? endpoint : "https://api.openai.com/v1/chat/completions";
  const char* model = std::getenv("CINE_LLM_MODEL");
  cfg.model = model && *model ? model : "gpt-5-mini";
  return cfg;
}

HttpProvider::HttpProvider(HttpProviderConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

json HttpProvider::request_body(const ChatRequest& request, const std::string& default_model) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return json{{"model", request.model_name.empty() ? default_model : request.model_name},
              {"messages", std::move(messages)},
              {"temperature", request.temperature}};
}

std::string HttpProvider::send(const ChatRequest& request) {
  const std::string body = request_body(request, config_.model).dump();
  const HttpResponse res =
      transport_->post_json(config_.endpoint, body, {{"Authorization", "Bearer " + config_.api_key}});
  if (res.status == 429) {
    double wait = 1.0;
    if (auto hint = res.header("retry-after")) wait = parse_retry_after(*hint).value_or(1.0);
    throw RateLimitedError("HTTP 429 from chat endpoint", wait);
  }
  if (res.status >= 500) throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(res.status));
  if (res.status != 200) {
    throw Error(ErrorCode::ProviderError, "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300));
  }
  try {
    const json doc = json::parse(res.body);
    const json& content = doc.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string{};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderError, std::string("unexpected response shape: ") + e.what());
  }
}

// ---- run log ----

RunLog::RunLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorCode::IoError, "cannot open run log " + path_.string());
}

void RunLog::append(const json& record) {
  std::lock_guard lock(mutex_);
  out_ << record.dump() << '\n';
  out_.flush();
  ++records_;
}

// ---- gateway ----

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayConfig config, std::shared_ptr<RunLog> log,
                 Sleeper sleeper)
    : provider_(std::move(provider)),
      config_(config),
      log_(std::move(log)),
      sleeper_(sleeper),
      limiter_(config.requests_per_second, 1.0, sleeper),
      in_flight_(std::clamp<std::ptrdiff_t>(config.max_in_flight, 1, 1024)) {}

Seconds Gateway::backoff_delay(int retry) const { return config_.base_backoff * (1 << std::max(0, retry - 1)); }

Seconds Gateway::jittered_delay(int retry, const std::string& request_tag) const {
  const double u = static_cast<double>(hash64(std::to_string(config_.jitter_seed) + "/" + request_tag + "/" +
                                              std::to_string(retry)) >> 11) *
                   0x1.0p-53;
  return backoff_delay(retry) * (1.0 + config_.jitter * (2.0 * u - 1.0));
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

}  // namespace

void Gateway::log_attempt(const ChatRequest& request, int attempt, std::string_view status, const std::string& content,
                          double latency_ms, const std::string& error) {
  if (!log_) return;
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json record{{"timestamp", utc_timestamp()},
              {"request_tag", request.request_tag},
              {"provider", provider_->name()},
              {"model", request.model_name},
              {"temperature", request.temperature},
              {"attempt", attempt},
              {"status", status},
              {"latency_ms", latency_ms},
              {"request_hash", sha256_hex(request.concatenated())},
              {"content_hash", sha256_hex(content)},
              {"messages", std::move(messages)},
              {"content", content}};
  if (!error.empty()) record["error"] = error;
  log_->append(record);
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(ErrorCode::InvariantViolation, request.request_tag + ": no messages");
  for (const auto& m : request.messages) {
    if (m.content.empty()) throw Error(ErrorCode::InvariantViolation, request.request_tag + ": empty message");
  }
  if (request.temperature < 0 || request.temperature > 2) {
    throw Error(ErrorCode::InvariantViolation, request.request_tag + ": temperature outside [0, 2]");
  }
  if (request.total_chars() > config_.char_budget) {
    throw Error(ErrorCode::OverBudget, request.request_tag + ": " + std::to_string(request.total_chars()) +
                                           " characters exceeds budget of " + std::to_string(config_.char_budget));
  }

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  int attempt = 0;
  int transport_failures = 0;
  int empty_completions = 0;
  int rate_waits = 0;
  for (;;) {
    limiter_.acquire();
    ++attempt;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };
    try {
      std::string content = provider_->send(request);
      const double latency = elapsed_ms();
      if (trim(content).empty()) {
        log_attempt(request, attempt, "empty_completion", content, latency, "");
        if (++empty_completions > 1) {
          throw Error(ErrorCode::EmptyCompletion, request.request_tag + ": provider returned no content twice");
        }
        continue;
      }
      log_attempt(request, attempt, "ok", content, latency, "");
      return ChatResponse{std::move(content), provider_->name(), latency, attempt};
    } catch (const RateLimitedError& e) {
      log_attempt(request, attempt, "rate_limited", "", elapsed_ms(), e.what());
      if (++rate_waits > config_.max_rate_limit_waits) throw;
      sleeper_(Seconds(e.retry_after_seconds()));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyCompletion) throw;
      if (e.code() != ErrorCode::TransportError) {
        log_attempt(request, attempt, "provider_error", "", elapsed_ms(), e.what());
        throw;
      }
      log_attempt(request, attempt, "transport_error", "", elapsed_ms(), e.what());
      if (++transport_failures >= config_.max_attempts) {
        throw Error(ErrorCode::TransportError, request.request_tag + ": failed after " +
                                                   std::to_string(transport_failures) + " attempts: " + e.what());
      }
      sleeper_(jittered_delay(transport_failures, request.request_tag));
    }
  }
}

}  // namespace cine
