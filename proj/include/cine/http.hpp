#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cine {

using Seconds = std::chrono::duration<double>;
/// Blocking wait; injectable so tests can record delays instead of sleeping.
using Sleeper = std::function<void(Seconds)>;

Sleeper real_sleeper();

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // keys lower-cased

  std::optional<std::string> header(const std::string& name) const;
};

using QueryParams = std::vector<std::pair<std::string, std::string>>;

/// Minimal HTTP surface used by the metadata and chat clients. Implementations
/// throw Error(TransportError) for connection-level failures; HTTP status codes
/// are returned, not thrown.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const QueryParams& query) = 0;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib backed transport. https URLs need OpenSSL support compiled in.
std::unique_ptr<HttpTransport> make_http_transport(Seconds timeout = Seconds(120));

/// Parses a Retry-After header value given in seconds. HTTP-date values are not
/// supported and yield nullopt.
std::optional<double> parse_retry_after(const std::string& value);

/// Token bucket shared between concurrent callers. A rate of zero disables it.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  RateLimiter(double requests_per_second, double burst, Sleeper sleeper = real_sleeper());

  /// Blocks until one token is available, then consumes it.
  void acquire();

  double rate() const { return rate_; }

 private:
  double rate_;
  double burst_;
  Sleeper sleeper_;
  std::mutex mutex_;
  double tokens_;
  Clock::time_point last_;
};

}  // namespace cine
