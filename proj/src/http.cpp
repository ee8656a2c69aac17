#include "cine/http.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#ifdef CINE_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#endif
#include <httplib.h>

#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

Sleeper real_sleeper() {
  return [](Seconds d) {
    if (d.count() > 0) std::this_thread::sleep_for(d);
  };
}

std::optional<std::string> HttpResponse::header(const std::string& name) const {
  auto it = headers.find(to_lower(name));
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

std::optional<double> parse_retry_after(const std::string& value) {
  const std::string v = trim(value);
  if (v.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double s = std::stod(v, &used);
    if (used != v.size() || s < 0) return std::nullopt;
    return s;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

HttpResponse convert(const httplib::Result& res, const std::string& url) {
  if (!res) {
    throw Error(ErrorCode::TransportError, url + ": " + httplib::to_string(res.error()));
  }
  HttpResponse out;
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) out.headers[to_lower(k)] = v;
  return out;
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(Seconds timeout) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const QueryParams& query) override {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    configure(client);
    httplib::Params params;
    for (const auto& [k, v] : query) params.emplace(k, v);
    return convert(client.Get(parts.path, params, httplib::Headers{}), url);
  }

  HttpResponse post_json(const std::string& url, const std::string& body,
                         const std::map<std::string, std::string>& headers) override {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    configure(client);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    return convert(client.Post(parts.path, h, body, "application/json"), url);
  }

 private:
  void configure(httplib::Client& client) const {
    const auto secs = static_cast<time_t>(timeout_.count());
    client.set_connection_timeout(std::min<time_t>(secs, 30), 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
  }

  Seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(Seconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

RateLimiter::RateLimiter(double requests_per_second, double burst, Sleeper sleeper)
    : rate_(requests_per_second),
      burst_(std::max(1.0, burst)),
      sleeper_(std::move(sleeper)),
      tokens_(std::max(1.0, burst)),
      last_(Clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0) return;
  double wait = 0;
  {
    std::lock_guard lock(mutex_);
    const auto now = Clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    tokens_ -= 1.0;
    // A negative balance is a reservation: this caller waits for its token.
    if (tokens_ < 0) wait = -tokens_ / rate_;
  }
  if (wait > 0) sleeper_(Seconds(wait));
}

}  // namespace cine
