#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repoclass/corpus.hpp"

namespace repoclass {

struct FetchSpec {
  std::vector<std::string> slugs;  // "owner/name"
  std::string token_env;           // environment variable holding the token; empty = anonymous
  double requests_per_minute = 60.0;
  std::size_t concurrency = 4;
  std::filesystem::path output;
  std::string base_url = "https://api.github.com";
  std::vector<std::chrono::milliseconds> backoff = {std::chrono::seconds(1), std::chrono::seconds(4),
                                                    std::chrono::seconds(16)};

  void validate() const;
};

bool valid_slug(std::string_view slug);

/// One slug per line; blank lines and '#' comments skipped.
std::vector<std::string> load_slugs(const std::filesystem::path& path);

/// Standard alphabet; whitespace ignored. Throws ParseError on bad input.
std::string base64_decode(std::string_view text);

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Must be safe to call from several threads at once.
  virtual HttpResponse get(const std::string& path, const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib client; a fresh connection per request.
class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::string base_url) : base_url_(std::move(base_url)) {}
  HttpResponse get(const std::string& path, const std::map<std::string, std::string>& headers) override;

 private:
  std::string base_url_;
};

/// Admits at most `limit` events in any window of `window` length.
class RateLimiter {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;
  using Sleep = std::function<void(std::chrono::steady_clock::duration)>;

  RateLimiter(std::size_t limit, std::chrono::steady_clock::duration window = std::chrono::minutes(1),
              Clock clock = {}, Sleep sleep = {});

  /// Blocks until an event may start, then records it.
  void acquire();
  std::size_t limit() const { return limit_; }

 private:
  std::size_t limit_;
  std::chrono::steady_clock::duration window_;
  Clock clock_;
  Sleep sleep_;
  std::mutex mu_;
  std::deque<std::chrono::steady_clock::time_point> stamps_;
};

struct FetchStats {
  std::size_t written = 0;
  std::size_t not_found = 0;
  std::size_t failed = 0;
  std::size_t requests = 0;
};

/// Reads the token named by `token_env`; empty when no variable is named.
/// Throws ValidationError when the variable is named but unset, empty, or
/// not a plausible token.
std::string resolve_token(const FetchSpec& spec);

/// Turns repository metadata and README payloads into a record. `readme_json`
/// is empty when the repository has no README.
RepoRecord record_from_api(std::string_view slug, std::string_view repo_json, std::string_view readme_json);

/// Fetches every slug and appends one JSONL line per repository to
/// spec.output. 404s are skipped with a warning. Rate-limit 403s, 429s and 5xx
/// are retried after each delay in spec.backoff. An invalid token is fatal
/// before any repository request.
FetchStats fetch_records(const FetchSpec& spec, HttpTransport& transport, RateLimiter& limiter,
                         const RateLimiter::Sleep& sleep = {});

}  // namespace repoclass
