#include "repoclass/fetcher.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace repoclass {

void FetchSpec::validate() const {
  if (!(requests_per_minute > 0.0)) throw ValidationError("fetch: rate limit must be > 0");
  if (concurrency < 1) throw ValidationError("fetch: concurrency must be >= 1");
  if (output.empty()) throw ValidationError("fetch: no output path");
  for (const auto& s : slugs)
    if (!valid_slug(s)) throw ValidationError("fetch: malformed slug '" + s + "' (expected owner/name)");
}

bool valid_slug(std::string_view slug) {
  auto slash = slug.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == slug.size()) return false;
  if (slug.find('/', slash + 1) != std::string_view::npos) return false;
  return std::all_of(slug.begin(), slug.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '/';
  });
}

std::vector<std::string> load_slugs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string slug = line.substr(b, e - b + 1);
    if (!valid_slug(slug))
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed slug '" + slug + "'");
    out.push_back(std::move(slug));
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  auto value = [](unsigned char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) continue;
    if (c == '=') {
      padding = true;
      continue;
    }
    const int v = value(c);
    if (v < 0 || padding) throw ParseError("base64: invalid input");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

HttpResponse HttplibTransport::get(const std::string& path, const std::map<std::string, std::string>& headers) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  client.set_follow_location(true);
  httplib::Headers h(headers.begin(), headers.end());
  HttpResponse out;
  auto res = client.Get(path, h);
  if (!res) {
    spdlog::warn("GET {}: {}", path, httplib::to_string(res.error()));
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) {
    std::string key = k;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    out.headers[key] = v;
  }
  return out;
}

RateLimiter::RateLimiter(std::size_t limit, std::chrono::steady_clock::duration window, Clock clock, Sleep sleep)
    : limit_(limit), window_(window), clock_(std::move(clock)), sleep_(std::move(sleep)) {
  if (limit_ < 1) throw ValidationError("rate limiter: limit must be >= 1");
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
  if (!sleep_) sleep_ = [](std::chrono::steady_clock::duration d) { std::this_thread::sleep_for(d); };
}

void RateLimiter::acquire() {
  std::lock_guard lock(mu_);
  for (;;) {
    const auto now = clock_();
    while (!stamps_.empty() && now - stamps_.front() >= window_) stamps_.pop_front();
    if (stamps_.size() < limit_) {
      stamps_.push_back(now);
      return;
    }
    sleep_(stamps_.front() + window_ - now);
  }
}

std::string resolve_token(const FetchSpec& spec) {
  if (spec.token_env.empty()) return {};
  const char* raw = std::getenv(spec.token_env.c_str());
  if (!raw || !*raw) throw ValidationError("fetch: environment variable " + spec.token_env + " is not set");
  std::string token(raw);
  const bool plausible = token.size() >= 4 && std::all_of(token.begin(), token.end(), [](unsigned char c) {
                           return std::isalnum(c) || c == '_' || c == '-' || c == '.';
                         });
  if (!plausible) throw ValidationError("fetch: token in " + spec.token_env + " is malformed");
  return token;
}

RepoRecord record_from_api(std::string_view slug, std::string_view repo_json, std::string_view readme_json) {
  RepoRecord r;
  try {
    auto repo = nlohmann::json::parse(repo_json);
    const std::string s(slug);
    const auto slash = s.find('/');
    r.id = repo.value("full_name", s);
    r.user = s.substr(0, slash);
    if (repo.contains("owner") && repo["owner"].is_object()) r.user = repo["owner"].value("login", r.user);
    r.name = repo.value("name", s.substr(slash + 1));
    if (repo.contains("description") && repo["description"].is_string()) r.description = repo["description"];
    if (repo.contains("topics") && repo["topics"].is_array())
      for (const auto& t : repo["topics"]) r.tags.push_back(t.get<std::string>());
    if (!readme_json.empty()) {
      auto readme = nlohmann::json::parse(readme_json);
      const std::string content = readme.value("content", "");
      r.readme = readme.value("encoding", "") == "base64" ? base64_decode(content) : content;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("fetch " + std::string(slug) + ": " + e.what());
  }
  return r;
}

namespace {

bool retryable(const HttpResponse& r) {
  if (r.status == 0 || r.status == 429 || r.status >= 500) return true;
  if (r.status != 403) return false;
  auto it = r.headers.find("x-ratelimit-remaining");
  if (it != r.headers.end() && it->second == "0") return true;
  return r.body.find("rate limit") != std::string::npos;
}

}  // namespace

FetchStats fetch_records(const FetchSpec& spec, HttpTransport& transport, RateLimiter& limiter,
                         const RateLimiter::Sleep& sleep_fn) {
  spec.validate();
  const std::string token = resolve_token(spec);
  auto sleep = sleep_fn ? sleep_fn : [](std::chrono::steady_clock::duration d) { std::this_thread::sleep_for(d); };

  std::map<std::string, std::string> headers{{"Accept", "application/vnd.github+json"},
                                             {"User-Agent", "repoclass-fetch"}};
  if (!token.empty()) headers["Authorization"] = "Bearer " + token;

  std::atomic<std::size_t> requests{0};
  auto request = [&](const std::string& path) {
    HttpResponse r;
    for (std::size_t attempt = 0;; ++attempt) {
      limiter.acquire();
      ++requests;
      r = transport.get(path, headers);
      if (!retryable(r) || attempt >= spec.backoff.size()) return r;
      spdlog::warn("GET {} -> {}; retrying in {} ms", path, r.status,
                   std::chrono::duration_cast<std::chrono::milliseconds>(spec.backoff[attempt]).count());
      sleep(spec.backoff[attempt]);
    }
  };

  if (!token.empty()) {
    auto who = request("/user");
    if (who.status == 401) throw ValidationError("fetch: token rejected (HTTP 401)");
    if (who.status != 200) throw ValidationError("fetch: token check failed (HTTP " + std::to_string(who.status) + ")");
  }

  std::ofstream out(spec.output, std::ios::app);
  if (!out) throw ParseError("cannot write " + spec.output.string());

  FetchStats stats;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spec.slugs.size(); i = next++) {
      const auto& slug = spec.slugs[i];
      try {
        auto repo = request("/repos/" + slug);
        if (repo.status == 404) {
          spdlog::warn("{}: not found, skipped", slug);
          std::lock_guard lock(mu);
          ++stats.not_found;
          continue;
        }
        if (repo.status != 200) throw std::runtime_error("HTTP " + std::to_string(repo.status));
        auto readme = request("/repos/" + slug + "/readme");
        if (readme.status != 200 && readme.status != 404)
          throw std::runtime_error("README HTTP " + std::to_string(readme.status));
        auto record = record_from_api(slug, repo.body, readme.status == 200 ? readme.body : "");
        const std::string line = record_to_json(record) + "\n";
        std::lock_guard lock(mu);
        out << line << std::flush;
        ++stats.written;
      } catch (const std::exception& e) {
        spdlog::error("{}: {}", slug, e.what());
        std::lock_guard lock(mu);
        ++stats.failed;
      }
    }
  };
  const std::size_t n = std::min(spec.concurrency, std::max<std::size_t>(1, spec.slugs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  stats.requests = requests;
  return stats;
}

}  // namespace repoclass
