#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "t2f/common/error.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a `_res` macro.
#include <httplib.h>

// Client for an external text/image embedder. Wire contract:
//   POST {base}/embed  {"text": "..."}  ->  {"embedding": [E numbers]}

namespace t2f::service {

struct EmbedClientConfig {
  EmbedClientConfig(std::string url = {}) : base_url(std::move(url)) {}

  std::string base_url;
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  std::chrono::milliseconds backoff{250};  // doubles after every failed attempt
  std::optional<std::size_t> expected_dim;
};

// Embedder could not be reached (or kept failing) after all attempts.
class EmbedUnavailable : public Error {
 public:
  EmbedUnavailable(int attempts, const std::string& detail)
      : Error("embedder unavailable after " + std::to_string(attempts) + " attempt(s): " + detail),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

// Embedder answered, but with something unusable (bad JSON, wrong width).
class EmbedBadResponse : public Error {
 public:
  using Error::Error;
};

class EmbedClient {
 public:
  explicit EmbedClient(EmbedClientConfig config) : config_(std::move(config)) {
    if (config_.retries < 0) throw Error("embedder retries must be >= 0");
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, url)) throw Error("invalid embedder URL: " + config_.base_url);
    host_ = m[1].str();
    prefix_ = m[2].matched ? m[2].str() : "";
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  const EmbedClientConfig& config() const { return config_; }

  std::vector<double> embed_text(const std::string& text) const {
    return embed(nlohmann::json{{"text", text}}.dump(), config_.expected_dim);
  }

  std::vector<double> embed(const std::string& body, std::optional<std::size_t> expected_dim) const {
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const int attempts = config_.retries + 1;
    auto delay = config_.backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      auto res = client.Post(prefix_ + "/embed", body, "application/json");
      if (res && res->status == 200) return parse(res->body, expected_dim);
      if (res && res->status >= 400 && res->status < 500)
        throw EmbedBadResponse("embedder rejected the request with HTTP " + std::to_string(res->status));
      last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
      if (attempt < attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
    throw EmbedUnavailable(attempts, last_error);
  }

 private:
  static std::vector<double> parse(const std::string& body, std::optional<std::size_t> expected_dim) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw EmbedBadResponse("embedder returned invalid JSON");
    }
    const nlohmann::json* arr = &j;
    if (j.is_object() && j.contains("embedding")) arr = &j["embedding"];
    if (!arr->is_array()) throw EmbedBadResponse("embedder response has no embedding array");
    std::vector<double> out;
    out.reserve(arr->size());
    for (const auto& v : *arr) {
      if (!v.is_number() || !std::isfinite(v.get<double>()))
        throw EmbedBadResponse("embedder returned a non-finite embedding");
      out.push_back(v.get<double>());
    }
    if (expected_dim && out.size() != *expected_dim)
      throw EmbedBadResponse("embedding dim " + std::to_string(out.size()) + " != expected " +
                             std::to_string(*expected_dim));
    return out;
  }

  EmbedClientConfig config_;
  std::string host_;
  std::string prefix_;
};

}  // namespace t2f::service
