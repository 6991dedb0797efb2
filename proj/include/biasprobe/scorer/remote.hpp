#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/scorer/prediction.hpp"
#include "biasprobe/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace biasprobe::scorer {

/// Environment variable holding the optional bearer token.
inline constexpr const char* kApiTokenEnv = "BIASPROBE_API_TOKEN";

struct RemoteOptions {
  std::string url;
  std::string mask_token = "[MASK]";
  std::chrono::milliseconds timeout{30'000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{1'000};
  std::size_t max_in_flight = 4;
  std::optional<std::string> api_token;  ///< Defaults to $BIASPROBE_API_TOKEN.
};

inline std::string substitute_mask(std::string_view probe_text, std::string_view mask_token) {
  std::string s(probe_text);
  if (mask_token != templates::kMask) text::replace_all(s, templates::kMask, mask_token);
  return s;
}

inline std::string fill_mask_request_body(std::string_view text) {
  return nlohmann::json{{"inputs", text}}.dump();
}

/// Maps a fill-mask response body (JSON array of {token_str, score}) to a
/// prediction. Order in the body is irrelevant; entries are re-sorted.
inline MaskPrediction parse_fill_mask_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_array()) throw ProtocolError("response must be a JSON array");
  std::vector<TokenScore> entries;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("token_str") || !item.contains("score") ||
        !item["token_str"].is_string() || !item["score"].is_number()) {
      throw ProtocolError("each response entry needs string token_str and number score");
    }
    entries.push_back({std::string(text::trim(item["token_str"].get<std::string>())),
                       item["score"].get<double>()});
  }
  try {
    return MaskPrediction(std::move(entries));
  } catch (const InputError& e) {
    throw ProtocolError(e.what());
  }
}

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

/// Fill-mask HTTP backend: POST {"inputs": text}, expect [{token_str, score}].
///
/// Retriable failures (connection errors, timeouts, 429, 5xx) are retried
/// with exponential backoff; in-flight requests are capped by a semaphore.
class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(RemoteOptions opts)
      : opts_(std::move(opts)),
        url_(detail::split_url(opts_.url)),
        slots_(std::make_unique<std::counting_semaphore<64>>(
            static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(opts_.max_in_flight, 1, 64)))) {
    if (opts_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    if (!opts_.api_token) {
      if (const char* tok = std::getenv(kApiTokenEnv); tok && *tok) opts_.api_token = tok;
    }
    httplib::Client probe_client(url_.origin);
    if (!probe_client.is_valid()) throw ConfigError("unsupported endpoint URL '" + opts_.url + "'");
  }

  const RemoteOptions& options() const noexcept { return opts_; }

  MaskPrediction score(const templates::ProbeText& probe, std::size_t k) const override {
    require_single_mask(probe);
    if (k == 0) throw InputError("k must be at least 1");
    const std::string body = fill_mask_request_body(substitute_mask(probe.text, opts_.mask_token));
    for (int attempt = 1;; ++attempt) {
      try {
        return post_once(body).top(k);
      } catch (const ScorerError& e) {
        if (!e.retriable() || attempt >= opts_.max_attempts) throw;
        std::this_thread::sleep_for(opts_.backoff_base * (1 << (attempt - 1)));
      }
    }
  }

  nlohmann::json descriptor() const override {
    return {{"type", "remote"}, {"url", opts_.url}, {"mask_token", opts_.mask_token}};
  }

  std::size_t max_in_flight() const override { return std::clamp<std::size_t>(opts_.max_in_flight, 1, 64); }

 private:
  MaskPrediction post_once(const std::string& body) const {
    slots_->acquire();
    struct Release {
      std::counting_semaphore<64>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    httplib::Client cli(url_.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (opts_.api_token && !opts_.api_token->empty()) headers.emplace("Authorization", "Bearer " + *opts_.api_token);

    auto res = cli.Post(url_.path, headers, body, "application/json");
    if (!res) {
      throw ScorerError("request to " + opts_.url + " failed: " + httplib::to_string(res.error()), true);
    }
    if (res->status < 200 || res->status >= 300) {
      const bool retriable = res->status == 429 || res->status >= 500;
      throw ScorerError("endpoint returned HTTP " + std::to_string(res->status), retriable);
    }
    return parse_fill_mask_response(res->body);
  }

  RemoteOptions opts_;
  detail::ParsedUrl url_;
  std::unique_ptr<std::counting_semaphore<64>> slots_;
};

}  // namespace biasprobe::scorer
