/* Copyright 2026 The layerforge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <chrono>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "layerforge/captioning.hpp"
#include "layerforge/error.hpp"
#include "layerforge/image.hpp"
#include "layerforge/png_io.hpp"

namespace layerforge {

class RefineError : public Error {
 public:
  using Error::Error;
};

struct RefineResult {
  std::string text;
  bool used_fallback = false;
  // One entry per failed attempt that was followed by another attempt.
  std::vector<std::string> retries;
  std::vector<std::string> warnings;
};

struct EndpointUrl {
  std::string scheme_host_port;
  std::string path;
};

inline EndpointUrl parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw RefineError("malformed endpoint URL: '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

// Chat-style request: system prompt, then one user turn carrying the
// composite as a base64 PNG data URL and the raw caption as text.
inline nlohmann::json build_refine_request(const RefinerConfig& cfg, const RgbaImage& composite,
                                           const std::string& raw_caption) {
  const auto png = encode_png(composite);
  const std::string b64 =
      httplib::detail::base64_encode(std::string(png.begin(), png.end()));
  nlohmann::json req;
  if (!cfg.model.empty()) req["model"] = cfg.model;
  req["messages"] = nlohmann::json::array(
      {{{"role", "system"}, {"content", cfg.system_prompt}},
       {{"role", "user"},
        {"content", nlohmann::json::array(
                        {{{"type", "image_url"},
                          {"image_url", {{"url", "data:image/png;base64," + b64}}}},
                         {{"type", "text"}, {"text", raw_caption}}})}}});
  return req;
}

// Accepts {"choices":[{"message":{"content": "..."}}]}.
inline std::string extract_completion(const std::string& body) {
  const auto j = nlohmann::json::parse(body);
  const auto& content = j.at("choices").at(0).at("message").at("content");
  if (!content.is_string()) throw RefineError("completion content is not a string");
  auto text = detail::trim(content.get<std::string>());
  if (text.empty()) throw RefineError("empty completion");
  return text;
}

inline RefineResult refine_caption(const RefinerConfig& cfg, const RgbaImage& composite,
                                   const CaptionDraft& draft) {
  validate(cfg);
  RefineResult out;
  auto fall_back = [&](const std::string& why) {
    if (!cfg.fallback)
      throw RefineError("caption refinement failed for endpoint '" + cfg.endpoint + "': " + why);
    out.text = draft.raw;
    out.used_fallback = true;
    out.warnings.push_back("identity fallback: " + why);
    return out;
  };
  if (cfg.endpoint.empty()) return fall_back("no endpoint configured");

  EndpointUrl url;
  try {
    url = parse_endpoint(cfg.endpoint);
  } catch (const RefineError& e) {
    return fall_back(e.what());
  }
  const std::string body = build_refine_request(cfg, composite, draft.raw).dump();

  httplib::Client client(url.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      out.retries.push_back("attempt " + std::to_string(attempt) + " failed: " + last_error);
      std::this_thread::sleep_for(cfg.retry_backoff * attempt);
    }
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      out.text = extract_completion(res->body);
    } catch (const std::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
      continue;
    }
    const auto words = count_words(out.text);
    if (words > 2 * static_cast<std::size_t>(cfg.word_range.hi))
      out.warnings.push_back("refined caption has " + std::to_string(words) +
                             " words, more than twice the requested maximum");
    return out;
  }
  return fall_back("retries exhausted after " + std::to_string(cfg.max_retries + 1) +
                   " attempts; last error: " + last_error);
}

}  // namespace layerforge
