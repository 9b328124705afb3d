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

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "layerforge/composer.hpp"
#include "layerforge/geometry.hpp"

namespace layerforge {

// Phrase openers keyed by GridRegion, in reading order.
inline constexpr std::array<std::string_view, 9> kRegionPhrases = {
    "On the top-left", "On the top",         "On the top-right", "On the left",         "In the center",
    "On the right",    "On the bottom-left", "On the bottom",    "On the bottom-right"};

inline constexpr std::string_view region_phrase(GridRegion r) {
  return kRegionPhrases[static_cast<int>(r)];
}

inline constexpr std::string_view kPlaceholderCaption = "a design element";

struct RegionPhrase {
  GridRegion region = GridRegion::kCenter;
  int z_order = 0;
  std::size_t layer_index = 0;
  std::string caption;

  std::string text() const { return std::string(region_phrase(region)) + ", " + caption; }
};

struct CaptionDraft {
  std::string raw;
  std::vector<RegionPhrase> region_phrases;
  std::optional<std::string> refined;
};

struct CaptionedBox {
  BBox box;
  std::string caption;
  int z_order = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string as_sentence(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return t;
  const char last = t.back();
  if (last != '.' && last != '!' && last != '?') t.push_back('.');
  return t;
}

}  // namespace detail

// Grid-ordered raw caption: background description first, then one phrase
// per layer, ordered by region (reading order), z-order, and input index.
inline CaptionDraft draft_caption(std::string_view background_caption,
                                  const std::vector<CaptionedBox>& layers, CanvasSize canvas) {
  CaptionDraft d;
  d.region_phrases.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    RegionPhrase p;
    p.region = assign_grid_region(layers[i].box, canvas);
    p.z_order = layers[i].z_order;
    p.layer_index = i;
    p.caption = detail::as_sentence(layers[i].caption);
    if (p.caption.empty()) p.caption = detail::as_sentence(kPlaceholderCaption);
    d.region_phrases.push_back(std::move(p));
  }
  std::sort(d.region_phrases.begin(), d.region_phrases.end(), [](const auto& a, const auto& b) {
    return std::tuple(static_cast<int>(a.region), a.z_order, a.layer_index) <
           std::tuple(static_cast<int>(b.region), b.z_order, b.layer_index);
  });
  std::string raw = detail::as_sentence(background_caption);
  for (const auto& p : d.region_phrases) {
    if (!raw.empty()) raw.push_back(' ');
    raw += p.text();
  }
  d.raw = std::move(raw);
  return d;
}

inline CaptionDraft draft_caption(const SampleDraft& sample) {
  std::vector<CaptionedBox> boxes;
  boxes.reserve(sample.layers.size());
  for (const auto& l : sample.layers) boxes.push_back({l.placed_box, l.caption, l.z_order});
  return draft_caption(sample.background_caption, boxes, sample.canvas);
}

// ---------------------------------------------------------------------------
// Refinement settings
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultRefinePrompt =
    "You are an expert image captioner. Your task is to refine and condense a long, redundant "
    "'whole caption' of a layered image. Requirements: (1) Conciseness: Keep the final caption "
    "between 100 to 140 words! (2) Natural Flow: Blend the background and layers into a cohesive, "
    "professional paragraph. Avoid repetitive phrases like 'you can see' or 'there is'. (3) Output "
    "Format: Return ONLY the refined caption string. (4) Accuracy and Vividness: Ensure "
    "descriptions precisely match visual elements, using vivid but concise language. (5) First 40 "
    "words should provide an overview; remaining 60 to 100 words detail layer-level descriptions. "
    "(6) Describe overlapped layers concisely. (7) For English text layers, describe the text "
    "content in detail.";

inline constexpr const char* kEndpointEnv = "LAYERFORGE_VLM_ENDPOINT";
inline constexpr const char* kApiKeyEnv = "LAYERFORGE_VLM_API_KEY";

struct RefinerConfig {
  std::string endpoint;
  std::string api_key;
  std::string model;
  std::string system_prompt{kDefaultRefinePrompt};
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff{std::chrono::milliseconds(500)};
  IntRange word_range{100, 140};
  // Identity refinement when the endpoint is unreachable.
  bool fallback = true;
};

inline void validate(const RefinerConfig& cfg) {
  if (cfg.word_range.lo >= cfg.word_range.hi)
    throw ConfigError("refiner word_range must satisfy lo < hi");
  if (cfg.max_retries < 0) throw ConfigError("refiner max_retries must be >= 0");
}

// Fills endpoint and api key from the environment where they are unset.
inline RefinerConfig refiner_config_from_env(RefinerConfig cfg = {}) {
  if (cfg.endpoint.empty())
    if (const char* v = std::getenv(kEndpointEnv)) cfg.endpoint = v;
  if (cfg.api_key.empty())
    if (const char* v = std::getenv(kApiKeyEnv)) cfg.api_key = v;
  return cfg;
}

inline std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace layerforge
