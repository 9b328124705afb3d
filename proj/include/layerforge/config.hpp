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

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "layerforge/assets.hpp"
#include "layerforge/captioning.hpp"
#include "layerforge/composer.hpp"
#include "layerforge/error.hpp"
#include "layerforge/serialization.hpp"

namespace layerforge {

// Everything the `generate` command needs. Loaded from a JSON file whose
// keys are listed in kRunConfigKeys; unknown keys are rejected.
struct RunConfig {
  CompositionConfig composition;
  std::map<SourceKind, std::filesystem::path> pools;
  std::map<SourceKind, std::size_t> pool_caps;
  std::filesystem::path out_dir;
  int workers = 1;
  std::uint64_t count = 0;
  RefinerConfig refiner;
};

inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys = {
      "canvas",         "p_image_crop",   "crop_scale", "p_text",         "text_scale",
      "fg_count_range", "fg_scale",       "remove_range", "donor_count_range", "donor_layers_range",
      "max_candidates", "placement",      "global_seed", "max_layers",    "alpha_threshold",
      "pools",          "pool_caps",      "out_dir",    "workers",        "count",
      "refiner"};
  return keys;
}

inline std::optional<SourceKind> pool_key_kind(const std::string& key) {
  if (key == "base") return SourceKind::kBase;
  if (key == "donor") return SourceKind::kDonor;
  if (key == "image_crop") return SourceKind::kImageCrop;
  if (key == "text") return SourceKind::kText;
  if (key == "foreground_object") return SourceKind::kForegroundObject;
  return std::nullopt;
}

inline std::size_t default_pool_cap(SourceKind k) {
  return k == SourceKind::kImageCrop ? kDefaultImageCropCap : std::numeric_limits<std::size_t>::max();
}

// Relative paths are resolved against `base_dir`. All problems are collected
// and reported together.
inline RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  RunConfig rc;
  auto& c = rc.composition;
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!run_config_keys().count(key)) errors.push_back("unknown key '" + key + "'");

  auto field = [&](const char* key, auto&& apply) {
    if (!j.contains(key)) return;
    try {
      apply(j.at(key));
    } catch (const std::exception& e) {
      errors.push_back(std::string("'") + key + "': " + e.what());
    }
  };
  auto pair_of = [](const Json& v, const char* what) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(std::string("expected ") + what);
  };
  auto scale = [&](const Json& v) {
    pair_of(v, "[lo, hi] numbers");
    return ScaleRange{v[0].get<double>(), v[1].get<double>()};
  };
  auto irange = [&](const Json& v) {
    pair_of(v, "[lo, hi] integers");
    return IntRange{v[0].get<int>(), v[1].get<int>()};
  };
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  field("canvas", [&](const Json& v) {
    pair_of(v, "[width, height]");
    c.canvas = {v[0].get<int>(), v[1].get<int>()};
  });
  field("p_image_crop", [&](const Json& v) { c.p_image_crop = v.get<double>(); });
  field("crop_scale", [&](const Json& v) { c.crop_scale = scale(v); });
  field("p_text", [&](const Json& v) { c.p_text = v.get<double>(); });
  field("text_scale", [&](const Json& v) { c.text_scale = scale(v); });
  field("fg_count_range", [&](const Json& v) { c.fg_count_range = irange(v); });
  field("fg_scale", [&](const Json& v) { c.fg_scale = scale(v); });
  field("remove_range", [&](const Json& v) { c.remove_range = irange(v); });
  field("donor_count_range", [&](const Json& v) { c.donor_count_range = irange(v); });
  field("donor_layers_range", [&](const Json& v) { c.donor_layers_range = irange(v); });
  field("max_candidates", [&](const Json& v) { c.max_candidates = v.get<int>(); });
  field("placement", [&](const Json& v) {
    const auto s = v.get<std::string>();
    if (s == "sampled")
      c.placement_mode = CandidateMode::kSampled;
    else if (s == "exhaustive")
      c.placement_mode = CandidateMode::kExhaustive;
    else
      throw ConfigError("expected \"sampled\" or \"exhaustive\"");
  });
  field("global_seed", [&](const Json& v) { c.global_seed = v.get<std::uint64_t>(); });
  field("max_layers", [&](const Json& v) { c.max_layers = v.get<int>(); });
  field("alpha_threshold", [&](const Json& v) {
    const int t = v.get<int>();
    if (t < 0 || t > 255) throw ConfigError("expected 0..255");
    c.alpha_threshold = static_cast<std::uint8_t>(t);
  });
  field("pools", [&](const Json& v) {
    if (!v.is_object()) throw ConfigError("expected an object of pool directories");
    for (const auto& [k, p] : v.items()) {
      const auto kind = pool_key_kind(k);
      if (!kind) throw ConfigError("unknown pool '" + k + "'");
      rc.pools[*kind] = resolve(p.get<std::string>());
    }
  });
  field("pool_caps", [&](const Json& v) {
    if (!v.is_object()) throw ConfigError("expected an object of pool caps");
    for (const auto& [k, n] : v.items()) {
      const auto kind = pool_key_kind(k);
      if (!kind) throw ConfigError("unknown pool '" + k + "'");
      rc.pool_caps[*kind] = n.get<std::size_t>();
    }
  });
  field("out_dir", [&](const Json& v) { rc.out_dir = resolve(v.get<std::string>()); });
  field("workers", [&](const Json& v) { rc.workers = v.get<int>(); });
  field("count", [&](const Json& v) { rc.count = v.get<std::uint64_t>(); });
  field("refiner", [&](const Json& v) {
    static const std::set<std::string> keys = {"endpoint", "model", "timeout_s", "max_retries",
                                               "fallback", "system_prompt_file"};
    for (const auto& [k, _] : v.items())
      if (!keys.count(k)) throw ConfigError("unknown refiner key '" + k + "'");
    auto& r = rc.refiner;
    r.endpoint = v.value("endpoint", std::string{});
    r.model = v.value("model", std::string{});
    if (v.contains("timeout_s"))
      r.timeout = std::chrono::milliseconds(static_cast<long long>(v["timeout_s"].get<double>() * 1000));
    r.max_retries = v.value("max_retries", r.max_retries);
    r.fallback = v.value("fallback", r.fallback);
    if (v.contains("system_prompt_file"))
      r.system_prompt = read_text_file(resolve(v["system_prompt_file"].get<std::string>()));
  });

  try {
    validate(c);
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  if (rc.workers < 1) errors.push_back("'workers' must be >= 1");
  if (!rc.pools.count(SourceKind::kBase)) errors.push_back("'pools.base' is required");

  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(j, path.parent_path());
}

// Fails with ConfigError naming every configured pool directory that does
// not exist.
inline void check_pool_dirs(const RunConfig& rc) {
  std::string missing;
  for (const auto& [kind, dir] : rc.pools)
    if (!std::filesystem::is_directory(dir))
      missing += "\n  - " + std::string(to_string(kind)) + " pool directory not found: " + dir.string();
  if (!missing.empty()) throw ConfigError("invalid config:" + missing);
}

inline AssetPools load_pools(const RunConfig& rc, std::vector<std::string>* diagnostics = nullptr) {
  check_pool_dirs(rc);
  AssetPools pools;
  for (const auto& [kind, dir] : rc.pools) {
    const auto cap_it = rc.pool_caps.find(kind);
    const auto cap = cap_it == rc.pool_caps.end() ? default_pool_cap(kind) : cap_it->second;
    auto pool = ingest_pool(dir, kind, cap);
    if (diagnostics) diagnostics->insert(diagnostics->end(), pool.diagnostics.begin(), pool.diagnostics.end());
    switch (kind) {
      case SourceKind::kBase: pools.base = std::move(pool); break;
      case SourceKind::kDonor: pools.donor = std::move(pool); break;
      case SourceKind::kImageCrop: pools.image_crop = std::move(pool); break;
      case SourceKind::kText: pools.text = std::move(pool); break;
      case SourceKind::kForegroundObject: pools.foreground_object = std::move(pool); break;
    }
  }
  return pools;
}

}  // namespace layerforge
