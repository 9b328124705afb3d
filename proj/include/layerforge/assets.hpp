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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "layerforge/error.hpp"
#include "layerforge/geometry.hpp"
#include "layerforge/image.hpp"
#include "layerforge/png_io.hpp"

namespace layerforge {

enum class SourceKind { kBase, kDonor, kImageCrop, kText, kForegroundObject };

inline constexpr std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::kBase: return "base";
    case SourceKind::kDonor: return "donor";
    case SourceKind::kImageCrop: return "image-crop";
    case SourceKind::kText: return "text";
    case SourceKind::kForegroundObject: return "foreground-object";
  }
  return "unknown";
}

inline std::optional<SourceKind> parse_source_kind(std::string_view s) {
  for (auto k : {SourceKind::kBase, SourceKind::kDonor, SourceKind::kImageCrop, SourceKind::kText,
                 SourceKind::kForegroundObject})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct SubLayer {
  std::filesystem::path image_path;
  BBox box;
  std::string caption;
};

struct AssetRecord {
  std::string id;
  SourceKind kind = SourceKind::kImageCrop;
  // For base/donor records this is the background.
  std::filesystem::path image_path;
  std::string caption;
  CanvasSize native_size{0, 0};
  std::vector<SubLayer> layers;
};

// Loads the image of a sub-layer. Files may either be crops matching the box
// or full-design rasters, in which case the box region is cut out.
inline RgbaImage load_sub_layer(const SubLayer& layer) {
  auto img = read_png(layer.image_path);
  if (img.width() == layer.box.width() && img.height() == layer.box.height()) return img;
  if (box_within(layer.box, img.size())) return crop(img, layer.box);
  throw IoError("sub-layer " + layer.image_path.string() + " is neither box-sized nor contains the box");
}

struct AssetPool {
  SourceKind kind = SourceKind::kImageCrop;
  std::vector<AssetRecord> records;
  std::size_t cap = 0;
  // One entry per skipped sidecar line.
  std::vector<std::string> diagnostics;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
};

inline constexpr std::size_t kDefaultImageCropCap = 20000;
inline constexpr std::string_view kPoolSidecar = "pool.jsonl";

namespace detail {

inline BBox parse_box(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error("box must be an array of 4 integers");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw Error("box must be an array of 4 integers");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

inline AssetRecord parse_record(const nlohmann::json& j, const std::filesystem::path& root,
                                SourceKind expected) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  AssetRecord rec;
  rec.id = j.at("id").get<std::string>();
  if (rec.id.empty()) throw Error("empty id");
  const auto kind = parse_source_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error("unknown kind '" + j.at("kind").get<std::string>() + "'");
  if (*kind != expected)
    throw Error("kind '" + std::string(to_string(*kind)) + "' does not match pool kind '" +
                std::string(to_string(expected)) + "'");
  rec.kind = *kind;
  rec.image_path = root / j.at("image").get<std::string>();
  rec.caption = j.value("caption", std::string{});
  const bool layered = rec.kind == SourceKind::kBase || rec.kind == SourceKind::kDonor;
  if (layered) {
    if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
      throw Error("base/donor record needs at least one layer");
    for (const auto& lj : j["layers"]) {
      SubLayer sl;
      sl.image_path = root / lj.at("image").get<std::string>();
      sl.box = parse_box(lj.at("box"));
      if (!sl.box.valid()) throw Error("degenerate layer box");
      sl.caption = lj.value("caption", std::string{});
      rec.layers.push_back(std::move(sl));
    }
  }
  return rec;
}

inline void validate_record(AssetRecord& rec, const std::optional<CanvasSize>& declared) {
  const auto img = read_png(rec.image_path);
  if (img.empty()) throw Error("image has zero dimension");
  rec.native_size = img.size();
  if (declared && *declared != rec.native_size)
    throw Error("image decodes to " + std::to_string(img.width()) + "x" +
                std::to_string(img.height()) + ", declared " + std::to_string(declared->width) +
                "x" + std::to_string(declared->height));
  for (const auto& sl : rec.layers) {
    if (!box_within(sl.box, rec.native_size)) throw Error("layer box outside design canvas");
    (void)load_sub_layer(sl);
  }
}

}  // namespace detail

// Reads <root>/pool.jsonl. Lines are sorted by id; records are validated in
// that order until `cap` valid records are collected. Invalid lines are
// skipped with one diagnostic each.
inline AssetPool ingest_pool(const std::filesystem::path& root, SourceKind kind, std::size_t cap) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("pool directory does not exist: " + root.string());
  const auto sidecar = root / kPoolSidecar;
  std::ifstream in(sidecar);
  if (!in) throw IoError("missing pool sidecar: " + sidecar.string());

  AssetPool pool;
  pool.kind = kind;
  pool.cap = cap;

  std::vector<std::pair<AssetRecord, std::optional<CanvasSize>>> parsed;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto rec = detail::parse_record(j, root, kind);
      std::optional<CanvasSize> declared;
      if (j.contains("size")) {
        const auto& s = j["size"];
        declared = CanvasSize{s.at(0).get<int>(), s.at(1).get<int>()};
      }
      if (!seen.insert(rec.id).second) throw Error("duplicate id '" + rec.id + "'");
      parsed.emplace_back(std::move(rec), declared);
    } catch (const std::exception& e) {
      pool.diagnostics.push_back(sidecar.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::sort(parsed.begin(), parsed.end(),
            [](const auto& a, const auto& b) { return a.first.id < b.first.id; });
  for (auto& [rec, declared] : parsed) {
    if (pool.records.size() >= cap) break;
    try {
      detail::validate_record(rec, declared);
      pool.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      pool.diagnostics.push_back("record '" + rec.id + "' skipped: " + e.what());
    }
  }
  if (pool.records.empty())
    throw Error("pool " + root.string() + " has no valid " + std::string(to_string(kind)) +
                " records");
  return pool;
}

template <class URBG>
const AssetRecord& sample_asset(const AssetPool& pool, URBG& rng) {
  if (pool.empty()) throw Error("sample_asset: empty pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool.records[pick(rng)];
}

// min(k, n) distinct indices from [0, n), in draw order.
template <class URBG>
std::vector<std::size_t> sample_distinct_indices(std::size_t n, std::size_t k, URBG& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

template <class URBG>
std::vector<const AssetRecord*> sample_distinct(const AssetPool& pool, std::size_t k, URBG& rng) {
  if (pool.empty()) throw Error("sample_distinct: empty pool");
  std::vector<const AssetRecord*> out;
  for (auto i : sample_distinct_indices(pool.size(), k, rng)) out.push_back(&pool.records[i]);
  return out;
}

struct ScaleRange {
  double lo = 1.0;
  double hi = 1.0;
};

// Target size with the longest side at `rel * max(W, H)`, aspect ratio kept.
// Results that would not fit the canvas are shrunk until they do.
inline CanvasSize scaled_size(CanvasSize native, CanvasSize canvas, double rel) {
  if (native.width <= 0 || native.height <= 0) throw Error("scale_asset: degenerate source");
  const double longest = std::max(native.width, native.height);
  double factor = rel * std::max(canvas.width, canvas.height) / longest;
  factor = std::min({factor, static_cast<double>(canvas.width) / native.width,
                     static_cast<double>(canvas.height) / native.height});
  const int w = std::clamp(static_cast<int>(std::lround(native.width * factor)), 1, canvas.width);
  const int h = std::clamp(static_cast<int>(std::lround(native.height * factor)), 1, canvas.height);
  return {w, h};
}

struct ScaledAsset {
  RgbaImage image;
  CanvasSize target;
  double relative_scale = 0.0;
};

template <class URBG>
double draw_scale(ScaleRange range, URBG& rng) {
  if (!(range.lo > 0.0 && range.hi <= 1.0 && range.lo <= range.hi))
    throw Error("scale range must lie in (0, 1] with lo <= hi");
  if (range.lo == range.hi) return range.lo;
  std::uniform_real_distribution<double> u(range.lo, range.hi);
  return u(rng);
}

inline ScaledAsset scale_image(const RgbaImage& src, CanvasSize canvas, double rel) {
  if (src.empty()) throw Error("scale_asset: degenerate source");
  const auto target = scaled_size(src.size(), canvas, rel);
  return {resize_bilinear(src, target.width, target.height), target, rel};
}

template <class URBG>
ScaledAsset scale_asset(const AssetRecord& rec, CanvasSize canvas, ScaleRange range, URBG& rng) {
  const double s = draw_scale(range, rng);
  return scale_image(read_png(rec.image_path), canvas, s);
}

}  // namespace layerforge
