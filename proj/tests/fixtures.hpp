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

// Synthetic asset pools and scratch directories for tests.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "layerforge/assets.hpp"
#include "layerforge/composer.hpp"
#include "layerforge/image.hpp"
#include "layerforge/png_io.hpp"
#include "layerforge/serialization.hpp"

namespace layerforge::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "lf") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline Rgba random_color(std::mt19937_64& rng, std::uint8_t alpha) {
  std::uniform_int_distribution<int> c(0, 255);
  return {static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)),
          static_cast<std::uint8_t>(c(rng)), alpha};
}

// Solid block with an inset of `pad` transparent pixels on every side.
inline RgbaImage padded_block(int w, int h, int pad, Rgba color) {
  RgbaImage img(w, h);
  for (int y = pad; y < h - pad; ++y)
    for (int x = pad; x < w - pad; ++x) img.set(x, y, color);
  return img;
}

// Disc with a soft half-alpha rim.
inline RgbaImage disc(int w, int h, Rgba color) {
  RgbaImage img(w, h);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rx = w / 2.0, ry = h / 2.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = ((x - cx) / rx) * ((x - cx) / rx) + ((y - cy) / ry) * ((y - cy) / ry);
      if (d <= 0.8)
        img.set(x, y, color);
      else if (d <= 1.0)
        img.set(x, y, {color.r, color.g, color.b, 128});
    }
  return img;
}

struct PoolSpec {
  CanvasSize canvas{256, 256};
  int base_count = 6;
  int donor_count = 6;
  int crop_count = 5;
  int text_count = 4;
  int object_count = 5;
  int min_layers = 1;
  int max_layers = 6;
  std::uint64_t seed = 7;
};

inline void write_layered_pool(const std::filesystem::path& dir, SourceKind kind, const PoolSpec& s,
                               int count, std::mt19937_64& rng) {
  std::filesystem::create_directories(dir);
  std::string lines;
  std::uniform_int_distribution<int> nl(s.min_layers, s.max_layers);
  for (int i = 0; i < count; ++i) {
    const std::string id = std::string(to_string(kind)) + "_" + std::to_string(i);
    write_png(dir / (id + "_bg.png"), RgbaImage(s.canvas.width, s.canvas.height, random_color(rng, 255)));
    nlohmann::json layers = nlohmann::json::array();
    const int n = nl(rng);
    for (int k = 0; k < n; ++k) {
      std::uniform_int_distribution<int> ws(8, s.canvas.width / 3), hs(8, s.canvas.height / 3);
      const int w = ws(rng), h = hs(rng);
      std::uniform_int_distribution<int> xs(0, s.canvas.width - w), ys(0, s.canvas.height - h);
      const BBox b{xs(rng), ys(rng), 0, 0};
      const BBox box{b.x0, b.y0, b.x0 + w, b.y0 + h};
      const auto file = id + "_l" + std::to_string(k) + ".png";
      const std::uint8_t alpha = (k % 3 == 2) ? 200 : 255;
      write_png(dir / file, k % 2 ? disc(w, h, random_color(rng, alpha))
                                  : RgbaImage(w, h, random_color(rng, alpha)));
      layers.push_back({{"image", file}, {"box", box_to_json(box)},
                        {"caption", "Layer " + std::to_string(k) + " of " + id + "."}});
    }
    nlohmann::json rec = {{"id", id},
                          {"kind", std::string(to_string(kind))},
                          {"image", id + "_bg.png"},
                          {"caption", "A plain background for " + id + "."},
                          {"layers", layers}};
    lines += rec.dump() + "\n";
  }
  write_text_file(dir / "pool.jsonl", lines);
}

inline void write_flat_pool(const std::filesystem::path& dir, SourceKind kind, int count,
                            std::mt19937_64& rng) {
  std::filesystem::create_directories(dir);
  std::string lines;
  for (int i = 0; i < count; ++i) {
    const std::string id = std::string(to_string(kind)) + "_" + std::to_string(i);
    std::uniform_int_distribution<int> ws(20, 120), hs(20, 120);
    const int w = ws(rng), h = hs(rng);
    RgbaImage img;
    switch (kind) {
      case SourceKind::kText: img = padded_block(w, h, 6, random_color(rng, 255)); break;
      case SourceKind::kForegroundObject: img = disc(w, h, random_color(rng, 255)); break;
      default: img = RgbaImage(w, h, random_color(rng, 255)); break;
    }
    write_png(dir / (id + ".png"), img);
    nlohmann::json rec = {{"id", id},
                          {"kind", std::string(to_string(kind))},
                          {"image", id + ".png"},
                          {"caption", "Asset " + id}};
    lines += rec.dump() + "\n";
  }
  write_text_file(dir / "pool.jsonl", lines);
}

// Writes all five pools under `root` and returns their directories in
// SourceKind order.
inline std::vector<std::filesystem::path> write_pools(const std::filesystem::path& root, const PoolSpec& s) {
  std::mt19937_64 rng(s.seed);
  const std::vector<std::filesystem::path> dirs = {root / "base", root / "donor", root / "image_crop",
                                                   root / "text", root / "foreground_object"};
  write_layered_pool(dirs[0], SourceKind::kBase, s, s.base_count, rng);
  write_layered_pool(dirs[1], SourceKind::kDonor, s, s.donor_count, rng);
  write_flat_pool(dirs[2], SourceKind::kImageCrop, s.crop_count, rng);
  write_flat_pool(dirs[3], SourceKind::kText, s.text_count, rng);
  write_flat_pool(dirs[4], SourceKind::kForegroundObject, s.object_count, rng);
  return dirs;
}

inline AssetPools load_test_pools(const std::vector<std::filesystem::path>& dirs) {
  AssetPools p;
  p.base = ingest_pool(dirs[0], SourceKind::kBase, SIZE_MAX);
  p.donor = ingest_pool(dirs[1], SourceKind::kDonor, SIZE_MAX);
  p.image_crop = ingest_pool(dirs[2], SourceKind::kImageCrop, kDefaultImageCropCap);
  p.text = ingest_pool(dirs[3], SourceKind::kText, SIZE_MAX);
  p.foreground_object = ingest_pool(dirs[4], SourceKind::kForegroundObject, SIZE_MAX);
  return p;
}

inline RgbaImage random_image(int w, int h, std::mt19937_64& rng) {
  RgbaImage img(w, h);
  std::uniform_int_distribution<int> v(0, 255);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(v(rng));
  return img;
}

// FNV-1a over every regular file below `root`: relative path, then bytes,
// in sorted path order.
inline std::uint64_t tree_hash(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), root));
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : files) {
    feed(f.generic_string());
    feed(read_text_file(root / f));
  }
  return h;
}

}  // namespace layerforge::testing
