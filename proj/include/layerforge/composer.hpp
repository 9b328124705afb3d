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
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "layerforge/assets.hpp"
#include "layerforge/error.hpp"
#include "layerforge/geometry.hpp"
#include "layerforge/image.hpp"
#include "layerforge/png_io.hpp"
#include "layerforge/rng.hpp"

namespace layerforge {

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend constexpr bool operator==(const IntRange&, const IntRange&) = default;
};

struct CompositionConfig {
  CanvasSize canvas{1024, 1024};
  double p_image_crop = 0.60;
  ScaleRange crop_scale{0.3, 0.4};
  double p_text = 0.35;
  ScaleRange text_scale{0.6, 0.8};
  IntRange fg_count_range{0, 3};
  ScaleRange fg_scale{0.25, 0.40};
  IntRange remove_range{1, 4};
  IntRange donor_count_range{1, 4};
  IntRange donor_layers_range{0, 2};
  int max_candidates = 300;
  CandidateMode placement_mode = CandidateMode::kSampled;
  std::uint64_t global_seed = 0;
  int max_layers = 52;
  std::uint8_t alpha_threshold = kDefaultAlphaThreshold;
};

inline void validate(const CompositionConfig& cfg) {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  auto scale = [](ScaleRange r, const char* name) {
    if (!(r.lo > 0.0 && r.hi <= 1.0 && r.lo <= r.hi))
      throw ConfigError(std::string(name) + " must satisfy 0 < lo <= hi <= 1");
  };
  auto range = [](IntRange r, int min_lo, const char* name) {
    if (r.lo < min_lo || r.lo > r.hi)
      throw ConfigError(std::string(name) + " must be a nonempty range with lo >= " +
                        std::to_string(min_lo));
  };
  if (cfg.canvas.width <= 0 || cfg.canvas.height <= 0)
    throw ConfigError("canvas dimensions must be positive");
  prob(cfg.p_image_crop, "p_image_crop");
  prob(cfg.p_text, "p_text");
  scale(cfg.crop_scale, "crop_scale");
  scale(cfg.text_scale, "text_scale");
  scale(cfg.fg_scale, "fg_scale");
  range(cfg.fg_count_range, 0, "fg_count_range");
  range(cfg.remove_range, 0, "remove_range");
  range(cfg.donor_count_range, 0, "donor_count_range");
  range(cfg.donor_layers_range, 0, "donor_layers_range");
  if (cfg.max_candidates <= 0) throw ConfigError("max_candidates must be positive");
  if (cfg.max_layers <= 0) throw ConfigError("max_layers must be positive");
}

// Pools are immutable once ingested and shared by all workers. Absent pools
// disable the stages that would draw from them.
struct AssetPools {
  std::optional<AssetPool> base;
  std::optional<AssetPool> donor;
  std::optional<AssetPool> image_crop;
  std::optional<AssetPool> text;
  std::optional<AssetPool> foreground_object;
};

struct LayerPlan {
  SourceKind source = SourceKind::kBase;
  std::string asset_id;
  RgbaImage image;
  BBox placed_box;
  BBox quantized_box;
  std::string caption;
  int z_order = 0;
  // Sum of intersections with every lower layer, divided by the layer area.
  double overlap_score = 0.0;
};

struct SampleDraft {
  std::string sample_id;
  std::uint64_t seed = 0;
  CanvasSize canvas;
  RgbaImage background;
  std::string background_caption;
  std::string base_id;
  std::vector<LayerPlan> layers;
  RgbaImage composite;
  std::vector<std::string> diagnostics;
  std::vector<std::string> flags;

  std::vector<BBox> placed_boxes() const {
    std::vector<BBox> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.placed_box);
    return out;
  }
};

inline std::string format_sample_id(std::uint64_t id) {
  std::string s = std::to_string(id);
  if (s.size() < 8) s.insert(0, 8 - s.size(), '0');
  return s;
}

template <class URBG>
int draw_int(IntRange r, URBG& rng) {
  std::uniform_int_distribution<int> d(r.lo, r.hi);
  return d(rng);
}

template <class URBG>
bool draw_bernoulli(double p, URBG& rng) {
  std::bernoulli_distribution d(p);
  return d(rng);
}

namespace detail {

// Appends `image` at an overlap-minimizing position on the draft canvas.
template <class URBG>
LayerPlan& place_on_draft(SampleDraft& draft, const CompositionConfig& cfg, URBG& rng,
                          SourceKind source, std::string asset_id, RgbaImage image,
                          std::string caption) {
  if (image.width() > draft.canvas.width || image.height() > draft.canvas.height) {
    const auto fit = scaled_size(image.size(), draft.canvas, 1.0);
    draft.diagnostics.push_back("layer from '" + asset_id + "' shrunk to fit the canvas");
    image = resize_bilinear(image, fit.width, fit.height);
  }
  PlacementProblem p;
  p.layer_width = image.width();
  p.layer_height = image.height();
  p.occupied = draft.placed_boxes();
  p.canvas = draft.canvas;
  p.max_candidates = cfg.max_candidates;
  p.mode = cfg.placement_mode;
  const auto res = place_layer(p, rng);
  LayerPlan plan;
  plan.source = source;
  plan.asset_id = std::move(asset_id);
  plan.placed_box = res.box(p.layer_width, p.layer_height);
  plan.image = std::move(image);
  plan.caption = std::move(caption);
  plan.z_order = static_cast<int>(draft.layers.size());
  plan.overlap_score = res.overlap_score;
  draft.layers.push_back(std::move(plan));
  return draft.layers.back();
}

}  // namespace detail

// Stage 1. Keeps the background and a random subset of the base design's
// foregrounds: N_remove is drawn from cfg.remove_range and clamped so that at
// least one foreground survives. Designs whose size differs from the canvas
// are resampled onto it.
template <class URBG>
SampleDraft build_base_layout(const AssetRecord& base, const CompositionConfig& cfg, URBG& rng) {
  if (base.layers.empty()) throw Error("base design '" + base.id + "' has no foreground layers");
  SampleDraft draft;
  draft.canvas = cfg.canvas;
  draft.base_id = base.id;
  draft.background_caption = base.caption;
  auto background = read_png(base.image_path);
  const double sx = static_cast<double>(cfg.canvas.width) / background.width();
  const double sy = static_cast<double>(cfg.canvas.height) / background.height();
  const bool rescale = background.size() != cfg.canvas;
  if (rescale) background = resize_bilinear(background, cfg.canvas.width, cfg.canvas.height);
  draft.background = std::move(background);

  const int n = static_cast<int>(base.layers.size());
  const int drawn = draw_int(cfg.remove_range, rng);
  const int removals = std::clamp(drawn, 0, n - 1);
  auto removed = sample_distinct_indices(static_cast<std::size_t>(n),
                                         static_cast<std::size_t>(removals), rng);
  std::vector<bool> keep(n, true);
  for (auto i : removed) keep[i] = false;

  for (int i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    const auto& sl = base.layers[i];
    LayerPlan plan;
    plan.source = SourceKind::kBase;
    plan.asset_id = base.id;
    plan.caption = sl.caption;
    plan.image = load_sub_layer(sl);
    plan.placed_box = sl.box;
    if (rescale) {
      BBox b{static_cast<int>(std::floor(sl.box.x0 * sx)), static_cast<int>(std::floor(sl.box.y0 * sy)),
             static_cast<int>(std::ceil(sl.box.x1 * sx)), static_cast<int>(std::ceil(sl.box.y1 * sy))};
      b.x1 = std::clamp(b.x1, b.x0 + 1, cfg.canvas.width);
      b.y1 = std::clamp(b.y1, b.y0 + 1, cfg.canvas.height);
      plan.image = resize_bilinear(plan.image, b.width(), b.height());
      plan.placed_box = b;
    }
    plan.z_order = static_cast<int>(draft.layers.size());
    draft.layers.push_back(std::move(plan));
  }
  return draft;
}

// Stage 2. Borrows up to cfg.donor_layers_range foregrounds from each of
// N_donors distinct donor designs, keeping their native crop size.
template <class URBG>
void add_donor_layers(SampleDraft& draft, const AssetPools& pools, const CompositionConfig& cfg,
                      URBG& rng) {
  if (!pools.donor || pools.donor->empty()) {
    draft.diagnostics.push_back("donor stage skipped: no donor pool");
    return;
  }
  const int n_donors = draw_int(cfg.donor_count_range, rng);
  const auto donors = sample_distinct(*pools.donor, static_cast<std::size_t>(n_donors), rng);
  for (const AssetRecord* donor : donors) {
    const int n_layers = draw_int(cfg.donor_layers_range, rng);
    const auto picks = sample_distinct_indices(donor->layers.size(),
                                               static_cast<std::size_t>(n_layers), rng);
    for (auto i : picks) {
      const auto& sl = donor->layers[i];
      detail::place_on_draft(draft, cfg, rng, SourceKind::kDonor, donor->id, load_sub_layer(sl),
                             sl.caption);
    }
  }
}

struct AuxiliaryOutcome {
  bool crop_drawn = false;
  bool text_drawn = false;
  int objects_drawn = 0;
};

// Stage 3. Independent draws in the order: image crop, text, foreground
// objects. Text layers are cut to their non-transparent extent before they
// are placed.
template <class URBG>
AuxiliaryOutcome add_auxiliary_layers(SampleDraft& draft, const AssetPools& pools,
                                      const CompositionConfig& cfg, URBG& rng) {
  AuxiliaryOutcome out;
  out.crop_drawn = draw_bernoulli(cfg.p_image_crop, rng);
  if (out.crop_drawn) {
    if (pools.image_crop && !pools.image_crop->empty()) {
      const auto& rec = sample_asset(*pools.image_crop, rng);
      auto scaled = scale_asset(rec, draft.canvas, cfg.crop_scale, rng);
      detail::place_on_draft(draft, cfg, rng, SourceKind::kImageCrop, rec.id,
                             std::move(scaled.image), rec.caption);
    } else {
      draft.diagnostics.push_back("image-crop branch skipped: empty pool");
    }
  }
  out.text_drawn = draw_bernoulli(cfg.p_text, rng);
  if (out.text_drawn) {
    if (pools.text && !pools.text->empty()) {
      const auto& rec = sample_asset(*pools.text, rng);
      auto scaled = scale_asset(rec, draft.canvas, cfg.text_scale, rng);
      if (const auto tight = tighten_bbox_to_alpha(scaled.image, cfg.alpha_threshold)) {
        detail::place_on_draft(draft, cfg, rng, SourceKind::kText, rec.id,
                               crop(scaled.image, *tight), rec.caption);
      } else {
        draft.diagnostics.push_back("text asset '" + rec.id + "' is fully transparent; skipped");
      }
    } else {
      draft.diagnostics.push_back("text branch skipped: empty pool");
    }
  }
  out.objects_drawn = draw_int(cfg.fg_count_range, rng);
  if (out.objects_drawn > 0) {
    if (pools.foreground_object && !pools.foreground_object->empty()) {
      for (int i = 0; i < out.objects_drawn; ++i) {
        const auto& rec = sample_asset(*pools.foreground_object, rng);
        auto scaled = scale_asset(rec, draft.canvas, cfg.fg_scale, rng);
        detail::place_on_draft(draft, cfg, rng, SourceKind::kForegroundObject, rec.id,
                               std::move(scaled.image), rec.caption);
      }
    } else {
      draft.diagnostics.push_back("foreground-object branch skipped: empty pool");
    }
  }
  return out;
}

inline RgbaImage recomposite(const RgbaImage& background, const std::vector<LayerPlan>& layers) {
  RgbaImage out = background;
  for (const auto& l : layers) composite_over_inplace(out, l.image, {l.placed_box.x0, l.placed_box.y0});
  return out;
}

// Stage 5. Applies the layer cap, recomputes z-order, overlap scores and
// quantized boxes, then folds the layers over the background.
inline void assemble_sample(SampleDraft& draft, const CompositionConfig& cfg) {
  if (draft.background.empty()) throw Error("assemble_sample: draft has no background");
  if (draft.layers.empty()) throw Error("assemble_sample: draft has no foreground layers");
  if (static_cast<int>(draft.layers.size()) > cfg.max_layers) {
    draft.diagnostics.push_back("dropped " + std::to_string(draft.layers.size() - cfg.max_layers) +
                                " topmost layers over the cap of " + std::to_string(cfg.max_layers));
    draft.flags.push_back("layer_cap_applied");
    draft.layers.resize(static_cast<std::size_t>(cfg.max_layers));
  }
  std::vector<BBox> below;
  below.reserve(draft.layers.size());
  for (std::size_t i = 0; i < draft.layers.size(); ++i) {
    auto& l = draft.layers[i];
    l.z_order = static_cast<int>(i);
    l.overlap_score = overlap_ratio(l.placed_box, below);
    l.quantized_box = quantize_box(l.placed_box, draft.canvas);
    below.push_back(l.placed_box);
  }
  draft.composite = recomposite(draft.background, draft.layers);
}

// Runs every stage for one sample with its derived seed.
inline SampleDraft compose_sample(const AssetPools& pools, const CompositionConfig& cfg,
                                  std::uint64_t sample_id) {
  if (!pools.base || pools.base->empty()) throw Error("compose_sample: no base pool");
  const auto seed = sample_seed(cfg.global_seed, sample_id);
  Rng rng(seed);
  const auto& base = sample_asset(*pools.base, rng);
  SampleDraft draft = build_base_layout(base, cfg, rng);
  draft.sample_id = format_sample_id(sample_id);
  draft.seed = seed;
  add_donor_layers(draft, pools, cfg, rng);
  add_auxiliary_layers(draft, pools, cfg, rng);
  assemble_sample(draft, cfg);
  return draft;
}

}  // namespace layerforge
