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
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layerforge/error.hpp"

namespace layerforge {

// Half-open integer pixel rectangle [x0, x1) x [y0, y1). Serialized as
// [x0, y0, x1, y1].
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  constexpr int width() const { return x1 - x0; }
  constexpr int height() const { return y1 - y0; }
  constexpr bool valid() const { return x0 < x1 && y0 < y1; }

  friend constexpr bool operator==(const BBox&, const BBox&) = default;
};

struct CanvasSize {
  int width = 1024;
  int height = 1024;

  friend constexpr bool operator==(const CanvasSize&, const CanvasSize&) = default;
};

constexpr BBox full_canvas_box(CanvasSize canvas) {
  return {0, 0, canvas.width, canvas.height};
}

constexpr bool box_within(const BBox& b, CanvasSize canvas) {
  return b.x0 >= 0 && b.y0 >= 0 && b.x1 <= canvas.width && b.y1 <= canvas.height;
}

constexpr bool box_contains(const BBox& outer, const BBox& inner) {
  return outer.x0 <= inner.x0 && outer.y0 <= inner.y0 && outer.x1 >= inner.x1 &&
         outer.y1 >= inner.y1;
}

constexpr std::int64_t area(const BBox& b) {
  return static_cast<std::int64_t>(b.x1 - b.x0) * (b.y1 - b.y0);
}

constexpr std::int64_t intersect_area(const BBox& a, const BBox& b) {
  const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= 0 || h <= 0) return 0;
  return static_cast<std::int64_t>(w) * h;
}

constexpr BBox enclosing_box(const BBox& a, const BBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

inline double iou(const BBox& a, const BBox& b) {
  const auto inter = intersect_area(a, b);
  const auto uni = area(a) + area(b) - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double giou(const BBox& a, const BBox& b) {
  const auto inter = intersect_area(a, b);
  const auto uni = area(a) + area(b) - inter;
  const auto hull = area(enclosing_box(a, b));
  if (uni <= 0 || hull <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni) -
         static_cast<double>(hull - uni) / static_cast<double>(hull);
}

inline double canvas_diagonal(CanvasSize canvas) {
  return std::hypot(static_cast<double>(canvas.width), static_cast<double>(canvas.height));
}

struct CenterDistance {
  double pixels = 0.0;
  // pixels divided by the canvas diagonal
  double normalized = 0.0;
};

inline CenterDistance center_distance(const BBox& a, const BBox& b, CanvasSize canvas) {
  const double dx = 0.5 * (a.x0 + a.x1) - 0.5 * (b.x0 + b.x1);
  const double dy = 0.5 * (a.y0 + a.y1) - 0.5 * (b.y0 + b.y1);
  const double px = std::hypot(dx, dy);
  return {px, px / canvas_diagonal(canvas)};
}

namespace detail {
constexpr int floor_to(int v, int step) {
  const int q = v / step;
  return (v % step != 0 && v < 0) ? (q - 1) * step : q * step;
}
constexpr int ceil_to(int v, int step) { return -floor_to(-v, step); }
}  // namespace detail

inline constexpr int kQuantStep = 16;

// Expands the box outward to the 16-pixel grid and clamps it to the canvas.
constexpr BBox quantize_box(const BBox& b, CanvasSize canvas) {
  BBox q{detail::floor_to(b.x0, kQuantStep), detail::floor_to(b.y0, kQuantStep),
         detail::ceil_to(b.x1, kQuantStep), detail::ceil_to(b.y1, kQuantStep)};
  q.x0 = std::clamp(q.x0, 0, canvas.width);
  q.y0 = std::clamp(q.y0, 0, canvas.height);
  q.x1 = std::clamp(q.x1, 0, canvas.width);
  q.y1 = std::clamp(q.y1, 0, canvas.height);
  return q;
}

constexpr bool is_quantized(const BBox& b) {
  return b.x0 % kQuantStep == 0 && b.y0 % kQuantStep == 0 && b.x1 % kQuantStep == 0 &&
         b.y1 % kQuantStep == 0;
}

// 3x3 canvas grid, enumerated in reading order.
enum class GridRegion : int {
  kTopLeft = 0,
  kTop,
  kTopRight,
  kLeft,
  kCenter,
  kRight,
  kBottomLeft,
  kBottom,
  kBottomRight,
};

inline constexpr std::array<std::string_view, 9> kGridRegionNames = {
    "top-left", "top",         "top-right", "left",        "center",
    "right",    "bottom-left", "bottom",    "bottom-right"};

constexpr std::string_view to_string(GridRegion r) {
  return kGridRegionNames[static_cast<int>(r)];
}

inline GridRegion assign_grid_region_at(double cx, double cy, CanvasSize canvas) {
  const int col = std::clamp(static_cast<int>(std::floor(3.0 * cx / canvas.width)), 0, 2);
  const int row = std::clamp(static_cast<int>(std::floor(3.0 * cy / canvas.height)), 0, 2);
  return static_cast<GridRegion>(row * 3 + col);
}

inline GridRegion assign_grid_region(const BBox& b, CanvasSize canvas) {
  return assign_grid_region_at(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1), canvas);
}

// ---------------------------------------------------------------------------
// Overlap-minimizing placement
// ---------------------------------------------------------------------------

struct Position {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(const Position&, const Position&) = default;
};

enum class CandidateMode {
  kSampled,     // up to max_candidates uniform draws, duplicates allowed
  kExhaustive,  // every integer position, row-major
};

struct PlacementProblem {
  int layer_width = 0;
  int layer_height = 0;
  std::vector<BBox> occupied;
  CanvasSize canvas;
  int max_candidates = 300;
  CandidateMode mode = CandidateMode::kSampled;
};

struct PlacementResult {
  Position position;
  // Sum over occupied boxes of the intersection area with the placed box.
  std::int64_t overlap_area = 0;
  // overlap_area / area(placed box)
  double overlap_score = 0.0;
  int candidates_evaluated = 0;

  BBox box(int w, int h) const { return {position.x, position.y, position.x + w, position.y + h}; }
};

inline std::int64_t total_overlap(const BBox& candidate, std::span<const BBox> occupied) {
  std::int64_t sum = 0;
  for (const auto& b : occupied) sum += intersect_area(candidate, b);
  return sum;
}

inline double overlap_ratio(const BBox& candidate, std::span<const BBox> occupied) {
  return static_cast<double>(total_overlap(candidate, occupied)) /
         static_cast<double>(area(candidate));
}

namespace detail {
inline void check_fits(const PlacementProblem& p) {
  if (p.layer_width <= 0 || p.layer_height <= 0)
    throw Error("place_layer: degenerate layer size");
  if (p.layer_width > p.canvas.width || p.layer_height > p.canvas.height)
    throw Error("place_layer: layer " + std::to_string(p.layer_width) + "x" +
                std::to_string(p.layer_height) + " does not fit canvas " +
                std::to_string(p.canvas.width) + "x" + std::to_string(p.canvas.height));
}
}  // namespace detail

// Scans candidates in order, stopping at the first zero-overlap one; otherwise
// the first candidate reaching the minimum wins.
inline PlacementResult place_among(const PlacementProblem& p, std::span<const Position> candidates) {
  detail::check_fits(p);
  if (candidates.empty()) throw Error("place_layer: empty candidate set");
  PlacementResult best;
  best.overlap_area = std::numeric_limits<std::int64_t>::max();
  const std::int64_t layer_area = static_cast<std::int64_t>(p.layer_width) * p.layer_height;
  int n = 0;
  for (const auto& c : candidates) {
    ++n;
    const BBox box{c.x, c.y, c.x + p.layer_width, c.y + p.layer_height};
    const auto ov = total_overlap(box, p.occupied);
    if (ov < best.overlap_area) {
      best.position = c;
      best.overlap_area = ov;
    }
    if (ov == 0) break;
  }
  best.candidates_evaluated = n;
  best.overlap_score = static_cast<double>(best.overlap_area) / static_cast<double>(layer_area);
  return best;
}

// Draws a single candidate uniformly from [0, W-w] x [0, H-h].
template <class URBG>
Position sample_position(const PlacementProblem& p, URBG& rng) {
  std::uniform_int_distribution<int> xs(0, p.canvas.width - p.layer_width);
  std::uniform_int_distribution<int> ys(0, p.canvas.height - p.layer_height);
  const int x = xs(rng);
  const int y = ys(rng);
  return {x, y};
}

inline std::vector<Position> enumerate_positions(const PlacementProblem& p) {
  std::vector<Position> out;
  out.reserve(static_cast<std::size_t>(p.canvas.width - p.layer_width + 1) *
              (p.canvas.height - p.layer_height + 1));
  for (int y = 0; y <= p.canvas.height - p.layer_height; ++y)
    for (int x = 0; x <= p.canvas.width - p.layer_width; ++x) out.push_back({x, y});
  return out;
}

// Candidates are drawn lazily so that an early zero-overlap hit consumes
// fewer random numbers. If `trace` is non-null, every evaluated candidate is
// appended to it.
template <class URBG>
PlacementResult place_layer(const PlacementProblem& p, URBG& rng,
                            std::vector<Position>* trace = nullptr) {
  detail::check_fits(p);
  if (p.mode == CandidateMode::kExhaustive) {
    auto all = enumerate_positions(p);
    auto r = place_among(p, all);
    if (trace) trace->assign(all.begin(), all.begin() + r.candidates_evaluated);
    return r;
  }
  if (p.max_candidates <= 0) throw Error("place_layer: max_candidates must be positive");
  PlacementResult best;
  best.overlap_area = std::numeric_limits<std::int64_t>::max();
  int n = 0;
  for (; n < p.max_candidates;) {
    const Position c = sample_position(p, rng);
    ++n;
    if (trace) trace->push_back(c);
    const BBox box{c.x, c.y, c.x + p.layer_width, c.y + p.layer_height};
    const auto ov = total_overlap(box, p.occupied);
    if (ov < best.overlap_area) {
      best.position = c;
      best.overlap_area = ov;
    }
    if (ov == 0) break;
  }
  best.candidates_evaluated = n;
  best.overlap_score = static_cast<double>(best.overlap_area) /
                       (static_cast<double>(p.layer_width) * p.layer_height);
  return best;
}

}  // namespace layerforge
