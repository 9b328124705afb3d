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
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "layerforge/error.hpp"
#include "layerforge/geometry.hpp"
#include "layerforge/image.hpp"

namespace layerforge {

// ---------------------------------------------------------------------------
// Box matching and strict detection metrics
// ---------------------------------------------------------------------------

struct MatchedPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> unmatched_pred;
  std::vector<std::size_t> unmatched_gt;
};

// Greedy one-to-one matching: all (pred, gt) pairs with IoU >= threshold,
// visited by descending IoU, ties broken by (pred index, gt index).
inline MatchResult match_boxes(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                               double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw Error("match_boxes: threshold must lie in (0, 1]");
  std::vector<MatchedPair> cands;
  for (std::size_t p = 0; p < pred.size(); ++p)
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double v = iou(pred[p], gt[g]);
      if (v >= iou_threshold) cands.push_back({p, g, v});
    }
  std::sort(cands.begin(), cands.end(), [](const MatchedPair& a, const MatchedPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return std::tie(a.pred, a.gt) < std::tie(b.pred, b.gt);
  });
  MatchResult r;
  std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
  for (const auto& c : cands) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    r.pairs.push_back(c);
  }
  for (std::size_t p = 0; p < pred.size(); ++p)
    if (!pred_used[p]) r.unmatched_pred.push_back(p);
  for (std::size_t g = 0; g < gt.size(); ++g)
    if (!gt_used[g]) r.unmatched_gt.push_back(g);
  return r;
}

struct DetectionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  DetectionCounts& operator+=(const DetectionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

inline DetectionCounts counts_from(const MatchResult& m) {
  return {m.pairs.size(), m.unmatched_pred.size(), m.unmatched_gt.size()};
}

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // tp + fp == 0
  bool recall_undefined = false;     // tp + fn == 0
};

inline PrfScores detection_prf(const DetectionCounts& c) {
  PrfScores s;
  if (c.tp + c.fp == 0)
    s.precision_undefined = true;
  else
    s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn == 0)
    s.recall_undefined = true;
  else
    s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  s.f1 = (s.precision + s.recall > 0.0) ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Average precision with uniform scores
// ---------------------------------------------------------------------------

struct ApResult {
  double value = 0.0;
  // Set when there is no ground truth, which makes recall undefined.
  bool flagged = false;
};

// Every prediction carries the same score, so the ranking is the input order
// (stable). TP/FP status comes from match_boxes at the threshold. The
// precision envelope is sampled at 101 recall points 0, 0.01, ..., 1.
inline ApResult average_precision(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                                  double iou_threshold) {
  if (gt.empty()) return {pred.empty() ? 1.0 : 0.0, true};
  if (pred.empty()) return {0.0, false};
  const auto m = match_boxes(pred, gt, iou_threshold);
  std::vector<bool> is_tp(pred.size(), false);
  for (const auto& p : m.pairs) is_tp[p.pred] = true;

  std::vector<double> precision(pred.size()), recall(pred.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (is_tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt.size());
  }
  for (std::size_t i = pred.size() - 1; i > 0; --i)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return {sum / 101.0, false};
}

// IoU thresholds 0.50, 0.55, ..., 0.95.
inline std::array<double, 10> coco_thresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[i] = (50 + 5 * i) / 100.0;
  return t;
}

inline ApResult mean_ap(const std::vector<BBox>& pred, const std::vector<BBox>& gt) {
  double sum = 0.0;
  bool flagged = false;
  for (double t : coco_thresholds()) {
    const auto ap = average_precision(pred, gt, t);
    sum += ap.value;
    flagged = flagged || ap.flagged;
  }
  return {sum / 10.0, flagged};
}

// ---------------------------------------------------------------------------
// Matched-box localization
// ---------------------------------------------------------------------------

struct LocalizationStats {
  double mean_iou = 0.0;
  double mean_giou = 0.0;
  double center_px = 0.0;
  double center_norm = 0.0;
  std::size_t pairs = 0;
  bool empty = true;
};

// Running sums so that several samples can be pooled before averaging.
struct LocalizationAccumulator {
  double iou_sum = 0.0, giou_sum = 0.0, px_sum = 0.0, norm_sum = 0.0;
  std::size_t n = 0;

  void add(const BBox& pred, const BBox& gt, CanvasSize canvas) {
    iou_sum += iou(pred, gt);
    giou_sum += giou(pred, gt);
    const auto cd = center_distance(pred, gt, canvas);
    px_sum += cd.pixels;
    norm_sum += cd.normalized;
    ++n;
  }

  LocalizationStats stats() const {
    if (n == 0) return {};
    const double d = static_cast<double>(n);
    return {iou_sum / d, giou_sum / d, px_sum / d, norm_sum / d, n, false};
  }
};

inline LocalizationStats matched_localization(const MatchResult& match, const std::vector<BBox>& pred,
                                              const std::vector<BBox>& gt, CanvasSize canvas) {
  LocalizationAccumulator acc;
  for (const auto& p : match.pairs) acc.add(pred.at(p.pred), gt.at(p.gt), canvas);
  return acc.stats();
}

// ---------------------------------------------------------------------------
// Mask metrics
// ---------------------------------------------------------------------------

struct MaskScores {
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Empty-vs-empty counts as a perfect match.
inline MaskScores mask_metrics(const PixelMask& pred, const PixelMask& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw Error("mask_metrics: dimension mismatch");
  std::uint64_t inter = 0, np = 0, ng = 0;
  const auto a = pred.bits();
  const auto b = gt.bits();
  for (std::size_t i = 0; i < a.size(); ++i) {
    np += a[i];
    ng += b[i];
    inter += a[i] & b[i];
  }
  if (np == 0 && ng == 0) return {1.0, 1.0, 1.0, 1.0};
  MaskScores s;
  const std::uint64_t uni = np + ng - inter;
  s.iou = static_cast<double>(inter) / static_cast<double>(uni);
  s.precision = np ? static_cast<double>(inter) / static_cast<double>(np) : 0.0;
  s.recall = ng ? static_cast<double>(inter) / static_cast<double>(ng) : 0.0;
  s.f1 = static_cast<double>(2 * inter) / static_cast<double>(np + ng);
  return s;
}

// ---------------------------------------------------------------------------
// Layer-count statistics
// ---------------------------------------------------------------------------

struct CountBin {
  int lo = 0;  // inclusive
  int hi = 0;  // inclusive
  std::string label() const { return std::to_string(lo) + " to " + std::to_string(hi); }
};

struct NamedShare {
  std::string name;
  int lo = 0;
  int hi = 0;
};

struct BinSet {
  std::vector<CountBin> bins;
  std::vector<NamedShare> shares;
};

inline BinSet dataset_bins() {
  return {{{1, 5}, {6, 10}, {11, 15}, {16, 20}, {21, 25}, {26, 52}},
          {{"6 to 15 share", 6, 15}, {"1 to 20 share", 1, 20}}};
}

inline BinSet recon_bins() { return {{{1, 7}, {8, 9}, {10, 12}, {13, 35}}, {}}; }

// Parses "1-3,4-52" style bin lists.
inline BinSet parse_bins(const std::string& spec) {
  BinSet set;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto tok = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto dash = tok.find('-');
    try {
      if (dash == std::string::npos) {
        const int v = std::stoi(tok);
        set.bins.push_back({v, v});
      } else {
        set.bins.push_back({std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1))});
      }
    } catch (const std::exception&) {
      throw ConfigError("malformed bin '" + tok + "' in '" + spec + "'");
    }
    if (set.bins.back().lo > set.bins.back().hi) throw ConfigError("bin '" + tok + "' is empty");
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  for (std::size_t i = 0; i < set.bins.size(); ++i)
    for (std::size_t j = i + 1; j < set.bins.size(); ++j)
      if (set.bins[i].lo <= set.bins[j].hi && set.bins[j].lo <= set.bins[i].hi)
        throw ConfigError("bins overlap in '" + spec + "'");
  return set;
}

struct LayerCountHistogram {
  std::vector<CountBin> bins;
  std::vector<std::uint64_t> counts;
  // Samples whose count falls outside every bin.
  std::uint64_t unbinned = 0;
  std::uint64_t total = 0;
  std::vector<std::pair<std::string, double>> shares;
};

inline LayerCountHistogram layer_count_stats(const std::vector<int>& layer_counts, const BinSet& set) {
  LayerCountHistogram h;
  h.bins = set.bins;
  h.counts.assign(set.bins.size(), 0);
  for (int c : layer_counts) {
    ++h.total;
    bool hit = false;
    for (std::size_t b = 0; b < set.bins.size(); ++b)
      if (c >= set.bins[b].lo && c <= set.bins[b].hi) {
        ++h.counts[b];
        hit = true;
        break;
      }
    if (!hit) ++h.unbinned;
  }
  for (const auto& s : set.shares) {
    std::uint64_t n = 0;
    for (int c : layer_counts)
      if (c >= s.lo && c <= s.hi) ++n;
    h.shares.emplace_back(s.name, h.total ? static_cast<double>(n) / static_cast<double>(h.total) : 0.0);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Caption judge aggregation
// ---------------------------------------------------------------------------

struct JudgeScores {
  double image_faithfulness = 1.0;
  double coverage = 1.0;
  double reference_alignment = 1.0;
  double text_accuracy = 1.0;
  double fluency = 1.0;
};

inline constexpr std::array<double, 5> kJudgeWeights = {0.35, 0.20, 0.20, 0.20, 0.05};

// Weighted mean of the five 1-5 criteria, mapped to 0-100 by /5*100.
inline double aggregate_judge(const JudgeScores& s,
                              const std::array<double, 5>& weights = kJudgeWeights) {
  const std::array<double, 5> v = {s.image_faithfulness, s.coverage, s.reference_alignment,
                                   s.text_accuracy, s.fluency};
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 1.0 && v[i] <= 5.0)) throw Error("aggregate_judge: score outside [1, 5]");
    sum += weights[i] * v[i];
  }
  return sum / 5.0 * 100.0;
}

}  // namespace layerforge
