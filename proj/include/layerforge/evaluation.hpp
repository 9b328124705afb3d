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
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "layerforge/image.hpp"
#include "layerforge/metrics.hpp"
#include "layerforge/png_io.hpp"
#include "layerforge/serialization.hpp"

namespace layerforge {

// ---------------------------------------------------------------------------
// Box evaluation (detector predictions vs ground-truth layer boxes)
// ---------------------------------------------------------------------------

struct BoxSample {
  std::string id;
  std::vector<BBox> boxes;
};

// Reads lines of the form {"id": "...", "boxes": [[x0,y0,x1,y1], ...]}.
inline std::vector<BoxSample> read_box_jsonl(const std::filesystem::path& path) {
  std::vector<BoxSample> out;
  std::set<std::string> seen;
  int lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const auto j = Json::parse(line);
      BoxSample s;
      s.id = j.at("id").get<std::string>();
      for (const auto& b : j.at("boxes")) {
        auto box = box_from_json(b);
        if (!box.valid()) throw Error("degenerate box");
        s.boxes.push_back(box);
      }
      if (!seen.insert(s.id).second) throw Error("duplicate id '" + s.id + "'");
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct BoxSampleRow {
  std::string id;
  DetectionCounts counts;
  double ap50 = 0.0, ap75 = 0.0, map = 0.0;
  bool ap_flagged = false;
};

struct BoxEvalReport {
  CanvasSize canvas;
  DetectionCounts counts;  // pooled at IoU 0.50
  PrfScores prf;
  double ap50 = 0.0, ap75 = 0.0, map = 0.0;  // means over samples
  LocalizationStats localization;             // pooled over matched pairs at IoU 0.50
  std::vector<BoxSampleRow> rows;
  std::vector<std::string> flags;
};

inline constexpr double kStrictIou = 0.50;

// Ground truth drives the sample set; predictions without a ground-truth
// entry are reported as flags and otherwise ignored.
inline BoxEvalReport evaluate_boxes(const std::vector<BoxSample>& pred, const std::vector<BoxSample>& gt,
                                    CanvasSize canvas) {
  BoxEvalReport r;
  r.canvas = canvas;
  std::map<std::string, const BoxSample*> by_id;
  for (const auto& p : pred) by_id[p.id] = &p;
  std::set<std::string> gt_ids;
  LocalizationAccumulator loc;
  static const std::vector<BBox> kNone;
  for (const auto& g : gt) {
    gt_ids.insert(g.id);
    const auto it = by_id.find(g.id);
    const auto& pb = it == by_id.end() ? kNone : it->second->boxes;
    if (it == by_id.end()) r.flags.push_back("no prediction for '" + g.id + "'");
    const auto m = match_boxes(pb, g.boxes, kStrictIou);
    BoxSampleRow row;
    row.id = g.id;
    row.counts = counts_from(m);
    r.counts += row.counts;
    for (const auto& pr : m.pairs) loc.add(pb[pr.pred], g.boxes[pr.gt], canvas);
    const auto a50 = average_precision(pb, g.boxes, 0.50);
    const auto a75 = average_precision(pb, g.boxes, 0.75);
    const auto am = mean_ap(pb, g.boxes);
    row.ap50 = a50.value;
    row.ap75 = a75.value;
    row.map = am.value;
    row.ap_flagged = a50.flagged || a75.flagged || am.flagged;
    if (row.ap_flagged) r.flags.push_back("AP undefined for '" + g.id + "' (no ground truth)");
    r.rows.push_back(row);
  }
  for (const auto& p : pred)
    if (!gt_ids.count(p.id)) r.flags.push_back("prediction '" + p.id + "' has no ground truth");
  r.prf = detection_prf(r.counts);
  if (r.prf.precision_undefined) r.flags.push_back("precision undefined: no predictions");
  if (r.prf.recall_undefined) r.flags.push_back("recall undefined: no ground-truth boxes");
  if (!r.rows.empty()) {
    for (const auto& row : r.rows) {
      r.ap50 += row.ap50;
      r.ap75 += row.ap75;
      r.map += row.map;
    }
    const double n = static_cast<double>(r.rows.size());
    r.ap50 /= n;
    r.ap75 /= n;
    r.map /= n;
  }
  r.localization = loc.stats();
  if (r.localization.empty) r.flags.push_back("no matched pairs: localization undefined");
  return r;
}

inline Json to_json(const BoxEvalReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"id", row.id},
                    {"tp", row.counts.tp},
                    {"fp", row.counts.fp},
                    {"fn", row.counts.fn},
                    {"ap50", row.ap50},
                    {"ap75", row.ap75},
                    {"map", row.map},
                    {"ap_flagged", row.ap_flagged}});
  return {{"canvas", Json::array({r.canvas.width, r.canvas.height})},
          {"strict", {{"tp", r.counts.tp},
                      {"fp", r.counts.fp},
                      {"fn", r.counts.fn},
                      {"precision", r.prf.precision},
                      {"recall", r.prf.recall},
                      {"f1", r.prf.f1}}},
          {"ap", {{"ap50", r.ap50}, {"ap75", r.ap75}, {"map_50_95", r.map}}},
          {"matched", {{"pairs", r.localization.pairs},
                       {"miou", r.localization.mean_iou},
                       {"mgiou", r.localization.mean_giou},
                       {"center_px", r.localization.center_px},
                       {"center_norm", r.localization.center_norm}}},
          {"samples", std::move(rows)},
          {"flags", r.flags}};
}

inline std::string format_table(const BoxEvalReport& r) {
  auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v * 100.0 << "%";
    return s.str();
  };
  auto num = [](double v, int prec) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
  };
  std::ostringstream o;
  o << "Strict object discovery (TP " << r.counts.tp << ", FP " << r.counts.fp << ", FN "
    << r.counts.fn << ")\n";
  o << "  Precision@0.50  " << pct(r.prf.precision) << "\n";
  o << "  Recall@0.50     " << pct(r.prf.recall) << "\n";
  o << "  F1@0.50         " << pct(r.prf.f1) << "\n";
  o << "Detection-style AP/mAP (uniform scores)\n";
  o << "  AP@0.50         " << pct(r.ap50) << "\n";
  o << "  AP@0.75         " << pct(r.ap75) << "\n";
  o << "  mAP@[0.50:0.95] " << pct(r.map) << "\n";
  o << "Matched-box localization (" << r.localization.pairs << " pairs)\n";
  o << "  Matched mIoU    " << num(r.localization.mean_iou, 4) << "\n";
  o << "  Matched mGIoU   " << num(r.localization.mean_giou, 4) << "\n";
  o << "  Center (px)     " << num(r.localization.center_px, 2) << "\n";
  o << "  Center (norm)   " << num(r.localization.center_norm, 4) << "\n";
  for (const auto& f : r.flags) o << "flag: " << f << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Reconstruction evaluation over paired sample directories
// ---------------------------------------------------------------------------

struct ReconSampleRow {
  std::string id;
  int layer_count = 0;
  double layer_psnr = 0.0, layer_ssim = 0.0;
  double composite_psnr = 0.0, composite_ssim = 0.0;
  MaskScores mask;
  std::vector<std::string> flags;
};

struct ReconAggregate {
  std::size_t samples = 0;
  double layer_psnr = 0.0, layer_ssim = 0.0;
  double composite_psnr = 0.0, composite_ssim = 0.0;
  MaskScores mask;
};

struct ReconBinRow {
  CountBin bin;
  ReconAggregate agg;
};

struct ReconEvalReport {
  std::vector<ReconSampleRow> rows;
  ReconAggregate aggregate;
  std::vector<ReconBinRow> bins;
  std::vector<std::string> unpaired;
  std::map<std::string, std::string> failed;
};

namespace detail {

inline std::filesystem::path samples_root(const std::filesystem::path& root) {
  return std::filesystem::is_directory(root / "samples") ? root / "samples" : root;
}

inline std::set<std::string> sample_ids(const std::filesystem::path& dir) {
  std::set<std::string> ids;
  for (const auto& d : std::filesystem::directory_iterator(dir))
    if (d.is_directory()) ids.insert(d.path().filename().string());
  return ids;
}

// layer_<k>.png files sorted by k.
inline std::vector<std::filesystem::path> layer_files(const std::filesystem::path& dir) {
  static const std::regex re(R"(layer_(\d+)\.png)");
  std::vector<std::pair<int, std::filesystem::path>> found;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const auto name = f.path().filename().string();
    if (std::regex_match(name, m, re)) found.emplace_back(std::stoi(m[1].str()), f.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> out;
  for (auto& [_, p] : found) out.push_back(std::move(p));
  return out;
}

inline void accumulate(ReconAggregate& a, const ReconSampleRow& r) {
  ++a.samples;
  a.layer_psnr += r.layer_psnr;
  a.layer_ssim += r.layer_ssim;
  a.composite_psnr += r.composite_psnr;
  a.composite_ssim += r.composite_ssim;
  a.mask.iou += r.mask.iou;
  a.mask.precision += r.mask.precision;
  a.mask.recall += r.mask.recall;
  a.mask.f1 += r.mask.f1;
}

inline void finish(ReconAggregate& a) {
  if (a.samples == 0) return;
  const double n = static_cast<double>(a.samples);
  a.layer_psnr /= n;
  a.layer_ssim /= n;
  a.composite_psnr /= n;
  a.composite_ssim /= n;
  a.mask.iou /= n;
  a.mask.precision /= n;
  a.mask.recall /= n;
  a.mask.f1 /= n;
}

// SSIM for images smaller than the window is skipped and flagged.
inline std::optional<double> ssim_if_possible(const RgbaImage& a, const RgbaImage& b, int channels) {
  if (a.width() < 11 || a.height() < 11) return std::nullopt;
  return ssim(a, b, channels);
}

}  // namespace detail

// Layers are compared with 4 channels, composites with 3. Layer metrics are
// averaged within a sample, then samples are averaged.
inline ReconSampleRow evaluate_recon_sample(const std::string& id, const std::filesystem::path& pred_dir,
                                            const std::filesystem::path& gt_dir) {
  ReconSampleRow row;
  row.id = id;
  const auto gt_comp = read_png(gt_dir / "composite.png");
  const auto pred_comp = read_png(pred_dir / "composite.png");
  row.composite_psnr = psnr(pred_comp, gt_comp, 3);
  if (auto s = detail::ssim_if_possible(pred_comp, gt_comp, 3))
    row.composite_ssim = *s;
  else
    row.flags.push_back("composite smaller than SSIM window");

  const auto gt_layers = detail::layer_files(gt_dir);
  row.layer_count = static_cast<int>(gt_layers.size());
  if (gt_layers.empty()) {
    row.flags.push_back("no ground-truth layers");
    return row;
  }
  std::size_t ssim_n = 0;
  for (const auto& gp : gt_layers) {
    const auto pp = pred_dir / gp.filename();
    if (!std::filesystem::exists(pp))
      throw Error("missing predicted layer " + gp.filename().string());
    const auto g = read_png(gp);
    const auto p = read_png(pp);
    row.layer_psnr += psnr(p, g, 4);
    if (auto s = detail::ssim_if_possible(p, g, 4)) {
      row.layer_ssim += *s;
      ++ssim_n;
    }
    const auto m = mask_metrics(alpha_mask(p), alpha_mask(g));
    row.mask.iou += m.iou;
    row.mask.precision += m.precision;
    row.mask.recall += m.recall;
    row.mask.f1 += m.f1;
  }
  const double n = static_cast<double>(gt_layers.size());
  row.layer_psnr /= n;
  row.mask.iou /= n;
  row.mask.precision /= n;
  row.mask.recall /= n;
  row.mask.f1 /= n;
  if (ssim_n > 0) row.layer_ssim /= static_cast<double>(ssim_n);
  if (ssim_n < gt_layers.size()) row.flags.push_back("some layers smaller than SSIM window");
  return row;
}

inline ReconEvalReport evaluate_recon(const std::filesystem::path& pred_root,
                                      const std::filesystem::path& gt_root,
                                      const BinSet& bins = recon_bins()) {
  const auto pdir = detail::samples_root(pred_root);
  const auto gdir = detail::samples_root(gt_root);
  if (!std::filesystem::is_directory(pdir)) throw IoError("not a directory: " + pdir.string());
  if (!std::filesystem::is_directory(gdir)) throw IoError("not a directory: " + gdir.string());
  const auto pids = detail::sample_ids(pdir);
  const auto gids = detail::sample_ids(gdir);
  ReconEvalReport r;
  for (const auto& id : pids)
    if (!gids.count(id)) r.unpaired.push_back(id);
  for (const auto& id : gids) {
    if (!pids.count(id)) {
      r.unpaired.push_back(id);
      continue;
    }
    try {
      r.rows.push_back(evaluate_recon_sample(id, pdir / id, gdir / id));
    } catch (const std::exception& e) {
      r.failed[id] = e.what();
    }
  }
  std::sort(r.unpaired.begin(), r.unpaired.end());
  for (const auto& b : bins.bins) r.bins.push_back({b, {}});
  for (const auto& row : r.rows) {
    detail::accumulate(r.aggregate, row);
    for (auto& br : r.bins)
      if (row.layer_count >= br.bin.lo && row.layer_count <= br.bin.hi) detail::accumulate(br.agg, row);
  }
  detail::finish(r.aggregate);
  for (auto& br : r.bins) detail::finish(br.agg);
  return r;
}

inline Json to_json(const ReconAggregate& a) {
  return {{"samples", a.samples},
          {"layer_psnr", a.layer_psnr},
          {"layer_ssim", a.layer_ssim},
          {"composite_psnr", a.composite_psnr},
          {"composite_ssim", a.composite_ssim},
          {"mask_iou", a.mask.iou},
          {"mask_precision", a.mask.precision},
          {"mask_recall", a.mask.recall},
          {"mask_f1", a.mask.f1}};
}

inline Json to_json(const ReconEvalReport& r) {
  Json rows = Json::array();
  for (const auto& s : r.rows)
    rows.push_back({{"id", s.id},
                    {"layer_count", s.layer_count},
                    {"layer_psnr", s.layer_psnr},
                    {"layer_ssim", s.layer_ssim},
                    {"composite_psnr", s.composite_psnr},
                    {"composite_ssim", s.composite_ssim},
                    {"mask_iou", s.mask.iou},
                    {"mask_precision", s.mask.precision},
                    {"mask_recall", s.mask.recall},
                    {"mask_f1", s.mask.f1},
                    {"flags", s.flags}});
  Json bins = Json::array();
  for (const auto& b : r.bins) bins.push_back({{"bin", b.bin.label()}, {"metrics", to_json(b.agg)}});
  return {{"aggregate", to_json(r.aggregate)},
          {"bins", std::move(bins)},
          {"samples", std::move(rows)},
          {"unpaired", r.unpaired},
          {"failed", r.failed}};
}

inline std::string recon_csv(const ReconEvalReport& r) {
  std::ostringstream o;
  o.precision(17);
  o << "id,layer_count,layer_psnr,layer_ssim,composite_psnr,composite_ssim,mask_iou,mask_precision,"
       "mask_recall,mask_f1\n";
  for (const auto& s : r.rows)
    o << s.id << ',' << s.layer_count << ',' << s.layer_psnr << ',' << s.layer_ssim << ','
      << s.composite_psnr << ',' << s.composite_ssim << ',' << s.mask.iou << ','
      << s.mask.precision << ',' << s.mask.recall << ',' << s.mask.f1 << '\n';
  return o.str();
}

}  // namespace layerforge
