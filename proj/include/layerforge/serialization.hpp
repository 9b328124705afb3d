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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "layerforge/assets.hpp"
#include "layerforge/captioning.hpp"
#include "layerforge/composer.hpp"
#include "layerforge/error.hpp"
#include "layerforge/geometry.hpp"
#include "layerforge/rng.hpp"

namespace layerforge {

using Json = nlohmann::json;

inline Json box_to_json(const BBox& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

inline BBox box_from_json(const Json& j) { return detail::parse_box(j); }

// ---------------------------------------------------------------------------
// Text file helpers. Everything is UTF-8 with LF line endings.
// ---------------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample manifest
// ---------------------------------------------------------------------------

struct ManifestLayer {
  int index = 0;
  SourceKind source = SourceKind::kBase;
  std::string asset_id;
  BBox box;
  BBox quantized_box;
  std::string caption;
  std::string image_path;
  double overlap_score = 0.0;

  friend bool operator==(const ManifestLayer&, const ManifestLayer&) = default;
};

struct SampleManifest {
  std::string sample_id;
  std::uint64_t seed = 0;
  std::string seed_mix{kSeedMixName};
  CanvasSize canvas;
  std::string composite_path;
  std::string background_path;
  std::string background_caption;
  std::string base_id;
  std::vector<ManifestLayer> layers;
  std::string raw_caption;
  std::optional<std::string> refined_caption;
  std::vector<std::string> flags;

  // Refined caption when present, raw draft otherwise.
  const std::string& caption() const { return refined_caption ? *refined_caption : raw_caption; }

  friend bool operator==(const SampleManifest&, const SampleManifest&) = default;
};

inline std::string sample_dir_rel(const std::string& sample_id) { return "samples/" + sample_id; }

inline SampleManifest make_manifest(const SampleDraft& draft, const CaptionDraft& caption) {
  SampleManifest m;
  m.sample_id = draft.sample_id;
  m.seed = draft.seed;
  m.canvas = draft.canvas;
  const auto dir = sample_dir_rel(draft.sample_id);
  m.composite_path = dir + "/composite.png";
  m.background_path = dir + "/background.png";
  m.background_caption = draft.background_caption;
  m.base_id = draft.base_id;
  for (std::size_t i = 0; i < draft.layers.size(); ++i) {
    const auto& l = draft.layers[i];
    ManifestLayer ml;
    ml.index = static_cast<int>(i);
    ml.source = l.source;
    ml.asset_id = l.asset_id;
    ml.box = l.placed_box;
    ml.quantized_box = l.quantized_box;
    ml.caption = l.caption;
    ml.image_path = dir + "/layer_" + std::to_string(i) + ".png";
    ml.overlap_score = l.overlap_score;
    m.layers.push_back(std::move(ml));
  }
  m.raw_caption = caption.raw;
  m.refined_caption = caption.refined;
  m.flags = draft.flags;
  return m;
}

inline Json to_json(const SampleManifest& m) {
  Json layers = Json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"index", l.index},
                      {"source", std::string(to_string(l.source))},
                      {"asset_id", l.asset_id},
                      {"box", box_to_json(l.box)},
                      {"quantized_box", box_to_json(l.quantized_box)},
                      {"caption", l.caption},
                      {"image_path", l.image_path},
                      {"overlap_score", l.overlap_score}});
  }
  Json j = {{"sample_id", m.sample_id},
            {"seed", m.seed},
            {"seed_mix", m.seed_mix},
            {"canvas", Json::array({m.canvas.width, m.canvas.height})},
            {"composite_path", m.composite_path},
            {"background_path", m.background_path},
            {"background_caption", m.background_caption},
            {"base_id", m.base_id},
            {"layers", std::move(layers)},
            {"raw_caption", m.raw_caption},
            {"refined_caption", m.refined_caption ? Json(*m.refined_caption) : Json(nullptr)},
            {"flags", m.flags}};
  return j;
}

inline SampleManifest manifest_from_json(const Json& j) {
  SampleManifest m;
  m.sample_id = j.at("sample_id").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.seed_mix = j.at("seed_mix").get<std::string>();
  m.canvas = {j.at("canvas").at(0).get<int>(), j.at("canvas").at(1).get<int>()};
  m.composite_path = j.at("composite_path").get<std::string>();
  m.background_path = j.at("background_path").get<std::string>();
  m.background_caption = j.at("background_caption").get<std::string>();
  m.base_id = j.at("base_id").get<std::string>();
  for (const auto& lj : j.at("layers")) {
    ManifestLayer l;
    l.index = lj.at("index").get<int>();
    const auto kind = parse_source_kind(lj.at("source").get<std::string>());
    if (!kind) throw Error("manifest: unknown layer source");
    l.source = *kind;
    l.asset_id = lj.at("asset_id").get<std::string>();
    l.box = box_from_json(lj.at("box"));
    l.quantized_box = box_from_json(lj.at("quantized_box"));
    l.caption = lj.at("caption").get<std::string>();
    l.image_path = lj.at("image_path").get<std::string>();
    l.overlap_score = lj.at("overlap_score").get<double>();
    m.layers.push_back(std::move(l));
  }
  m.raw_caption = j.at("raw_caption").get<std::string>();
  if (!j.at("refined_caption").is_null()) m.refined_caption = j["refined_caption"].get<std::string>();
  m.flags = j.at("flags").get<std::vector<std::string>>();
  return m;
}

// Keys are emitted sorted, so equal manifests always produce equal bytes.
inline std::string manifest_to_string(const SampleManifest& m) { return to_json(m).dump(2) + "\n"; }

inline std::filesystem::path manifest_path(const std::filesystem::path& root,
                                           const std::string& sample_id) {
  return root / sample_dir_rel(sample_id) / "manifest.json";
}

inline std::filesystem::path write_manifest(const SampleManifest& m, const std::filesystem::path& root) {
  const auto path = manifest_path(root, m.sample_id);
  std::filesystem::create_directories(path.parent_path());
  write_text_file(path, manifest_to_string(m));
  return path;
}

inline SampleManifest read_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(Json::parse(read_text_file(path)));
  } catch (const Json::exception& e) {
    throw Error("malformed manifest " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Detector instruction pairs
// ---------------------------------------------------------------------------

inline std::string detector_instruction(CanvasSize canvas) {
  return "<image> This image is " + std::to_string(canvas.width) + " pixels in width and " +
         std::to_string(canvas.height) +
         " pixels in height. First describe the whole image in one detailed caption "
         "(whole_caption). Then list the bounding box for each visible layer or object in the "
         "image. Each box is in the format [x0, y0, x1, y1]. Output a single JSON object with "
         "exactly two keys: \"whole_caption\" and \"boxes\". Output only this JSON, no other text "
         "or markdown.";
}

struct DetectorTarget {
  std::string whole_caption;
  std::vector<BBox> boxes;
  friend bool operator==(const DetectorTarget&, const DetectorTarget&) = default;
};

struct DetectorPair {
  std::string image_path;
  std::string instruction;
  DetectorTarget target;
};

inline Json to_json(const DetectorTarget& t) {
  Json boxes = Json::array();
  for (const auto& b : t.boxes) boxes.push_back(box_to_json(b));
  return {{"whole_caption", t.whole_caption}, {"boxes", std::move(boxes)}};
}

inline Json to_json(const DetectorPair& p) {
  return {{"image", p.image_path}, {"instruction", p.instruction}, {"target", to_json(p.target)}};
}

// Foreground boxes only, in z-order; full-canvas composite and background
// boxes are implied and never part of the target.
inline DetectorPair build_detector_pair(const SampleManifest& m) {
  DetectorPair p;
  p.image_path = m.composite_path;
  p.instruction = detector_instruction(m.canvas);
  p.target.whole_caption = m.caption();
  std::vector<const ManifestLayer*> order;
  for (const auto& l : m.layers) order.push_back(&l);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->index < b->index; });
  for (const auto* l : order) p.target.boxes.push_back(l->box);
  return p;
}

// ---------------------------------------------------------------------------
// Detector output parsing
// ---------------------------------------------------------------------------

class DetectorParseError : public Error {
 public:
  DetectorParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

struct DetectorOutput {
  std::string caption;
  std::vector<BBox> boxes;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline std::string strip_code_fence(const std::string& s) {
  std::string t = trim(s);
  if (t.rfind("```", 0) != 0) return t;
  const auto nl = t.find('\n');
  t = nl == std::string::npos ? t.substr(3) : t.substr(nl + 1);
  t = trim(t);
  if (t.size() >= 3 && t.compare(t.size() - 3, 3, "```") == 0) t = trim(t.substr(0, t.size() - 3));
  return t;
}

inline std::string remove_trailing_commas(const std::string& s) {
  static const std::regex re(R"(,\s*([\]}]))");
  return std::regex_replace(s, re, "$1");
}

inline std::optional<Json> try_parse(const std::string& s) {
  auto j = Json::parse(s, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

}  // namespace detail

// Repairs are limited to: code-fence stripping, trailing-comma removal, and
// single-to-double quote normalization (only when the text has no double
// quotes at all). Boxes are rounded, clamped to the canvas, and dropped if
// they end up degenerate.
inline DetectorOutput parse_detector_output(const std::string& raw, CanvasSize canvas) {
  DetectorOutput out;
  std::string text = detail::strip_code_fence(raw);
  auto parsed = detail::try_parse(text);
  if (!parsed) {
    text = detail::remove_trailing_commas(text);
    parsed = detail::try_parse(text);
    if (parsed) out.diagnostics.push_back("repaired trailing commas");
  }
  if (!parsed && text.find('"') == std::string::npos) {
    std::replace(text.begin(), text.end(), '\'', '"');
    parsed = detail::try_parse(text);
    if (parsed) out.diagnostics.push_back("normalized single quotes");
  }
  if (!parsed) throw DetectorParseError("detector output is not valid JSON", raw);
  const Json& j = *parsed;
  if (!j.is_object()) throw DetectorParseError("detector output is not a JSON object", raw);
  if (!j.contains("whole_caption") || !j["whole_caption"].is_string())
    throw DetectorParseError("detector output lacks a string 'whole_caption'", raw);
  if (!j.contains("boxes") || !j["boxes"].is_array())
    throw DetectorParseError("detector output lacks a 'boxes' array", raw);
  for (const auto& [key, _] : j.items())
    if (key != "whole_caption" && key != "boxes") out.diagnostics.push_back("ignored key '" + key + "'");
  out.caption = j["whole_caption"].get<std::string>();
  int i = 0;
  for (const auto& bj : j["boxes"]) {
    const int idx = i++;
    if (!bj.is_array() || bj.size() != 4 ||
        !std::all_of(bj.begin(), bj.end(), [](const Json& v) { return v.is_number(); })) {
      out.diagnostics.push_back("box " + std::to_string(idx) + " dropped: not 4 numbers");
      continue;
    }
    auto coord = [&](int k, int hi) {
      const double v = bj[k].get<double>();
      return static_cast<int>(std::clamp(std::llround(v), 0LL, static_cast<long long>(hi)));
    };
    BBox b{coord(0, canvas.width), coord(1, canvas.height), coord(2, canvas.width),
           coord(3, canvas.height)};
    if (!b.valid()) {
      out.diagnostics.push_back("box " + std::to_string(idx) + " dropped: degenerate after clamping");
      continue;
    }
    out.boxes.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decomposition inference input
// ---------------------------------------------------------------------------

struct InferenceInput {
  std::string image_path;
  std::string caption;
  // Composite box, background box, then quantized foreground boxes.
  std::vector<BBox> boxes;
};

inline InferenceInput build_inference_input(std::string image_path, std::string caption,
                                            const std::vector<BBox>& foreground, CanvasSize canvas) {
  InferenceInput in;
  in.image_path = std::move(image_path);
  in.caption = std::move(caption);
  in.boxes.push_back(full_canvas_box(canvas));
  in.boxes.push_back(full_canvas_box(canvas));
  for (const auto& b : foreground) {
    if (!b.valid() || !box_within(b, canvas))
      throw Error("build_inference_input: foreground box outside canvas");
    in.boxes.push_back(quantize_box(b, canvas));
  }
  return in;
}

inline Json to_json(const InferenceInput& in) {
  Json boxes = Json::array();
  for (const auto& b : in.boxes) boxes.push_back(box_to_json(b));
  return {{"image", in.image_path}, {"caption", in.caption}, {"boxes", std::move(boxes)}};
}

// ---------------------------------------------------------------------------
// Dataset index
// ---------------------------------------------------------------------------

inline constexpr std::string_view kIndexFile = "index.jsonl";

struct IndexEntry {
  std::string id;
  bool ok = true;
  std::uint64_t seed = 0;
  int layer_count = 0;
  std::string composite;
  std::string manifest;
  std::vector<std::string> flags;
  std::string error;
};

inline Json to_json(const IndexEntry& e) {
  if (!e.ok) return {{"id", e.id}, {"status", "failed"}, {"error", e.error}};
  return {{"id", e.id},
          {"status", "ok"},
          {"seed", e.seed},
          {"layer_count", e.layer_count},
          {"composite", e.composite},
          {"manifest", e.manifest},
          {"flags", e.flags}};
}

inline IndexEntry index_entry_from_json(const Json& j) {
  IndexEntry e;
  e.id = j.at("id").get<std::string>();
  const auto status = j.at("status").get<std::string>();
  if (status == "failed") {
    e.ok = false;
    e.error = j.value("error", std::string{});
    return e;
  }
  if (status != "ok") throw Error("index entry has unknown status '" + status + "'");
  e.seed = j.value("seed", std::uint64_t{0});
  e.layer_count = j.at("layer_count").get<int>();
  e.composite = j.value("composite", std::string{});
  e.manifest = j.value("manifest", std::string{});
  e.flags = j.value("flags", std::vector<std::string>{});
  return e;
}

inline IndexEntry summarize(const SampleManifest& m) {
  IndexEntry e;
  e.id = m.sample_id;
  e.seed = m.seed;
  e.layer_count = static_cast<int>(m.layers.size());
  e.composite = m.composite_path;
  e.manifest = sample_dir_rel(m.sample_id) + "/manifest.json";
  e.flags = m.flags;
  return e;
}

// One line per sample id, ascending. Ids are the union of [0, count) (when
// given) and the sample directories present. A sample without a readable
// manifest becomes a failed entry, using `failures` for the reason if known.
inline std::filesystem::path build_index(const std::filesystem::path& root,
                                         std::optional<std::uint64_t> count = std::nullopt,
                                         const std::map<std::string, std::string>& failures = {}) {
  namespace fs = std::filesystem;
  std::vector<std::string> ids;
  if (count)
    for (std::uint64_t i = 0; i < *count; ++i) ids.push_back(format_sample_id(i));
  if (fs::is_directory(root / "samples"))
    for (const auto& d : fs::directory_iterator(root / "samples"))
      if (d.is_directory()) ids.push_back(d.path().filename().string());
  for (const auto& [id, _] : failures) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<Json> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    IndexEntry e;
    e.id = id;
    const auto mpath = manifest_path(root, id);
    if (auto it = failures.find(id); it != failures.end()) {
      e.ok = false;
      e.error = it->second;
    } else if (!fs::exists(mpath)) {
      e.ok = false;
      e.error = "missing manifest";
    } else {
      try {
        e = summarize(read_manifest(mpath));
      } catch (const std::exception& ex) {
        e.ok = false;
        e.error = ex.what();
      }
    }
    rows.push_back(to_json(e));
  }
  const auto path = root / kIndexFile;
  write_text_file(path, to_jsonl(rows));
  return path;
}

inline std::vector<IndexEntry> read_index(const std::filesystem::path& path) {
  std::vector<IndexEntry> out;
  int lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(index_entry_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace layerforge
