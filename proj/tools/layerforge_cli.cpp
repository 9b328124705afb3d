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
// layerforge command-line interface.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <atomic>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "layerforge/layerforge.hpp"
#include "layerforge/refiner.hpp"

namespace fs = std::filesystem;
namespace lf = layerforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

lf::CanvasSize parse_canvas(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    lf::CanvasSize c{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    if (c.width <= 0 || c.height <= 0) throw std::invalid_argument("non-positive");
    return c;
  } catch (const std::exception&) {
    throw lf::ConfigError("canvas must look like 1024x1024, got '" + s + "'");
  }
}

std::string percent(double v, int decimals) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(decimals) << v * 100.0 << "%";
  return o.str();
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::optional<std::uint64_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

int run_generate(const GenerateArgs& a) {
  lf::RunConfig rc;
  lf::AssetPools pools;
  try {
    rc = lf::load_run_config(a.config);
    if (a.count) rc.count = *a.count;
    if (a.seed) rc.composition.global_seed = *a.seed;
    if (a.workers) rc.workers = *a.workers;
    if (a.out) rc.out_dir = *a.out;
    if (rc.out_dir.empty()) throw lf::ConfigError("invalid config:\n  - no output directory (out_dir or --out)");
    if (rc.workers < 1) throw lf::ConfigError("invalid config:\n  - workers must be >= 1");
    std::vector<std::string> diags;
    pools = lf::load_pools(rc, &diags);
    for (const auto& d : diags) std::cerr << "warning: " << d << "\n";
  } catch (const lf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::cerr << "generating " << rc.count << " samples with " << rc.workers << " workers into "
            << rc.out_dir.string() << "\n";
  const std::uint64_t step = std::max<std::uint64_t>(1, rc.count / 20);
  lf::GenerationReport report;
  try {
    report = lf::generate_dataset(rc.composition, pools, rc.count, rc.workers, rc.out_dir,
                                  [&](std::uint64_t done, std::uint64_t total) {
                                    if (done % step == 0 || done == total)
                                      std::cerr << "  " << done << "/" << total << "\n";
                                  });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  for (const auto& [id, why] : report.failures) std::cerr << "failed sample " << id << ": " << why << "\n";
  std::cout << report.index_path.string() << "\n";
  if (!report.failures.empty()) {
    std::cerr << report.failures.size() << " of " << rc.count << " samples failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_stats(const std::string& index, const std::string& bins, bool json) {
  lf::BinSet set;
  try {
    if (bins == "table8")
      set = lf::dataset_bins();
    else if (bins == "fig6")
      set = lf::recon_bins();
    else
      set = lf::parse_bins(bins);
  } catch (const lf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<int> counts;
  try {
    for (const auto& e : lf::read_index(index))
      if (e.ok) counts.push_back(e.layer_count);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  const auto h = lf::layer_count_stats(counts, set);
  if (json) {
    lf::Json bins_j = lf::Json::array();
    for (std::size_t i = 0; i < h.bins.size(); ++i)
      bins_j.push_back({{"bin", h.bins[i].label()}, {"count", h.counts[i]}});
    lf::Json shares = lf::Json::object();
    for (const auto& [name, v] : h.shares) shares[name] = v;
    std::cout << lf::Json({{"total", h.total}, {"unbinned", h.unbinned}, {"bins", bins_j}, {"shares", shares}})
                     .dump(2)
              << "\n";
    return kExitOk;
  }
  std::cout << "Layer bin        Count\n";
  for (std::size_t i = 0; i < h.bins.size(); ++i)
    std::cout << std::left << std::setw(16) << h.bins[i].label() << " " << h.counts[i] << "\n";
  if (h.unbinned) std::cout << std::left << std::setw(16) << "outside bins" << " " << h.unbinned << "\n";
  std::cout << std::left << std::setw(16) << "total" << " " << h.total << "\n";
  for (const auto& [name, v] : h.shares)
    std::cout << std::left << std::setw(16) << name << " " << percent(v, 1) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_eval_boxes(const std::string& pred, const std::string& gt, const std::string& canvas_s,
                   const std::string& out, bool json) {
  lf::CanvasSize canvas;
  try {
    canvas = parse_canvas(canvas_s);
  } catch (const lf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const auto report = lf::evaluate_boxes(lf::read_box_jsonl(pred), lf::read_box_jsonl(gt), canvas);
    const auto j = lf::to_json(report);
    if (!out.empty()) lf::write_text_file(out, j.dump(2) + "\n");
    if (json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << lf::format_table(report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_eval_recon(const std::string& pred_dir, const std::string& gt_dir, const std::string& out,
                   const std::string& csv) {
  try {
    const auto r = lf::evaluate_recon(pred_dir, gt_dir);
    for (const auto& id : r.unpaired) std::cerr << "unpaired sample excluded: " << id << "\n";
    for (const auto& [id, why] : r.failed) std::cerr << "sample " << id << " flagged: " << why << "\n";
    const auto j = lf::to_json(r);
    if (!out.empty()) lf::write_text_file(out, j.dump(2) + "\n");
    if (!csv.empty()) lf::write_text_file(csv, lf::recon_csv(r));
    auto line = [](const std::string& name, const lf::ReconAggregate& a) {
      std::cout << std::left << std::setw(14) << name << std::fixed << std::setprecision(4)
                << " n=" << a.samples << "  layer PSNR " << a.layer_psnr << "  layer SSIM "
                << a.layer_ssim << "  comp PSNR " << a.composite_psnr << "  comp SSIM "
                << a.composite_ssim << "  mask IoU " << a.mask.iou << "  P " << a.mask.precision
                << "  R " << a.mask.recall << "  F1 " << a.mask.f1 << "\n";
    };
    line("all", r.aggregate);
    for (const auto& b : r.bins) line(b.bin.label(), b.agg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RefineArgs {
  std::string index;
  std::string endpoint;
  std::string model;
  bool fallback = false;
  int max_retries = 3;
  double timeout_s = 60.0;
  int concurrency = 4;
  std::string system_prompt_file;
};

int run_refine(const RefineArgs& a) {
  lf::RefinerConfig cfg;
  cfg.endpoint = a.endpoint;
  cfg.model = a.model;
  cfg.fallback = a.fallback;
  cfg.max_retries = a.max_retries;
  cfg.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000));
  cfg = lf::refiner_config_from_env(cfg);
  std::vector<lf::IndexEntry> entries;
  try {
    lf::validate(cfg);
    if (!a.system_prompt_file.empty()) cfg.system_prompt = lf::read_text_file(a.system_prompt_file);
    if (cfg.endpoint.empty() && !cfg.fallback)
      throw lf::ConfigError("no endpoint: pass --endpoint, set " + std::string(lf::kEndpointEnv) +
                            ", or use --fallback");
  } catch (const lf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    entries = lf::read_index(a.index);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  const fs::path root = fs::path(a.index).parent_path();

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::atomic<std::size_t> refined{0}, skipped{0};
  std::mutex mu;
  std::string failure;
  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      const auto i = next.fetch_add(1);
      if (i >= entries.size()) return;
      auto& e = entries[i];
      if (!e.ok) continue;
      try {
        const auto mpath = root / e.manifest;
        auto m = lf::read_manifest(mpath);
        if (m.refined_caption) {
          ++skipped;
          continue;
        }
        lf::CaptionDraft draft;
        draft.raw = m.raw_caption;
        const auto res = lf::refine_caption(cfg, lf::read_png(root / m.composite_path), draft);
        m.refined_caption = res.text;
        if (res.used_fallback) m.flags.push_back("refine_fallback");
        {
          std::lock_guard lock(mu);
          for (const auto& w : res.warnings) std::cerr << "sample " << m.sample_id << ": " << w << "\n";
          for (const auto& r : res.retries) std::cerr << "sample " << m.sample_id << ": retry, " << r << "\n";
        }
        lf::write_text_file(mpath, lf::manifest_to_string(m));
        e = lf::summarize(m);
        ++refined;
      } catch (const std::exception& ex) {
        std::lock_guard lock(mu);
        if (!failed.exchange(true)) failure = "sample " + e.id + ": " + ex.what();
        return;
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    for (int t = 1; t < std::max(1, a.concurrency); ++t) threads.emplace_back(work);
    work();
  }
  std::vector<lf::Json> rows;
  for (const auto& e : entries) rows.push_back(lf::to_json(e));
  try {
    lf::write_text_file(a.index, lf::to_jsonl(rows));
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << "refined " << refined.load() << ", already refined " << skipped.load() << "\n";
  if (failed.load()) {
    std::cerr << "error: " << failure << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_detector_pairs(const std::string& index, std::string out) {
  try {
    const fs::path root = fs::path(index).parent_path();
    if (out.empty()) out = (root / "detector_pairs.jsonl").string();
    std::vector<lf::Json> rows;
    for (const auto& e : lf::read_index(index)) {
      if (!e.ok) continue;
      rows.push_back(lf::to_json(lf::build_detector_pair(lf::read_manifest(root / e.manifest))));
    }
    lf::write_text_file(out, lf::to_jsonl(rows));
    std::cout << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// Input lines: {"image": path, "output": "<raw detector text>"}; the raw text
// may also be given inline as {"image", "whole_caption", "boxes"}.
int run_inference_inputs(const std::string& in, const std::string& canvas_s, std::string out) {
  lf::CanvasSize canvas;
  try {
    canvas = parse_canvas(canvas_s);
  } catch (const lf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    if (out.empty()) out = (fs::path(in).parent_path() / "inference_inputs.jsonl").string();
    std::vector<lf::Json> rows;
    int lineno = 0, bad = 0;
    for (const auto& line : lf::read_lines(in)) {
      ++lineno;
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        const auto j = lf::Json::parse(line);
        const auto image = j.at("image").get<std::string>();
        const std::string raw = j.contains("output") ? j["output"].get<std::string>()
                                                     : lf::Json({{"whole_caption", j.at("whole_caption")},
                                                                 {"boxes", j.at("boxes")}})
                                                           .dump();
        const auto parsed = lf::parse_detector_output(raw, canvas);
        for (const auto& d : parsed.diagnostics) std::cerr << in << ":" << lineno << ": " << d << "\n";
        rows.push_back(lf::to_json(lf::build_inference_input(image, parsed.caption, parsed.boxes, canvas)));
      } catch (const std::exception& e) {
        ++bad;
        std::cerr << in << ":" << lineno << ": skipped: " << e.what() << "\n";
      }
    }
    lf::write_text_file(out, lf::to_jsonl(rows));
    std::cout << out << "\n";
    if (bad) {
      std::cerr << bad << " lines could not be converted\n";
      return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layerforge: synthetic layered-design dataset engine"};
  app.require_subcommand(1);
  int rc = kExitOk;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a dataset from a JSON run config");
  generate->add_option("config", gen.config, "Run config (JSON)")->required();
  generate->add_option("--count", gen.count, "Number of samples");
  generate->add_option("--seed", gen.seed, "Global seed");
  generate->add_option("--workers", gen.workers, "Worker threads");
  generate->add_option("--out", gen.out, "Output directory");
  generate->callback([&] { rc = run_generate(gen); });

  std::string stats_index, stats_bins = "table8";
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Layer-count histogram of an index");
  stats->add_option("--index", stats_index, "index.jsonl")->required();
  stats->add_option("--bins", stats_bins, "table8, fig6, or a list such as 1-3,4-52");
  stats->add_flag("--json", stats_json, "Print JSON");
  stats->callback([&] { rc = run_stats(stats_index, stats_bins, stats_json); });

  std::string eb_pred, eb_gt, eb_canvas = "1024x1024", eb_out;
  bool eb_json = false;
  auto* eval_boxes = app.add_subcommand("eval-boxes", "Detection metrics for predicted layer boxes");
  eval_boxes->add_option("--pred", eb_pred, "Predicted boxes (jsonl)")->required();
  eval_boxes->add_option("--gt", eb_gt, "Ground-truth boxes (jsonl)")->required();
  eval_boxes->add_option("--canvas", eb_canvas, "Canvas as WxH");
  eval_boxes->add_option("--out", eb_out, "Write the JSON report here");
  eval_boxes->add_flag("--json", eb_json, "Print JSON instead of a table");
  eval_boxes->callback([&] { rc = run_eval_boxes(eb_pred, eb_gt, eb_canvas, eb_out, eb_json); });

  std::string er_pred, er_gt, er_out, er_csv;
  auto* eval_recon = app.add_subcommand("eval-recon", "Reconstruction metrics over paired sample trees");
  eval_recon->add_option("--pred-dir", er_pred, "Predicted samples")->required();
  eval_recon->add_option("--gt-dir", er_gt, "Ground-truth samples")->required();
  eval_recon->add_option("--out", er_out, "Write the JSON report here");
  eval_recon->add_option("--csv", er_csv, "Write per-sample rows as CSV");
  eval_recon->callback([&] { rc = run_eval_recon(er_pred, er_gt, er_out, er_csv); });

  RefineArgs ref;
  auto* refine = app.add_subcommand("refine", "Refine raw captions through a VLM endpoint");
  refine->add_option("--index", ref.index, "index.jsonl")->required();
  refine->add_option("--endpoint", ref.endpoint, "Chat endpoint URL (default: $LAYERFORGE_VLM_ENDPOINT)");
  refine->add_option("--model", ref.model, "Model name sent with each request");
  refine->add_flag("--fallback", ref.fallback, "Use the raw caption when the endpoint is unavailable");
  refine->add_option("--max-retries", ref.max_retries, "Retries per request");
  refine->add_option("--timeout", ref.timeout_s, "Request timeout in seconds");
  refine->add_option("--concurrency", ref.concurrency, "Requests in flight");
  refine->add_option("--system-prompt-file", ref.system_prompt_file, "Override the system prompt");
  refine->callback([&] { rc = run_refine(ref); });

  std::string dp_index, dp_out;
  auto* pairs = app.add_subcommand("detector-pairs", "Emit detector_pairs.jsonl from an index");
  pairs->add_option("--index", dp_index, "index.jsonl")->required();
  pairs->add_option("--out", dp_out, "Output path");
  pairs->callback([&] { rc = run_detector_pairs(dp_index, dp_out); });

  std::string ii_in, ii_canvas = "1024x1024", ii_out;
  auto* infer = app.add_subcommand("inference-inputs", "Emit inference_inputs.jsonl from detector outputs");
  infer->add_option("--detector-outputs", ii_in, "Detector outputs (jsonl)")->required();
  infer->add_option("--canvas", ii_canvas, "Canvas as WxH");
  infer->add_option("--out", ii_out, "Output path");
  infer->callback([&] { rc = run_inference_inputs(ii_in, ii_canvas, ii_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  return rc;
}
