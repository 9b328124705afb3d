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

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "layerforge/captioning.hpp"
#include "layerforge/composer.hpp"
#include "layerforge/png_io.hpp"
#include "layerforge/serialization.hpp"

namespace layerforge {

// Writes background, composite, per-layer crops and the manifest under
// <root>/samples/<id>/.
inline SampleManifest write_sample(const SampleDraft& draft, const CaptionDraft& caption,
                                   const std::filesystem::path& root) {
  auto m = make_manifest(draft, caption);
  std::filesystem::create_directories(root / sample_dir_rel(m.sample_id));
  write_png(root / m.background_path, draft.background);
  write_png(root / m.composite_path, draft.composite);
  for (std::size_t i = 0; i < draft.layers.size(); ++i)
    write_png(root / m.layers[i].image_path, draft.layers[i].image);
  write_manifest(m, root);
  return m;
}

struct GenerationReport {
  std::filesystem::path index_path;
  std::uint64_t generated = 0;
  std::map<std::string, std::string> failures;
};

// Thrown when output cannot be written; carries how far the run got.
class GenerationAborted : public IoError {
 public:
  GenerationAborted(const std::string& what, std::uint64_t written)
      : IoError(what + " (" + std::to_string(written) + " samples written before abort)"),
        written_(written) {}
  std::uint64_t written() const { return written_; }

 private:
  std::uint64_t written_;
};

using ProgressFn = std::function<void(std::uint64_t done, std::uint64_t total)>;

// Samples 0..count-1, each composed from its own seed. Workers pull ids from
// a shared counter; nothing about a sample depends on which worker ran it.
// A sample that fails to compose is recorded and skipped; a failed write
// aborts the run.
inline GenerationReport generate_dataset(const CompositionConfig& cfg, const AssetPools& pools,
                                         std::uint64_t count, int workers,
                                         const std::filesystem::path& out_dir,
                                         const ProgressFn& progress = {}) {
  namespace fs = std::filesystem;
  validate(cfg);
  if (!pools.base || pools.base->empty()) throw Error("generate_dataset: base pool is required");
  if (workers < 1) workers = 1;
  fs::create_directories(out_dir / "samples");

  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  GenerationReport report;
  std::string abort_reason;

  auto work = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::uint64_t id = next.fetch_add(1);
      if (id >= count) return;
      const auto sid = format_sample_id(id);
      std::error_code ec;
      fs::remove_all(out_dir / sample_dir_rel(sid), ec);
      SampleDraft draft;
      CaptionDraft caption;
      try {
        draft = compose_sample(pools, cfg, id);
        caption = draft_caption(draft);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        report.failures[sid] = e.what();
        continue;
      }
      try {
        write_sample(draft, caption, out_dir);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!abort.exchange(true)) abort_reason = "sample " + sid + ": " + e.what();
        return;
      }
      const auto d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(mu);
        progress(d, count);
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (abort.load()) throw GenerationAborted(abort_reason, done.load());
  report.generated = done.load();
  report.index_path = build_index(out_dir, count, report.failures);
  return report;
}

}  // namespace layerforge
