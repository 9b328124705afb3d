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
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "layerforge/composer.hpp"

namespace lf = layerforge;
using lf::testing::TempDir;

namespace {

// Design of `n` opaque 10x10 foregrounds on a 64x64 background.
lf::AssetRecord make_design(const TempDir& dir, const std::string& id, int n, lf::SourceKind kind) {
  lf::AssetRecord rec{.id = id, .kind = kind, .image_path = dir / (id + "_bg.png"),
                      .caption = "bg of " + id, .native_size = {64, 64}};
  lf::write_png(rec.image_path, lf::RgbaImage(64, 64, lf::Rgba{0, 0, 0, 255}));
  for (int k = 0; k < n; ++k) {
    const auto path = dir / (id + "_" + std::to_string(k) + ".png");
    lf::write_png(path, lf::RgbaImage(10, 10, lf::Rgba{static_cast<std::uint8_t>(k * 40), 0, 0, 255}));
    rec.layers.push_back({path, {k * 10, k * 5, k * 10 + 10, k * 5 + 10}, "layer " + std::to_string(k)});
  }
  return rec;
}

lf::CompositionConfig small_config() {
  lf::CompositionConfig cfg;
  cfg.canvas = {64, 64};
  return cfg;
}

}  // namespace

TEST(BaseLayout, SingleForegroundAlwaysSurvives) {
  TempDir dir("composer");
  const auto base = make_design(dir, "b", 1, lf::SourceKind::kBase);
  auto cfg = small_config();
  for (int seed = 0; seed < 20; ++seed) {
    lf::Rng rng(seed);
    const auto d = lf::build_base_layout(base, cfg, rng);
    ASSERT_EQ(d.layers.size(), 1u);
    EXPECT_EQ(d.layers[0].placed_box, base.layers[0].box);
  }
}

TEST(BaseLayout, RemovalIsClamped) {
  TempDir dir("composer");
  auto cfg = small_config();
  cfg.remove_range = {4, 4};
  for (int n : {3, 5}) {
    const auto base = make_design(dir, "b" + std::to_string(n), n, lf::SourceKind::kBase);
    for (int seed = 0; seed < 20; ++seed) {
      lf::Rng rng(seed);
      EXPECT_EQ(lf::build_base_layout(base, cfg, rng).layers.size(), 1u) << n;
    }
  }
}

TEST(BaseLayout, KeepsBoxesAndOrder) {
  TempDir dir("composer");
  const auto base = make_design(dir, "b", 6, lf::SourceKind::kBase);
  auto cfg = small_config();
  std::map<std::size_t, int> retained_counts;
  for (int seed = 0; seed < 200; ++seed) {
    lf::Rng rng(seed);
    const auto d = lf::build_base_layout(base, cfg, rng);
    ++retained_counts[d.layers.size()];
    EXPECT_EQ(d.background.size(), cfg.canvas);
    int last = -1;
    for (const auto& l : d.layers) {
      const auto it = std::find_if(base.layers.begin(), base.layers.end(),
                                   [&](const auto& sl) { return sl.box == l.placed_box; });
      ASSERT_NE(it, base.layers.end());
      const int idx = static_cast<int>(it - base.layers.begin());
      EXPECT_GT(idx, last);
      last = idx;
      EXPECT_EQ(l.caption, it->caption);
    }
  }
  // N_remove uniform on {1..4}: 5, 4, 3 and 2 layers remain
  EXPECT_EQ(retained_counts.size(), 4u);
  EXPECT_EQ(retained_counts.begin()->first, 2u);
  EXPECT_EQ(retained_counts.rbegin()->first, 5u);
}

TEST(BaseLayout, ResamplesForeignCanvas) {
  TempDir dir("composer");
  const auto base = make_design(dir, "b", 2, lf::SourceKind::kBase);
  lf::CompositionConfig cfg;
  cfg.canvas = {128, 128};
  cfg.remove_range = {0, 0};
  lf::Rng rng(1);
  const auto d = lf::build_base_layout(base, cfg, rng);
  EXPECT_EQ(d.background.size(), cfg.canvas);
  ASSERT_EQ(d.layers.size(), 2u);
  EXPECT_EQ(d.layers[1].placed_box, (lf::BBox{20, 10, 40, 30}));
  EXPECT_EQ(d.layers[1].image.width(), 20);
}

TEST(Donors, ZeroLayersLeavesDraftUnchanged) {
  TempDir dir("composer");
  lf::AssetPools pools;
  pools.donor.emplace();
  pools.donor->records.push_back(make_design(dir, "d", 3, lf::SourceKind::kDonor));
  auto cfg = small_config();
  cfg.donor_layers_range = {0, 0};
  lf::SampleDraft d;
  d.canvas = cfg.canvas;
  lf::Rng rng(2);
  lf::add_donor_layers(d, pools, cfg, rng);
  EXPECT_TRUE(d.layers.empty());
}

TEST(Donors, SingleLayerOnEmptyCanvasHasNoOverlap) {
  TempDir dir("composer");
  lf::AssetRecord donor{.id = "d", .kind = lf::SourceKind::kDonor};
  lf::write_png(dir / "l.png", lf::RgbaImage(100, 50, lf::Rgba{1, 1, 1, 255}));
  donor.layers.push_back({dir / "l.png", {0, 0, 100, 50}, "strip"});
  lf::AssetPools pools;
  pools.donor.emplace();
  pools.donor->records.push_back(donor);
  lf::CompositionConfig cfg;
  cfg.donor_count_range = {1, 1};
  cfg.donor_layers_range = {1, 1};
  lf::SampleDraft d;
  d.canvas = cfg.canvas;
  lf::Rng rng(3);
  lf::add_donor_layers(d, pools, cfg, rng);
  ASSERT_EQ(d.layers.size(), 1u);
  EXPECT_EQ(d.layers[0].overlap_score, 0.0);
  EXPECT_EQ(d.layers[0].placed_box.width(), 100);
  EXPECT_EQ(d.layers[0].placed_box.height(), 50);
  EXPECT_TRUE(lf::box_within(d.layers[0].placed_box, cfg.canvas));
}

TEST(Donors, MissingPoolIsDiagnosed) {
  lf::SampleDraft d;
  lf::Rng rng(4);
  lf::add_donor_layers(d, lf::AssetPools{}, small_config(), rng);
  EXPECT_TRUE(d.layers.empty());
  EXPECT_EQ(d.diagnostics.size(), 1u);
}

TEST(Donors, ReplayIsIdentical) {
  TempDir dir("composer");
  lf::AssetPools pools;
  pools.donor.emplace();
  for (int i = 0; i < 3; ++i)
    pools.donor->records.push_back(make_design(dir, "d" + std::to_string(i), 3, lf::SourceKind::kDonor));
  const auto cfg = small_config();
  auto run = [&] {
    lf::SampleDraft d;
    d.canvas = cfg.canvas;
    lf::Rng rng(99);
    lf::add_donor_layers(d, pools, cfg, rng);
    return d;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    EXPECT_EQ(a.layers[i].asset_id, b.layers[i].asset_id);
    EXPECT_EQ(a.layers[i].placed_box, b.layers[i].placed_box);
    EXPECT_EQ(a.layers[i].image, b.layers[i].image);
  }
}

TEST(Auxiliary, NothingDrawnLeavesDraftUnchanged) {
  auto cfg = small_config();
  cfg.p_image_crop = 0.0;
  cfg.p_text = 0.0;
  cfg.fg_count_range = {0, 0};
  lf::SampleDraft d;
  d.canvas = cfg.canvas;
  lf::Rng rng(5);
  const auto out = lf::add_auxiliary_layers(d, lf::AssetPools{}, cfg, rng);
  EXPECT_FALSE(out.crop_drawn);
  EXPECT_FALSE(out.text_drawn);
  EXPECT_EQ(out.objects_drawn, 0);
  EXPECT_TRUE(d.layers.empty());
  EXPECT_TRUE(d.diagnostics.empty());
}

TEST(Auxiliary, EmptyPoolsAreSkippedWithDiagnostics) {
  auto cfg = small_config();
  cfg.p_image_crop = 1.0;
  cfg.p_text = 1.0;
  cfg.fg_count_range = {2, 2};
  lf::SampleDraft d;
  d.canvas = cfg.canvas;
  lf::Rng rng(6);
  lf::add_auxiliary_layers(d, lf::AssetPools{}, cfg, rng);
  EXPECT_TRUE(d.layers.empty());
  EXPECT_EQ(d.diagnostics.size(), 3u);
}

TEST(Auxiliary, TextBoxIsAlphaTightened) {
  TempDir dir("composer");
  lf::write_png(dir / "t.png", lf::testing::padded_block(100, 40, 8, lf::Rgba{0, 0, 0, 255}));
  lf::AssetPools pools;
  pools.text.emplace();
  pools.text->records.push_back({.id = "t", .kind = lf::SourceKind::kText, .image_path = dir / "t.png"});
  lf::CompositionConfig cfg;
  cfg.canvas = {256, 256};
  cfg.p_image_crop = 0.0;
  cfg.p_text = 1.0;
  cfg.fg_count_range = {0, 0};
  cfg.text_scale = {0.5, 0.5};
  lf::SampleDraft d;
  d.canvas = cfg.canvas;
  lf::Rng rng(7);
  lf::add_auxiliary_layers(d, pools, cfg, rng);
  ASSERT_EQ(d.layers.size(), 1u);
  const auto& text = d.layers[0];
  // scaled rectangle is 128x51; the tight extent drops the transparent margin
  const auto scaled = lf::scale_image(lf::read_png(dir / "t.png"), cfg.canvas, 0.5);
  const auto tight = *lf::tighten_bbox_to_alpha(scaled.image);
  EXPECT_EQ(text.placed_box.width(), tight.width());
  EXPECT_EQ(text.placed_box.height(), tight.height());
  EXPECT_LT(text.placed_box.width(), scaled.target.width);
  EXPECT_EQ(lf::tighten_bbox_to_alpha(text.image), lf::full_canvas_box(text.image.size()));
}

TEST(Assemble, OpaqueFullLayerCoversBackground) {
  lf::SampleDraft d;
  d.canvas = {32, 32};
  d.background = lf::RgbaImage(32, 32, lf::Rgba{1, 2, 3, 255});
  lf::LayerPlan top;
  top.image = lf::RgbaImage(32, 32, lf::Rgba{200, 100, 50, 255});
  top.placed_box = {0, 0, 32, 32};
  d.layers.push_back(top);
  lf::assemble_sample(d, small_config());
  EXPECT_EQ(d.composite, top.image);
}

TEST(Assemble, MatchesNaiveFoldAndAlignsBoxes) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    lf::SampleDraft d;
    d.canvas = {64, 48};
    d.background = lf::testing::random_image(64, 48, rng);
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    for (int i = 0; i < n; ++i) {
      lf::LayerPlan l;
      const int w = std::uniform_int_distribution<int>(1, 40)(rng);
      const int h = std::uniform_int_distribution<int>(1, 40)(rng);
      const int x = std::uniform_int_distribution<int>(0, 64 - w)(rng);
      const int y = std::uniform_int_distribution<int>(0, 48 - h)(rng);
      l.image = lf::testing::random_image(w, h, rng);
      l.placed_box = {x, y, x + w, y + h};
      d.layers.push_back(std::move(l));
    }
    lf::assemble_sample(d, small_config());
    lf::RgbaImage fold = d.background;
    for (const auto& l : d.layers)
      fold = lf::composite_over(fold, l.image, {l.placed_box.x0, l.placed_box.y0});
    EXPECT_EQ(d.composite, fold);
    for (std::size_t i = 0; i < d.layers.size(); ++i) {
      EXPECT_EQ(d.layers[i].z_order, static_cast<int>(i));
      EXPECT_TRUE(lf::box_contains(d.layers[i].quantized_box, d.layers[i].placed_box));
      EXPECT_EQ(d.layers[i].quantized_box.x0 % 16, 0);
      EXPECT_EQ(d.layers[i].quantized_box.y0 % 16, 0);
      EXPECT_EQ(d.layers[i].quantized_box.x1 % 16, 0);
      EXPECT_EQ(d.layers[i].quantized_box.y1 % 16, 0);
    }
  }
}

TEST(Assemble, LayerCapDropsTopmost) {
  lf::SampleDraft d;
  d.canvas = {16, 16};
  d.background = lf::RgbaImage(16, 16, lf::Rgba{0, 0, 0, 255});
  for (int i = 0; i < 5; ++i) {
    lf::LayerPlan l;
    l.asset_id = std::to_string(i);
    l.image = lf::RgbaImage(4, 4, lf::Rgba{255, 255, 255, 255});
    l.placed_box = {i, i, i + 4, i + 4};
    d.layers.push_back(l);
  }
  auto cfg = small_config();
  cfg.max_layers = 3;
  lf::assemble_sample(d, cfg);
  ASSERT_EQ(d.layers.size(), 3u);
  EXPECT_EQ(d.layers.back().asset_id, "2");
  EXPECT_EQ(d.flags, std::vector<std::string>{"layer_cap_applied"});
  EXPECT_EQ(d.diagnostics.size(), 1u);
}

TEST(Assemble, RejectsEmptyDrafts) {
  lf::SampleDraft d;
  EXPECT_THROW(lf::assemble_sample(d, small_config()), lf::Error);
  d.background = lf::RgbaImage(4, 4);
  EXPECT_THROW(lf::assemble_sample(d, small_config()), lf::Error);
}

class ComposeSample : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("compose");
    lf::testing::PoolSpec spec;
    pools_ = new lf::AssetPools(lf::testing::load_test_pools(lf::testing::write_pools(dir_->path(), spec)));
  }
  static void TearDownTestSuite() {
    delete pools_;
    delete dir_;
  }
  static lf::CompositionConfig config() {
    lf::CompositionConfig cfg;
    cfg.canvas = {256, 256};
    cfg.global_seed = 77;
    return cfg;
  }
  static inline TempDir* dir_ = nullptr;
  static inline lf::AssetPools* pools_ = nullptr;
};

TEST_F(ComposeSample, DeterministicPerId) {
  const auto cfg = config();
  for (std::uint64_t id : {0u, 1u, 17u}) {
    const auto a = lf::compose_sample(*pools_, cfg, id);
    const auto b = lf::compose_sample(*pools_, cfg, id);
    EXPECT_EQ(a.composite, b.composite);
    EXPECT_EQ(a.seed, lf::sample_seed(cfg.global_seed, id));
    ASSERT_EQ(a.layers.size(), b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i)
      EXPECT_EQ(a.layers[i].placed_box, b.layers[i].placed_box);
  }
  EXPECT_NE(lf::compose_sample(*pools_, cfg, 0).composite, lf::compose_sample(*pools_, cfg, 1).composite);
  EXPECT_EQ(lf::compose_sample(*pools_, cfg, 12).sample_id, "00000012");
}

TEST_F(ComposeSample, SampleInvariants) {
  const auto cfg = config();
  for (std::uint64_t id = 0; id < 40; ++id) {
    const auto s = lf::compose_sample(*pools_, cfg, id);
    ASSERT_GE(s.layers.size(), 1u);
    ASSERT_LE(s.layers.size(), 52u);
    EXPECT_EQ(s.layers.front().source, lf::SourceKind::kBase);
    int last_stage = 0;
    for (const auto& l : s.layers) {
      EXPECT_TRUE(lf::box_within(l.placed_box, cfg.canvas));
      EXPECT_EQ(l.placed_box.width(), l.image.width());
      EXPECT_EQ(l.placed_box.height(), l.image.height());
      EXPECT_TRUE(lf::is_quantized(l.quantized_box));
      // stages append in the order base, donor, crop, text, object
      EXPECT_GE(static_cast<int>(l.source), last_stage);
      last_stage = static_cast<int>(l.source);
    }
    EXPECT_EQ(lf::recomposite(s.background, s.layers), s.composite);
  }
}

TEST_F(ComposeSample, ExhaustiveModeLeavesNoAvoidableOverlap) {
  auto cfg = config();
  cfg.canvas = {48, 48};
  cfg.placement_mode = lf::CandidateMode::kExhaustive;
  for (std::uint64_t id = 0; id < 25; ++id) {
    const auto s = lf::compose_sample(*pools_, cfg, id);
    std::vector<lf::BBox> below;
    for (const auto& l : s.layers) {
      if (l.source != lf::SourceKind::kBase) {
        const int w = l.placed_box.width(), h = l.placed_box.height();
        bool free_spot = false;
        for (int y = 0; y + h <= 48 && !free_spot; ++y)
          for (int x = 0; x + w <= 48 && !free_spot; ++x)
            free_spot = lf::total_overlap({x, y, x + w, y + h}, below) == 0;
        if (free_spot) {
          EXPECT_EQ(l.overlap_score, 0.0);
        }
      }
      below.push_back(l.placed_box);
    }
  }
}
