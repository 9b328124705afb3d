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

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "layerforge/captioning.hpp"
#include "layerforge/refiner.hpp"

namespace lf = layerforge;

namespace {

lf::CaptionDraft centered_draft() {
  return lf::draft_caption("A calm blue backdrop", {{{412, 412, 612, 612}, "A red kite", 0}}, {1024, 1024});
}

// Chat-completion stub on an ephemeral port. The first `failures` requests
// answer 503.
class StubEndpoint {
 public:
  explicit StubEndpoint(std::string reply, int failures = 0) : reply_(std::move(reply)), failures_(failures) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      auth_ = req.get_header_value("Authorization");
      if (calls_++ < failures_) {
        res.status = 503;
        return;
      }
      const nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply_}}}}}}};
      res.set_content(j.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int calls() const { return calls_; }
  const std::string& last_body() const { return last_body_; }
  const std::string& auth() const { return auth_; }

 private:
  httplib::Server server_;
  std::string reply_;
  int failures_;
  std::atomic<int> calls_{0};
  std::string last_body_, auth_;
  int port_ = 0;
  std::thread thread_;
};

lf::RefinerConfig fast_config(const std::string& endpoint) {
  lf::RefinerConfig cfg;
  cfg.endpoint = endpoint;
  cfg.timeout = std::chrono::seconds(5);
  cfg.retry_backoff = std::chrono::milliseconds(1);
  return cfg;
}

}  // namespace

TEST(DraftCaption, SingleCenteredLayer) {
  const auto d = centered_draft();
  ASSERT_EQ(d.region_phrases.size(), 1u);
  EXPECT_EQ(d.region_phrases[0].region, lf::GridRegion::kCenter);
  EXPECT_EQ(d.raw, "A calm blue backdrop. In the center, A red kite.");
  EXPECT_FALSE(d.refined.has_value());
}

TEST(DraftCaption, ReadingOrder) {
  const lf::CanvasSize c{1024, 1024};
  const auto d = lf::draft_caption("Bg.",
                                   {{{900, 900, 1000, 1000}, "late", 0}, {{0, 0, 100, 100}, "early", 1}}, c);
  ASSERT_EQ(d.region_phrases.size(), 2u);
  EXPECT_EQ(d.region_phrases[0].region, lf::GridRegion::kTopLeft);
  EXPECT_EQ(d.region_phrases[1].region, lf::GridRegion::kBottomRight);
  EXPECT_LT(d.raw.find("On the top-left, early."), d.raw.find("On the bottom-right, late."));
}

TEST(DraftCaption, BackgroundFirstThenRegionsWithinRegionByZ) {
  const lf::CanvasSize c{300, 300};
  const auto d = lf::draft_caption("This is a doodle_art style image",
                                   {{{0, 100, 90, 200}, "second", 5},
                                    {{10, 110, 80, 190}, "first", 2},
                                    {{220, 0, 300, 80}, "corner", 0},
                                    {{100, 100, 200, 200}, "", 1}},
                                   c);
  EXPECT_EQ(d.raw,
            "This is a doodle_art style image. On the top-right, corner. On the left, first. "
            "On the left, second. In the center, a design element.");
}

TEST(DraftCaption, AllNinePhrases) {
  const lf::CanvasSize c{90, 90};
  std::vector<lf::CaptionedBox> boxes;
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) boxes.push_back({{col * 30, r * 30, col * 30 + 30, r * 30 + 30}, "x", 0});
  std::reverse(boxes.begin(), boxes.end());
  const auto d = lf::draft_caption("", boxes, c);
  EXPECT_EQ(d.raw,
            "On the top-left, x. On the top, x. On the top-right, x. On the left, x. In the center, x. "
            "On the right, x. On the bottom-left, x. On the bottom, x. On the bottom-right, x.");
}

TEST(DraftCaption, DeterministicFromSample) {
  lf::SampleDraft s;
  s.canvas = {64, 64};
  s.background_caption = "Plain.";
  for (int i = 0; i < 4; ++i) {
    lf::LayerPlan l;
    l.placed_box = {i * 16, i * 16, i * 16 + 8, i * 16 + 8};
    l.caption = "L" + std::to_string(i);
    l.z_order = i;
    s.layers.push_back(l);
  }
  EXPECT_EQ(lf::draft_caption(s).raw, lf::draft_caption(s).raw);
  EXPECT_EQ(lf::draft_caption(s).raw, "Plain. On the top-left, L0. On the top-left, L1. In the center, L2. "
                                      "On the bottom-right, L3.");
}

TEST(RefinePrompt, MatchesBundledResource) {
  std::ifstream in(std::string(LAYERFORGE_RESOURCES_DIR) + "/refine_system_prompt.txt");
  ASSERT_TRUE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(lf::detail::trim(ss.str()), lf::kDefaultRefinePrompt);
  EXPECT_EQ(lf::RefinerConfig{}.system_prompt, lf::kDefaultRefinePrompt);
  EXPECT_EQ(lf::RefinerConfig{}.word_range, (lf::IntRange{100, 140}));
}

TEST(RefineConfig, Validation) {
  lf::RefinerConfig cfg;
  cfg.word_range = {140, 100};
  EXPECT_THROW(lf::validate(cfg), lf::ConfigError);
  cfg.word_range = {100, 140};
  cfg.max_retries = -1;
  EXPECT_THROW(lf::validate(cfg), lf::ConfigError);
}

TEST(RefineConfig, ReadsEnvironment) {
  ::setenv(lf::kEndpointEnv, "http://example.invalid/x", 1);
  ::setenv(lf::kApiKeyEnv, "k", 1);
  const auto cfg = lf::refiner_config_from_env();
  EXPECT_EQ(cfg.endpoint, "http://example.invalid/x");
  EXPECT_EQ(cfg.api_key, "k");
  ::unsetenv(lf::kEndpointEnv);
  ::unsetenv(lf::kApiKeyEnv);
}

TEST(Refine, FallbackIsIdentity) {
  const auto d = centered_draft();
  const auto r = lf::refine_caption(lf::RefinerConfig{}, lf::RgbaImage(4, 4), d);
  EXPECT_TRUE(r.used_fallback);
  EXPECT_EQ(r.text, d.raw);
}

TEST(Refine, StubEndpointReply) {
  StubEndpoint stub("REFINED");
  auto cfg = fast_config(stub.url());
  cfg.api_key = "secret";
  const auto d = centered_draft();
  const auto r = lf::refine_caption(cfg, lf::RgbaImage(8, 8, lf::Rgba{1, 2, 3, 255}), d);
  EXPECT_EQ(r.text, "REFINED");
  EXPECT_FALSE(r.used_fallback);
  EXPECT_TRUE(r.retries.empty());
  EXPECT_EQ(stub.auth(), "Bearer secret");
  const auto req = nlohmann::json::parse(stub.last_body());
  EXPECT_EQ(req["messages"][0]["content"], lf::kDefaultRefinePrompt);
  const auto& parts = req["messages"][1]["content"];
  EXPECT_EQ(parts[0]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);
  EXPECT_EQ(parts[1]["text"], d.raw);
}

TEST(Refine, RetriesThenSucceeds) {
  StubEndpoint stub("REFINED", 2);
  auto cfg = fast_config(stub.url());
  cfg.max_retries = 3;
  const auto r = lf::refine_caption(cfg, lf::RgbaImage(4, 4), centered_draft());
  EXPECT_EQ(r.text, "REFINED");
  EXPECT_EQ(r.retries.size(), 2u);
  EXPECT_EQ(stub.calls(), 3);
}

TEST(Refine, ExhaustedRetriesFallBackOrThrow) {
  StubEndpoint stub("REFINED", 100);
  auto cfg = fast_config(stub.url());
  cfg.max_retries = 1;
  const auto d = centered_draft();
  const auto r = lf::refine_caption(cfg, lf::RgbaImage(4, 4), d);
  EXPECT_TRUE(r.used_fallback);
  EXPECT_EQ(r.text, d.raw);
  cfg.fallback = false;
  try {
    lf::refine_caption(cfg, lf::RgbaImage(4, 4), d);
    FAIL() << "expected RefineError";
  } catch (const lf::RefineError& e) {
    EXPECT_NE(std::string(e.what()).find(stub.url()), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("HTTP 503"), std::string::npos);
  }
}

TEST(Refine, UnreachableEndpointWithoutFallbackThrows) {
  auto cfg = fast_config("http://127.0.0.1:1/v1");
  cfg.max_retries = 0;
  cfg.fallback = false;
  EXPECT_THROW(lf::refine_caption(cfg, lf::RgbaImage(4, 4), centered_draft()), lf::RefineError);
}

TEST(Refine, OverlongReplyIsAcceptedWithWarning) {
  std::string longtext;
  for (int i = 0; i < 281; ++i) longtext += "word ";
  StubEndpoint stub(longtext);
  const auto r = lf::refine_caption(fast_config(stub.url()), lf::RgbaImage(4, 4), centered_draft());
  EXPECT_EQ(lf::count_words(r.text), 281u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Refine, ParsesEndpoints) {
  EXPECT_EQ(lf::parse_endpoint("https://h:8443/a/b").scheme_host_port, "https://h:8443");
  EXPECT_EQ(lf::parse_endpoint("https://h:8443/a/b").path, "/a/b");
  EXPECT_EQ(lf::parse_endpoint("http://h").path, "/");
  EXPECT_THROW(lf::parse_endpoint("ftp://h/x"), lf::RefineError);
}
