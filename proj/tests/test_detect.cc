// Copyright 2026 The Moldscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "moldscan/detect.h"
#include "moldscan/error.h"
#include "moldscan/ncc.h"
#include "moldscan/synthgen.h"
#include "moldscan/tiler.h"
#include "test_support.h"

using namespace moldscan;

namespace {

const GlyphLibrary& library() {
  static const GlyphLibrary lib;
  return lib;
}

TilerConfig training() {
  return TilerConfig::defaults(Family::kInjection, TileMode::kTrainingCrop);
}

std::chrono::milliseconds ms(int v) { return std::chrono::milliseconds(v); }

ExternalEndpoint fake(std::vector<std::string> args, int timeout_ms = 5000, int pool = 1) {
  ExternalEndpoint e;
  e.command = {MOLDSCAN_FAKE_BACKEND};
  e.command.insert(e.command.end(), args.begin(), args.end());
  e.timeout = ms(timeout_ms);
  e.pool_size = pool;
  return e;
}

SynthConfig single_part(Category c, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.width = 400;
  cfg.height = 300;
  cfg.parts = 1;
  cfg.mix = {{c, 1.0}};
  return cfg;
}

}  // namespace

TEST_CASE("oracle examples") {
  const Tile tile{0, 0, 0, 1333, 800};
  const std::vector<Annotation> truth = {
      make_annotation(1, 1, {100, 200, 48, 30}, Category::kHook, 90),
      make_annotation(2, 1, {1320, 200, 48, 30}, Category::kHook, 0),  // cut by the edge
      make_annotation(3, 2, {100, 200, 48, 30}, Category::kBoss, 0),   // other drawing
  };
  const auto dets = oracle_detect(tile, 1, truth, Family::kInjection, {});
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].category == Category::kHook);
  CHECK(dets[0].score == 1.0);
  CHECK(dets[0].box == truth[0].box);
  CHECK_FALSE(dets[0].rotation.has_value());

  CHECK(oracle_detect(tile, 3, truth, Family::kInjection, {}).empty());
  CHECK(oracle_detect(tile, 1, truth, Family::kPress, {}).empty());

  NoiseConfig drop_all;
  drop_all.drop_probability = 1.0;
  for (int i = 0; i < 5; ++i) {
    const Tile t{i, i * 100, 0, 1333, 800};
    CHECK(oracle_detect(t, 1, truth, Family::kInjection, drop_all).empty());
  }
}

TEST_CASE("oracle noise is seeded per tile") {
  std::vector<Annotation> truth;
  for (int i = 0; i < 20; ++i) {
    truth.push_back(make_annotation(i + 1, 1, {20.0 + 60 * i, 100, 40, 40}, Category::kBoss, 0));
  }
  NoiseConfig noise;
  noise.jitter_sigma = 3.0;
  noise.drop_probability = 0.1;
  noise.false_positive_rate = 2.0;
  noise.seed = 99;
  const Tile t{4, 0, 0, 1333, 800};
  const auto a = oracle_detect(t, 1, truth, Family::kInjection, noise);
  CHECK(a == oracle_detect(t, 1, truth, Family::kInjection, noise));
  validate_detections(a, t, Family::kInjection);
  noise.seed = 100;
  CHECK(a != oracle_detect(t, 1, truth, Family::kInjection, noise));
}

TEST_CASE("oracle over a 7-tile plan counts containments") {
  SynthConfig cfg;
  cfg.seed = 2026;
  cfg.width = 2000;
  cfg.height = 800;
  cfg.parts = 10;
  cfg.mix = {{Category::kHook, 1}, {Category::kBoss, 1}, {Category::kUndercut, 1}};
  const SynthDrawing d = generate_drawing(cfg, library(), 1);
  const TilePlan plan = plan_tiles(1, cfg.width, cfg.height, training());
  REQUIRE(plan.tiles.size() == 7);

  std::size_t expected = 0;
  for (const Annotation& a : d.annotations) {
    for (const Tile& t : plan.tiles) expected += visible_fraction(a.box, t) == 1.0;
  }
  OracleDetector oracle(Family::kInjection, d.annotations);
  const auto outcomes = detect_tiles(plan, 1, Raster{}, oracle);
  REQUIRE(outcomes.size() == 7);
  std::size_t total = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    CHECK(outcomes[i].tile_index == static_cast<int>(i));
    CHECK_FALSE(outcomes[i].error.has_value());
    total += outcomes[i].detections.size();
  }
  CHECK(expected >= d.annotations.size());
  CHECK(total == expected);
}

TEST_CASE("detect_tiles small cases") {
  const TilePlan one = plan_tiles(1, 800, 600, training());
  OracleDetector empty(Family::kInjection, {});
  const auto r = detect_tiles(one, 1, Raster{}, empty);
  REQUIRE(r.size() == 1);
  CHECK(r[0].detections.empty());

  // A drawing without parts gives empty entries for every backend.
  const Raster blank(2000, 800, 1, 255);
  const TilePlan seven = plan_tiles(1, 2000, 800, training());
  TemplateDetector templ(Family::kInjection, export_template_bank(library(), Family::kInjection));
  for (Detector* det : std::vector<Detector*>{&empty, &templ}) {
    for (const TileOutcome& o : detect_tiles(seven, 1, blank, *det)) {
      CHECK(o.detections.empty());
      CHECK_FALSE(o.error.has_value());
    }
  }
  CHECK_THROWS_AS(detect_tiles(seven, 1, Raster(100, 100, 1, 255), templ), DataError);
}

TEST_CASE("template detector finds a seeded Boss") {
  const SynthDrawing d = generate_drawing(single_part(Category::kBoss, 11), library(), 1);
  REQUIRE(d.annotations.size() == 1);
  const auto dets =
      template_detect(d.image, export_template_bank(library(), Family::kInjection), Family::kInjection);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].category == Category::kBoss);
  const PixelBox& g = d.annotations[0].box;
  CHECK(std::abs(dets[0].box.x - g.x) <= 2.0);
  CHECK(std::abs(dets[0].box.y - g.y) <= 2.0);
  CHECK(std::abs(dets[0].box.right() - g.right()) <= 2.0);
  CHECK(std::abs(dets[0].box.bottom() - g.bottom()) <= 2.0);
}

TEST_CASE("a rotated Hook is matched best by its own template") {
  Raster tile(220, 200, 1, 255);
  const Raster glyph = library().render(Category::kHook, 90);
  paste(tile, glyph, 50, 60);
  const TemplateBank bank = export_template_bank(library(), Family::kInjection);

  // Brute-force sweep: best score of each template over every position.
  double own = -1.0, other = -1.0;
  for (const Template& t : bank.templates) {
    double best = -1.0;
    for (int y = 0; y + t.raster.height <= tile.height; ++y) {
      for (int x = 0; x + t.raster.width <= tile.width; ++x) {
        best = std::max(best, ncc_at(tile, t.raster, x, y));
      }
    }
    const bool is_own = t.category == Category::kHook && t.rotation.degrees() == 90;
    (is_own ? own : other) = std::max(is_own ? own : other, best);
  }
  CHECK(own == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(other < own);

  const auto dets = template_detect(tile, bank, Family::kInjection);
  REQUIRE_FALSE(dets.empty());
  const auto top = std::max_element(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
    return a.score < b.score;
  });
  CHECK(top->category == Category::kHook);
  CHECK(top->score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(top->box == PixelBox{50, 60, static_cast<double>(glyph.width),
                             static_cast<double>(glyph.height)});
}

TEST_CASE("template self-match peaks at the embedding position") {
  for (Family f : {Family::kInjection, Family::kPress}) {
    for (const Template& t : export_template_bank(library(), f).templates) {
      Raster tile(160, 150, 1, 255);
      paste(tile, t.raster, 17, 23);
      TemplateBank bank;
      bank.templates = {t};
      const auto dets = template_detect(tile, bank, f);
      REQUIRE(dets.size() == 1);
      CHECK(dets[0].score == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(dets[0].box.x == 17);
      CHECK(dets[0].box.y == 23);
    }
  }
}

TEST_CASE("template detection is bit-for-bit reproducible and blank-safe") {
  SynthConfig cfg = single_part(Category::kDps, 5);
  cfg.parts = 4;
  cfg.width = 900;
  cfg.height = 700;
  cfg.mix = {};
  const SynthDrawing d = generate_drawing(cfg, library(), 3);
  const TemplateBank bank = export_template_bank(library(), Family::kPress);
  const auto a = template_detect(d.image, bank, Family::kPress);
  const auto b = template_detect(d.image, bank, Family::kPress);
  CHECK(a == b);
  CHECK(template_detect(Raster(300, 300, 1, 255), bank, Family::kPress).empty());
  CHECK(template_detect(Raster(300, 300, 1, 0), bank, Family::kPress).empty());

  // Thread count does not change results.
  const TilePlan plan = plan_tiles(3, 900, 700, [] {
    TilerConfig c = TilerConfig::defaults(Family::kPress, TileMode::kInference);
    c.tile_w = 400;
    c.tile_h = 300;
    return c;
  }());
  TemplateDetector det(Family::kPress, bank);
  const auto serial = detect_tiles(plan, 3, d.image, det, 1);
  const auto parallel = detect_tiles(plan, 3, d.image, det, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].detections == parallel[i].detections);
  }
}

TEST_CASE("templates larger than the tile are skipped with a warning") {
  TemplateDetector det(Family::kPress, export_template_bank(library(), Family::kPress));
  const Raster small(40, 40, 1, 255);
  TileInput in;
  in.tile = {0, 0, 0, 40, 40};
  in.pixels = &small;
  CHECK(det.detect(in).empty());
  CHECK_FALSE(det.warnings().empty());
}

TEST_CASE("validate_detections enforces the contract") {
  const Tile tile{0, 0, 0, 100, 100};
  Detection ok;
  ok.box = {10, 10, 20, 20};
  ok.score = 0.5;
  CHECK_NOTHROW(validate_detections(std::vector<Detection>{ok}, tile, Family::kInjection));

  auto rejects = [&](Detection d, Family f = Family::kInjection) {
    CHECK_THROWS_AS(validate_detections(std::vector<Detection>{d}, tile, f), ContractError);
  };
  Detection d = ok;
  d.score = 1.5;
  rejects(d);
  d.score = std::numeric_limits<double>::quiet_NaN();
  rejects(d);
  d = ok;
  d.box = {90, 10, 20, 20};
  rejects(d);
  d.box = {10, 10, 0, 20};
  rejects(d);
  rejects(ok, Family::kPress);
  d = ok;
  d.category = Category::kBoss;
  d.rotation = Rotation::make(Category::kHook, 90);
  rejects(d);
}

TEST_CASE("external protocol wire format") {
  Raster r(2, 1, 1);
  r.pixels = {0, 255};
  CHECK(encode_detect_request(7, r) ==
        R"({"id": 7, "width": 2, "height": 1, "pixels_b64": "AP8="})");
  const Tile tile{7, 0, 0, 100, 100};
  const auto dets = parse_detect_response(
      R"({"id": 7, "detections": [{"x": 1, "y": 2, "w": 3, "h": 4, "category": "Boss", "score": 0.5}]})",
      7, tile, Family::kInjection);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].box == PixelBox{1, 2, 3, 4});
  CHECK(dets[0].category == Category::kBoss);
  CHECK(parse_detect_response(R"({"id": 7, "detections": []})", 7, tile, Family::kInjection).empty());
  for (const char* bad : {
           "nope",
           R"({"id": 8, "detections": []})",
           R"({"id": 7})",
           R"({"id": 7, "detections": [{"x": 1, "y": 2, "w": 3, "h": 4, "category": "Gear", "score": 0.5}]})",
           R"({"id": 7, "detections": [{"x": 1, "y": 2, "w": 3, "category": "Boss", "score": 0.5}]})",
           R"({"id": 7, "detections": [{"x": 1, "y": 2, "w": 3, "h": 4, "category": "DPS", "score": 0.5}]})",
       }) {
    CHECK_THROWS_AS(parse_detect_response(bad, 7, tile, Family::kInjection), ContractError);
  }
}

TEST_CASE("external detector loopback and faults") {
  const Raster img = moldscan::testing::noise_raster(300, 100, 1);
  TilerConfig cfg = training();
  cfg.mode = TileMode::kInference;
  cfg.tile_w = 100;
  cfg.tile_h = 100;
  cfg.overlap = 0.0;
  const TilePlan plan = plan_tiles(1, 300, 100, cfg);
  REQUIRE(plan.tiles.size() == 3);

  SUBCASE("echo") {
    ExternalDetector det(Family::kInjection, fake({"echo"}));
    CHECK(det.single_flight());
    const auto r = detect_tiles(plan, 1, img, det);
    for (const TileOutcome& o : r) {
      CHECK_FALSE(o.error.has_value());
      REQUIRE(o.detections.size() == 2);
      CHECK(o.detections[0].box == PixelBox{1.5, 2.0, 10.0, 12.0});
      CHECK(o.detections[0].score == 0.9);
      CHECK(o.detections[1].score == 0.25);
    }
  }
  SUBCASE("echo with a wrong-family category fails validation") {
    ExternalDetector det(Family::kPress, fake({"echo", "Hook"}));
    for (const TileOutcome& o : detect_tiles(plan, 1, img, det)) CHECK(o.error.has_value());
  }
  SUBCASE("score out of range") {
    ExternalDetector det(Family::kInjection, fake({"bad-score"}));
    for (const TileOutcome& o : detect_tiles(plan, 1, img, det)) {
      REQUIRE(o.error.has_value());
      CHECK(o.error->find("score") != std::string::npos);
    }
  }
  SUBCASE("malformed, wrong id and dead process") {
    for (const char* mode : {"malformed", "wrong-id", "die"}) {
      ExternalDetector det(Family::kInjection, fake({mode}));
      for (const TileOutcome& o : detect_tiles(plan, 1, img, det)) CHECK(o.error.has_value());
    }
  }
  SUBCASE("timeout fails one tile only") {
    ExternalDetector det(Family::kInjection, fake({"hang", "1"}, 300));
    const auto r = detect_tiles(plan, 1, img, det);
    CHECK_FALSE(r[0].error.has_value());
    REQUIRE(r[1].error.has_value());
    CHECK(r[1].detections.empty());
    CHECK_FALSE(r[2].error.has_value());
    CHECK(r[2].detections.size() == 2);
  }
  SUBCASE("pooled workers") {
    ExternalDetector det(Family::kInjection, fake({"echo"}, 5000, 3));
    CHECK_FALSE(det.single_flight());
    for (const TileOutcome& o : detect_tiles(plan, 1, img, det, 3)) CHECK(o.detections.size() == 2);
  }
  SUBCASE("missing program") {
    ExternalEndpoint e;
    e.command = {"/nonexistent/detector"};
    ExternalDetector det(Family::kInjection, e);
    for (const TileOutcome& o : detect_tiles(plan, 1, img, det)) CHECK(o.error.has_value());
  }
}
