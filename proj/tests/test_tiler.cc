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

#include <random>
#include <set>

#include "moldscan/dataset_io.h"
#include "moldscan/error.h"
#include "moldscan/synthgen.h"
#include "moldscan/tiler.h"
#include "test_support.h"

using namespace moldscan;
using moldscan::testing::TempDir;

namespace {

TilerConfig training(int w = 1333, int h = 800, double overlap = 0.9) {
  TilerConfig c;
  c.tile_w = w;
  c.tile_h = h;
  c.overlap = overlap;
  c.mode = TileMode::kTrainingCrop;
  return c;
}

std::vector<int> column_offsets(const TilePlan& plan) {
  std::set<int> xs;
  for (const Tile& t : plan.tiles) xs.insert(t.x0);
  return {xs.begin(), xs.end()};
}

// Every admissible offset that sits on the stride grid, plus the far edge.
std::vector<int> brute_force_offsets(int extent, int window, int stride) {
  if (extent <= window) return {0};
  std::vector<int> out;
  for (int x = 0; x <= extent - window; ++x) {
    if (x % stride == 0 || x == extent - window) out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_CASE("stride rounding") {
  CHECK(training().stride_x() == 133);
  CHECK(training().stride_y() == 80);
  const TilerConfig press = TilerConfig::defaults(Family::kPress, TileMode::kTrainingCrop);
  CHECK(press.tile_w == 2666);
  CHECK(press.tile_h == 1600);
  CHECK(press.stride_x() == 267);
  CHECK(press.stride_y() == 160);
  CHECK(training(3, 3, 0.99).stride_x() == 1);
  const TilerConfig inf = TilerConfig::defaults(Family::kInjection, TileMode::kInference);
  CHECK(inf.overlap == doctest::Approx(0.2));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(training(0, 800).validate(), ConfigError);
  CHECK_THROWS_AS(training(1333, 800, 1.0).validate(), ConfigError);
  TilerConfig c = training();
  c.visibility_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("plan examples") {
  const TilePlan one = plan_tiles(1, 1333, 800, training());
  REQUIRE(one.tiles.size() == 1);
  CHECK(one.tiles[0] == Tile{0, 0, 0, 1333, 800});

  const TilePlan three = plan_tiles(1, 1500, 800, training());
  CHECK(column_offsets(three) == std::vector<int>{0, 133, 167});
  CHECK(three.tiles.size() == 3);

  const TilePlan seven = plan_tiles(1, 2000, 800, training());
  CHECK(column_offsets(seven) == std::vector<int>{0, 133, 266, 399, 532, 665, 667});
  CHECK(seven.tiles.size() == 7);

  CHECK_THROWS_AS(plan_tiles(1, 0, 800, training()), DataError);
}

TEST_CASE("drawing smaller than the tile gets one clamped tile") {
  const TilePlan p = plan_tiles(1, 500, 300, training());
  REQUIRE(p.tiles.size() == 1);
  CHECK(p.tiles[0] == Tile{0, 0, 0, 500, 300});
}

TEST_CASE("plans are row-major, duplicate-free and cover the drawing") {
  for (auto [w, h] : std::vector<std::pair<int, int>>{{4000, 2400}, {1500, 801}, {2666, 1600}, {3001, 1999}}) {
    const TilePlan p = plan_tiles(3, w, h, training());
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < p.tiles.size(); ++i) {
      const Tile& t = p.tiles[i];
      CHECK(t.index == static_cast<int>(i));
      CHECK(seen.insert({t.x0, t.y0}).second);
      CHECK(t.x0 >= 0);
      CHECK(t.y0 >= 0);
      CHECK(t.x0 + t.w <= w);
      CHECK(t.y0 + t.h <= h);
      if (i > 0) {
        const Tile& prev = p.tiles[i - 1];
        CHECK((prev.y0 < t.y0 || (prev.y0 == t.y0 && prev.x0 < t.x0)));
      }
    }
    // Coverage: mark columns and rows reached by some tile edge-to-edge.
    std::vector<bool> cols(static_cast<std::size_t>(w)), rows(static_cast<std::size_t>(h));
    for (const Tile& t : p.tiles) {
      for (int x = t.x0; x < t.x0 + t.w; ++x) cols[static_cast<std::size_t>(x)] = true;
      for (int y = t.y0; y < t.y0 + t.h; ++y) rows[static_cast<std::size_t>(y)] = true;
    }
    CHECK(std::all_of(cols.begin(), cols.end(), [](bool b) { return b; }));
    CHECK(std::all_of(rows.begin(), rows.end(), [](bool b) { return b; }));
    // The plan is the full product of its column and row offsets.
    std::set<int> xs, ys;
    for (const Tile& t : p.tiles) {
      xs.insert(t.x0);
      ys.insert(t.y0);
    }
    CHECK(p.tiles.size() == xs.size() * ys.size());
    CHECK(plan_tiles(3, w, h, training()).tiles == p.tiles);
  }
}

TEST_CASE("15000x8000 plan matches brute-force enumeration" * doctest::timeout(60)) {
  const TilerConfig cfg = training();
  const TilePlan p = plan_tiles(1, 15000, 8000, cfg);
  const auto xs = brute_force_offsets(15000, 1333, 133);
  const auto ys = brute_force_offsets(8000, 800, 80);
  CHECK(axis_offsets(15000, 1333, 133) == xs);
  CHECK(axis_offsets(8000, 800, 80) == ys);
  CHECK(xs.size() == 104);
  CHECK(ys.size() == 91);
  CHECK(p.tiles.size() == xs.size() * ys.size());
  std::size_t i = 0;
  for (int y : ys) {
    for (int x : xs) {
      REQUIRE(p.tiles[i].x0 == x);
      REQUIRE(p.tiles[i].y0 == y);
      ++i;
    }
  }
}

TEST_CASE("containment guarantee") {
  std::mt19937_64 rng(42);
  for (auto [w, h] : std::vector<std::pair<int, int>>{{4000, 2400}, {15000, 8000}}) {
    const TilerConfig cfg = training();
    const TilePlan p = plan_tiles(1, w, h, cfg);
    const int max_w = cfg.tile_w - cfg.stride_x(), max_h = cfg.tile_h - cfg.stride_y();
    std::uniform_real_distribution<double> bw(1.0, max_w), bh(1.0, max_h), u(0.0, 1.0);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      const double bwv = bw(rng), bhv = bh(rng);
      const PixelBox box{u(rng) * (w - bwv), u(rng) * (h - bhv), bwv, bhv};
      const bool contained = std::any_of(p.tiles.begin(), p.tiles.end(), [&](const Tile& t) {
        return visible_fraction(box, t) == 1.0;
      });
      violations += !contained;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("every part of a seeded desk drawing survives whole in some tile") {
  SynthConfig sc;
  sc.seed = 2024;
  sc.parts = 25;
  const SynthDrawing d = generate_drawing(sc, GlyphLibrary(), 1);
  const TilerConfig cfg = training();
  const TilePlan p = plan_tiles(1, sc.width, sc.height, cfg);
  std::vector<int> hits(d.annotations.size(), 0);
  for (const Tile& t : p.tiles) {
    for (const Annotation& a : assign_annotations(d.annotations, t, cfg.visibility_threshold)) {
      const auto it = std::find_if(d.annotations.begin(), d.annotations.end(),
                                   [&](const Annotation& g) { return g.id == a.id; });
      REQUIRE(it != d.annotations.end());
      if (a.box == PixelBox{it->box.x - t.x0, it->box.y - t.y0, it->box.w, it->box.h}) {
        ++hits[static_cast<std::size_t>(it - d.annotations.begin())];
      }
    }
  }
  REQUIRE(d.annotations.size() == 25);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(d.annotations[i].box.w <= 1200);
    CHECK(d.annotations[i].box.h <= 720);
    CHECK(hits[i] >= 1);
  }
}

TEST_CASE("extract_tile copies exact pixels") {
  const Raster img = moldscan::testing::gradient(300, 200);
  CHECK(extract_tile(img, {0, 0, 0, 300, 200}) == img);
  const Raster t = extract_tile(img, {0, 10, 20, 50, 40});
  CHECK(t.at(0, 0) == img.at(10, 20));
  CHECK(t.at(49, 39) == img.at(59, 59));
  CHECK_THROWS_AS(extract_tile(img, {0, 280, 0, 50, 40}), DataError);

  const Raster noisy = moldscan::testing::noise_raster(400, 300, 5);
  const Tile a{0, 0, 0, 200, 150}, b{1, 100, 50, 200, 150};
  const Raster ra = extract_tile(noisy, a), rb = extract_tile(noisy, b);
  for (int y = 50; y < 150; ++y) {
    for (int x = 100; x < 200; ++x) REQUIRE(ra.at(x, y) == rb.at(x - 100, y - 50));
  }
}

TEST_CASE("assign_annotations") {
  const Tile tile{0, 100, 100, 200, 200};
  const std::vector<Annotation> anns = {
      make_annotation(1, 1, {120, 130, 20, 10}, Category::kHook, 90),
      make_annotation(2, 1, {90, 150, 20, 10}, Category::kBoss, 0),   // half visible
      make_annotation(3, 1, {0, 0, 10, 10}, Category::kHook, 0),      // outside
      make_annotation(4, 1, {295, 150, 20, 10}, Category::kDps, 90),  // quarter visible
  };
  const auto kept = assign_annotations(anns, tile, 0.7);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == 1);
  CHECK(kept[0].box == PixelBox{20, 30, 20, 10});
  CHECK(kept[0].rotation.degrees() == 90);

  const auto loose = assign_annotations(anns, tile, 0.5);
  REQUIRE(loose.size() == 2);
  CHECK(loose[1].box == PixelBox{0, 50, 10, 10});
}

TEST_CASE("crop export") {
  TempDir dir("tiler");
  const Raster img = moldscan::testing::gradient(1333, 800);
  save_png(dir / "a.png", img);
  save_png(dir / "b.png", moldscan::testing::gradient(1500, 800));
  Dataset ds;
  ds.images = {{1, "a.png", 1333, 800, std::nullopt},
               {2, "b.png", 1500, 800, std::nullopt},
               {3, "missing.png", 1333, 800, std::nullopt}};
  ds.annotations = {make_annotation(1, 1, {10, 10, 30, 30}, Category::kHook, 0),
                    make_annotation(2, 1, {500, 400, 40, 40}, Category::kBoss, 0),
                    make_annotation(3, 3, {10, 10, 30, 30}, Category::kHook, 0)};

  const CropExportReport r = export_crop_dataset(ds, dir.path(), training(), dir / "out");
  // Drawing 2 has no annotations, so training mode exports none of its tiles.
  REQUIRE(r.crops.images.size() == 1);
  CHECK(r.tiles_written == 1);
  CHECK(r.crops.annotations.size() == 2);
  CHECK(r.drawing_errors.size() == 1);
  const ImageRecord& rec = r.crops.images[0];
  REQUIRE(rec.source.has_value());
  CHECK(rec.source->drawing_id == 1);
  CHECK(load_png(dir / "out" / rec.file_name) == img);
  const Dataset reloaded = load_dataset(dir / "out" / "crops.json");
  CHECK(reloaded.images.size() == 1);
  CHECK(reloaded.images[0].source == rec.source);

  TilerConfig inf = training();
  inf.mode = TileMode::kInference;
  const CropExportReport all = export_crop_dataset(ds, dir.path(), inf, dir / "out_inf");
  CHECK(all.crops.images.size() == 1 + 3);
}
