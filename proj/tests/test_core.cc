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
#include <random>

#include "moldscan/core.h"
#include "moldscan/error.h"

using namespace moldscan;

namespace {

// Counts 0.1 x 0.1 cells by their centers. Boxes on the 0.1 grid are
// covered exactly, so the result is an independent exact IoU.
double raster_iou(const PixelBox& a, const PixelBox& b) {
  auto cells = [](double v) { return static_cast<long>(std::lround(v * 10.0)); };
  const long ax0 = cells(a.x), ay0 = cells(a.y), ax1 = cells(a.right()), ay1 = cells(a.bottom());
  const long bx0 = cells(b.x), by0 = cells(b.y), bx1 = cells(b.right()), by1 = cells(b.bottom());
  long inter = 0;
  for (long y = std::min(ay0, by0); y < std::max(ay1, by1); ++y) {
    for (long x = std::min(ax0, bx0); x < std::max(ax1, bx1); ++x) {
      const bool in_a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
      const bool in_b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
      inter += in_a && in_b;
    }
  }
  const long area_a = (ax1 - ax0) * (ay1 - ay0), area_b = (bx1 - bx0) * (by1 - by0);
  return static_cast<double>(inter) / static_cast<double>(area_a + area_b - inter);
}

PixelBox random_grid_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pos(0, 300), size(1, 150);
  return {pos(rng) / 10.0, pos(rng) / 10.0, size(rng) / 10.0, size(rng) / 10.0};
}

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 5, 10, 10}) == doctest::Approx(25.0 / 175.0).epsilon(1e-12));
  CHECK(raster_iou({0, 0, 10, 10}, {5, 5, 10, 10}) == doctest::Approx(25.0 / 175.0));
  // Touching edges share no area.
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);
}

TEST_CASE("iou matches the raster oracle and is symmetric") {
  std::mt19937_64 rng(20260101);
  int worst = 0;
  double max_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PixelBox a = random_grid_box(rng), b = random_grid_box(rng);
    const double err = std::abs(iou(a, b) - raster_iou(a, b));
    if (err > max_err) {
      max_err = err;
      worst = i;
    }
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, a) == 1.0);
  }
  INFO("worst pair " << worst);
  CHECK(max_err < 1e-3);
}

TEST_CASE("to_global translates and checks bounds") {
  Detection d;
  d.box = {10, 20, 50, 60};
  d.score = 0.5;
  CHECK(to_global(d, {0, 0}, 4000, 2400).box == PixelBox{10, 20, 50, 60});
  CHECK(to_global(d, {1000, 500}, 4000, 2400).box == PixelBox{1010, 520, 50, 60});

  // The last column of the 2000-wide plan starts at 667. A 50-wide box at
  // local x=1300 ends at 2017 and falls outside the drawing, so it is
  // rejected; a 30-wide box at the same place stays inside.
  Detection wide;
  wide.box = {1300, 700, 50, 60};
  CHECK_THROWS_AS(to_global(wide, {667, 0}, 2000, 800), DataError);
  Detection fits;
  fits.box = {1300, 700, 30, 60};
  CHECK(to_global(fits, {667, 0}, 2000, 800).box == PixelBox{1967, 700, 30, 60});
}

TEST_CASE("to_local and to_global round trip exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Tile t{0, static_cast<int>(u(rng) * 3000), static_cast<int>(u(rng) * 1500), 1000, 800};
    Detection d;
    d.box = {t.x0 + u(rng) * 900, t.y0 + u(rng) * 700, 1 + u(rng) * 99, 1 + u(rng) * 99};
    d.category = Category::kBoss;
    const Detection back = to_global(to_local(d, t.origin()), t.origin(), 5000, 3000);
    CHECK(back.box == d.box);
  }
}

TEST_CASE("visible_fraction") {
  const Tile tile{0, 100, 100, 200, 200};
  CHECK(visible_fraction({120, 120, 10, 10}, tile) == 1.0);
  CHECK(visible_fraction({0, 0, 10, 10}, tile) == 0.0);
  CHECK(visible_fraction({0, 0, 10, 10}, PixelBox{5, -1e9, 1e12, 2e9}) == 0.5);
}

TEST_CASE("visible_fraction shrinks with the window") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const PixelBox box{50 + u(rng) * 100, 50 + u(rng) * 100, 1 + u(rng) * 80, 1 + u(rng) * 80};
    PixelBox win{0, 0, 300, 300};
    double prev = visible_fraction(box, win);
    for (int k = 0; k < 30; ++k) {
      win = {win.x + u(rng) * 5, win.y + u(rng) * 5, win.w - 10, win.h - 10};
      const double v = visible_fraction(box, win);
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
  }
}

TEST_CASE("categories and rotation groups") {
  for (Category c : kAllCategories) {
    CHECK(category_from_id(category_id(c)) == c);
    CHECK(category_from_name(category_name(c)) == c);
  }
  CHECK(categories_of(Family::kInjection).size() == 3);
  CHECK(categories_of(Family::kPress).size() == 4);
  const std::vector<int> full{0, 90, 180, 270};
  for (Category c : {Category::kHook, Category::kUndercut, Category::kEmboScrewless}) {
    const auto g = rotation_group(c);
    CHECK(std::vector<int>(g.begin(), g.end()) == full);
  }
  const auto dps = rotation_group(Category::kDps);
  CHECK(std::vector<int>(dps.begin(), dps.end()) == std::vector<int>{0, 90});
  for (Category c : {Category::kBoss, Category::kEmbo, Category::kEmboBurring}) {
    CHECK(rotation_group(c).size() == 1);
    CHECK_FALSE(rotation_variant(c));
  }
}

TEST_CASE("rotation construction") {
  CHECK(Rotation::make(Category::kHook, 270).degrees() == 270);
  CHECK_THROWS_AS(Rotation::make(Category::kBoss, 90), DataError);
  CHECK_THROWS_AS(Rotation::make(Category::kDps, 180), DataError);
  CHECK_THROWS_AS(Rotation::make(Category::kHook, 45), DataError);
  CHECK(Rotation::normalized(Category::kDps, 180).degrees() == 0);
  CHECK(Rotation::normalized(Category::kDps, 270).degrees() == 90);
  CHECK_THROWS_AS(Rotation::normalized(Category::kEmbo, 180), DataError);
}

TEST_CASE("annotations validate their fields") {
  CHECK_NOTHROW(make_annotation(1, 1, {0, 0, 5, 5}, Category::kHook, 90));
  CHECK_THROWS_AS(make_annotation(1, 1, {0, 0, 0, 5}, Category::kHook, 90), DataError);
  CHECK_THROWS_AS(make_annotation(1, 1, {0, 0, 5, 5}, Category::kBoss, 90), DataError);
}
