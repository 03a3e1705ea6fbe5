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

#include "moldscan/core.h"

#include <algorithm>
#include <fmt/format.h>

#include "moldscan/error.h"

namespace moldscan {

namespace {

constexpr double kBoundsEps = 1e-9;

// Area from the same edge differences as the overlap, so full overlap gives
// ratios of exactly 1.
double extent_area(const PixelBox& r) {
  return (r.right() - r.x) * (r.bottom() - r.y);
}

constexpr std::array<int, 4> kFullGroup = {0, 90, 180, 270};
constexpr std::array<int, 2> kHalfGroup = {0, 90};
constexpr std::array<int, 1> kTrivialGroup = {0};

constexpr std::array<Category, 3> kInjection = {
    Category::kHook, Category::kBoss, Category::kUndercut};
constexpr std::array<Category, 4> kPress = {
    Category::kDps, Category::kEmboScrewless, Category::kEmboBurring,
    Category::kEmbo};

}  // namespace

PixelBox make_box(double x, double y, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw DataError(fmt::format("degenerate box [{}, {}, {}, {}]", x, y, w, h));
  }
  return {x, y, w, h};
}

bool box_within(const PixelBox& box, double width, double height) {
  return box.x >= -kBoundsEps && box.y >= -kBoundsEps &&
         box.right() <= width + kBoundsEps &&
         box.bottom() <= height + kBoundsEps;
}

double intersection_area(const PixelBox& a, const PixelBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const PixelBox& a, const PixelBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = extent_area(a) + extent_area(b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

int category_id(Category c) { return static_cast<int>(c); }

std::string_view category_name(Category c) {
  switch (c) {
    case Category::kHook: return "Hook";
    case Category::kBoss: return "Boss";
    case Category::kUndercut: return "Undercut";
    case Category::kDps: return "DPS";
    case Category::kEmboScrewless: return "EmboScrewless";
    case Category::kEmboBurring: return "EmboBurring";
    case Category::kEmbo: return "Embo";
  }
  return "?";
}

std::optional<Category> category_from_id(int id) {
  for (Category c : kAllCategories) {
    if (category_id(c) == id) return c;
  }
  return std::nullopt;
}

std::optional<Category> category_from_name(std::string_view name) {
  for (Category c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

Family family_of(Category c) {
  switch (c) {
    case Category::kHook:
    case Category::kBoss:
    case Category::kUndercut:
      return Family::kInjection;
    default:
      return Family::kPress;
  }
}

std::string_view family_name(Family f) {
  return f == Family::kInjection ? "injection" : "press";
}

std::optional<Family> family_from_name(std::string_view name) {
  if (name == "injection") return Family::kInjection;
  if (name == "press") return Family::kPress;
  return std::nullopt;
}

std::span<const Category> categories_of(Family f) {
  if (f == Family::kInjection) return kInjection;
  return kPress;
}

std::span<const int> rotation_group(Category c) {
  switch (c) {
    case Category::kHook:
    case Category::kUndercut:
    case Category::kEmboScrewless:
      return kFullGroup;
    case Category::kDps:
      return kHalfGroup;
    default:
      return kTrivialGroup;
  }
}

bool rotation_variant(Category c) { return rotation_group(c).size() > 1; }

bool in_rotation_group(Category c, int degrees) {
  const auto group = rotation_group(c);
  return std::find(group.begin(), group.end(), degrees) != group.end();
}

Rotation Rotation::make(Category c, int degrees) {
  if (!in_rotation_group(c, degrees)) {
    throw DataError(fmt::format("rotation {} is not distinguishable for {}",
                                degrees, category_name(c)));
  }
  return Rotation(degrees);
}

Rotation Rotation::normalized(Category c, int degrees) {
  if (c == Category::kDps && (degrees == 180 || degrees == 270)) {
    return Rotation(degrees - 180);
  }
  return make(c, degrees);
}

Annotation make_annotation(std::int64_t id, ImageId image_id,
                           const PixelBox& box, Category category,
                           int rotation_degrees) {
  Annotation a;
  a.id = id;
  a.image_id = image_id;
  a.box = make_box(box.x, box.y, box.w, box.h);
  a.category = category;
  a.rotation = Rotation::make(category, rotation_degrees);
  return a;
}

Detection to_global(const Detection& det, Origin origin, int drawing_w,
                    int drawing_h) {
  Detection out = det;
  out.box.x += origin.x;
  out.box.y += origin.y;
  if (!box_within(out.box, drawing_w, drawing_h)) {
    throw DataError(fmt::format(
        "remapped box [{}, {}, {}, {}] leaves the {}x{} drawing", out.box.x,
        out.box.y, out.box.w, out.box.h, drawing_w, drawing_h));
  }
  return out;
}

Detection to_local(const Detection& det, Origin origin) {
  Detection out = det;
  out.box.x -= origin.x;
  out.box.y -= origin.y;
  return out;
}

double visible_fraction(const PixelBox& box, const PixelBox& window) {
  if (!box.valid()) return 0.0;
  return std::clamp(intersection_area(box, window) / extent_area(box), 0.0, 1.0);
}

double visible_fraction(const PixelBox& box, const Tile& tile) {
  return visible_fraction(box, tile.box());
}

}  // namespace moldscan
