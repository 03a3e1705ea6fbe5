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

#ifndef MOLDSCAN_CORE_H_
#define MOLDSCAN_CORE_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace moldscan {

using ImageId = std::int64_t;

// Axis-aligned box in continuous pixel coordinates. Area is w*h; there is no
// inclusive-pixel +1 convention.
struct PixelBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

// Throws DataError unless w > 0 and h > 0.
PixelBox make_box(double x, double y, double w, double h);

// True when the box lies inside [0, width] x [0, height].
bool box_within(const PixelBox& box, double width, double height);

double intersection_area(const PixelBox& a, const PixelBox& b);
double iou(const PixelBox& a, const PixelBox& b);

enum class Family { kInjection, kPress };

// Ids are stable and appear in dataset files.
enum class Category : int {
  kHook = 1,
  kBoss = 2,
  kUndercut = 3,
  kDps = 4,
  kEmboScrewless = 5,
  kEmboBurring = 6,
  kEmbo = 7,
};

inline constexpr std::array<Category, 7> kAllCategories = {
    Category::kHook,          Category::kBoss,        Category::kUndercut,
    Category::kDps,           Category::kEmboScrewless, Category::kEmboBurring,
    Category::kEmbo};

int category_id(Category c);
std::string_view category_name(Category c);
std::optional<Category> category_from_id(int id);
std::optional<Category> category_from_name(std::string_view name);

Family family_of(Category c);
std::string_view family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);
std::span<const Category> categories_of(Family f);

// Distinguishable rotations in degrees: {0,90,180,270}, {0,90} or {0}.
std::span<const int> rotation_group(Category c);
bool rotation_variant(Category c);
bool in_rotation_group(Category c, int degrees);

// Degrees of a valid rotation for `c`, bound to it at construction.
class Rotation {
 public:
  // Throws DataError when `degrees` is not in rotation_group(c).
  static Rotation make(Category c, int degrees);
  // Folds 180/270 onto 0/90 for DPS, whose appearance is 2-fold; every other
  // category must already be in its group.
  static Rotation normalized(Category c, int degrees);
  static Rotation zero() { return Rotation(0); }

  int degrees() const { return degrees_; }
  friend bool operator==(const Rotation&, const Rotation&) = default;

 private:
  explicit Rotation(int degrees) : degrees_(degrees) {}
  int degrees_;
};

struct Annotation {
  std::int64_t id = 0;
  ImageId image_id = 0;
  PixelBox box;
  Category category = Category::kHook;
  Rotation rotation = Rotation::zero();
};

// Validates box and rotation membership.
Annotation make_annotation(std::int64_t id, ImageId image_id,
                           const PixelBox& box, Category category,
                           int rotation_degrees);

struct Detection {
  PixelBox box;
  Category category = Category::kHook;
  double score = 0.0;
  std::optional<Rotation> rotation;
  std::optional<int> source_tile;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Origin {
  int x = 0;
  int y = 0;
};

// A crop window in drawing coordinates.
struct Tile {
  int index = 0;
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  Origin origin() const { return {x0, y0}; }
  PixelBox box() const {
    return {static_cast<double>(x0), static_cast<double>(y0),
            static_cast<double>(w), static_cast<double>(h)};
  }
  friend bool operator==(const Tile&, const Tile&) = default;
};

// Translates a tile-local detection into drawing coordinates. Throws
// DataError if the result leaves the drawing, which means the tile plan and
// drawing disagree.
Detection to_global(const Detection& det, Origin origin, int drawing_w,
                    int drawing_h);
Detection to_local(const Detection& det, Origin origin);

// area(box ∩ tile) / area(box).
double visible_fraction(const PixelBox& box, const Tile& tile);
double visible_fraction(const PixelBox& box, const PixelBox& window);

}  // namespace moldscan

#endif  // MOLDSCAN_CORE_H_
