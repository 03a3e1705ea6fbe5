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

#ifndef MOLDSCAN_OVERLAY_H_
#define MOLDSCAN_OVERLAY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/image.h"

namespace moldscan {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Red for injection parts, blue for press parts.
Rgb family_color(Family family);

struct OverlayItem {
  PixelBox box;
  Category category = Category::kHook;
  std::optional<Rotation> rotation;
  std::optional<double> score;
};

std::vector<OverlayItem> overlay_items(std::span<const Detection> detections);
std::vector<OverlayItem> overlay_items(std::span<const Annotation> annotations);

struct OverlayStyle {
  int thickness = 2;
  int text_scale = 2;
  bool show_scores = false;
  bool legend = true;
};

// "<category> <rotation>°", "?" for a missing rotation, then the score when
// show_scores is set.
std::string overlay_tag(const OverlayItem& item, const OverlayStyle& style);

// Built-in 5x7 bitmap font; UTF-8 input, unknown characters print as '?'.
int text_width(std::string_view text, int scale);
int text_height(int scale);
void draw_text(Raster& rgb, int x, int y, std::string_view text, Rgb color, int scale);

// Every rectangle render_overlay may write to, clipped to the image.
std::vector<PixelBox> overlay_footprint(int width, int height, std::span<const OverlayItem> items,
                                        const OverlayStyle& style);

// RGB copy of `image` with one outline and tag per item and a legend block.
Raster render_overlay(const Raster& image, std::span<const OverlayItem> items,
                      const OverlayStyle& style = {});

}  // namespace moldscan

#endif  // MOLDSCAN_OVERLAY_H_
