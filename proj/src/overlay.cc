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

#include "moldscan/overlay.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <map>

namespace moldscan {
namespace {

using GlyphRows = std::array<std::uint8_t, 7>;

// Rows top to bottom; bit 4 is the leftmost column.
const std::map<char32_t, GlyphRows>& font() {
  static const std::map<char32_t, GlyphRows> kFont = {
      {U' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {U'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {U'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {U'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {U'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {U'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {U'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {U'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {U'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {U'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {U'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {U'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {U'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {U'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {U'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {U'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {U'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {U'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {U'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {U'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {U'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {U'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {U'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {U'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {U'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {U'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
      {U'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {U'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
      {U'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1E}},
      {U'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}},
      {U'd', {0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F}},
      {U'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
      {U'f', {0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08}},
      {U'g', {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
      {U'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {U'i', {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}},
      {U'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C}},
      {U'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
      {U'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {U'm', {0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11}},
      {U'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {U'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
      {U'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
      {U'q', {0x00, 0x00, 0x0D, 0x13, 0x0F, 0x01, 0x01}},
      {U'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {U's', {0x00, 0x00, 0x0E, 0x10, 0x0E, 0x01, 0x1E}},
      {U't', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
      {U'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}},
      {U'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {U'w', {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A}},
      {U'x', {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
      {U'y', {0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
      {U'z', {0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F}},
      {U'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {U'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {U'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {U'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {U'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {U'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {U'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {U'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {U'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {U'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {U'°', {0x0C, 0x12, 0x12, 0x0C, 0x00, 0x00, 0x00}},
      {U'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
      {U'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {U',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
      {U'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {U'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
      {U':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {U'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
      {U'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {U')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {U'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {U'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
  };
  return kFont;
}

// Lenient UTF-8 decode; malformed bytes become U+FFFD.
std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = c < 0x80 ? 0 : (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xE ? 2 : (c >> 3) == 0x1E ? 3 : -1;
    if (extra < 0 || i + static_cast<std::size_t>(extra) >= s.size() + (extra == 0)) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    char32_t cp = extra == 0 ? c : c & (0x3F >> extra);
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((cc >> 6) != 0x2) ok = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(ok ? cp : U'�');
    i += static_cast<std::size_t>(ok ? extra + 1 : 1);
  }
  return out;
}

constexpr int kAdvance = 6;  // 5 columns plus one of spacing

void put(Raster& rgb, int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= rgb.width || y >= rgb.height) return;
  rgb.at(x, y, 0) = c.r;
  rgb.at(x, y, 1) = c.g;
  rgb.at(x, y, 2) = c.b;
}

void fill(Raster& rgb, int x0, int y0, int w, int h, Rgb c) {
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) put(rgb, x, y, c);
  }
}

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct ItemLayout {
  Rect outline;
  Rect tag;
  std::string text;
  Rgb color;
};

struct LegendLayout {
  Rect block;
  std::vector<Rect> swatches;
  std::vector<std::pair<int, int>> text_at;
  std::vector<std::string> labels;
  std::vector<Rgb> colors;
};

constexpr int kPad = 2;

ItemLayout layout_item(const OverlayItem& item, const OverlayStyle& style, int height) {
  ItemLayout l;
  const int x0 = static_cast<int>(std::floor(item.box.x));
  const int y0 = static_cast<int>(std::floor(item.box.y));
  const int x1 = static_cast<int>(std::ceil(item.box.right()));
  const int y1 = static_cast<int>(std::ceil(item.box.bottom()));
  l.outline = {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
  l.text = overlay_tag(item, style);
  l.color = family_color(family_of(item.category));
  const int tw = text_width(l.text, style.text_scale) + 2 * kPad;
  const int th = text_height(style.text_scale) + 2 * kPad;
  const int above = y0 - th;
  l.tag = {x0, above >= 0 || y1 + th > height ? above : y1, tw, th};
  return l;
}

LegendLayout layout_legend(const OverlayStyle& style) {
  LegendLayout l;
  const int th = text_height(style.text_scale);
  const int sw = th;
  int width = 0;
  int y = 8 + 2 * kPad;
  for (Family f : {Family::kInjection, Family::kPress}) {
    const std::string label(family_name(f));
    l.swatches.push_back({8 + 2 * kPad, y, sw, th});
    l.text_at.emplace_back(8 + 3 * kPad + sw + 2 * style.text_scale, y);
    l.labels.push_back(label);
    l.colors.push_back(family_color(f));
    width = std::max(width, sw + 2 * style.text_scale + kPad + text_width(label, style.text_scale));
    y += th + 2 * kPad;
  }
  l.block = {8, 8, width + 4 * kPad, y - 8 + kPad};
  return l;
}

PixelBox clip(const Rect& r, int width, int height) {
  const int x0 = std::clamp(r.x, 0, width), y0 = std::clamp(r.y, 0, height);
  const int x1 = std::clamp(r.x + r.w, 0, width), y1 = std::clamp(r.y + r.h, 0, height);
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0),
          static_cast<double>(y1 - y0)};
}

}  // namespace

Rgb family_color(Family family) {
  return family == Family::kInjection ? Rgb{220, 30, 30} : Rgb{30, 70, 220};
}

std::vector<OverlayItem> overlay_items(std::span<const Detection> detections) {
  std::vector<OverlayItem> out;
  for (const Detection& d : detections) out.push_back({d.box, d.category, d.rotation, d.score});
  return out;
}

std::vector<OverlayItem> overlay_items(std::span<const Annotation> annotations) {
  std::vector<OverlayItem> out;
  for (const Annotation& a : annotations) {
    out.push_back({a.box, a.category, a.rotation, std::nullopt});
  }
  return out;
}

std::string overlay_tag(const OverlayItem& item, const OverlayStyle& style) {
  std::string tag(category_name(item.category));
  tag += item.rotation ? fmt::format(" {}°", item.rotation->degrees()) : " ?";
  if (style.show_scores && item.score) tag += fmt::format(" {:.2f}", *item.score);
  return tag;
}

int text_width(std::string_view text, int scale) {
  const auto n = static_cast<int>(decode_utf8(text).size());
  return n == 0 ? 0 : (n * kAdvance - 1) * scale;
}

int text_height(int scale) { return 7 * scale; }

void draw_text(Raster& rgb, int x, int y, std::string_view text, Rgb color, int scale) {
  const auto& glyphs = font();
  int pen = x;
  for (char32_t cp : decode_utf8(text)) {
    auto it = glyphs.find(cp);
    if (it == glyphs.end()) it = glyphs.find(U'?');
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (it->second[static_cast<std::size_t>(row)] & (0x10 >> col)) {
          fill(rgb, pen + col * scale, y + row * scale, scale, scale, color);
        }
      }
    }
    pen += kAdvance * scale;
  }
}

std::vector<PixelBox> overlay_footprint(int width, int height, std::span<const OverlayItem> items,
                                        const OverlayStyle& style) {
  std::vector<PixelBox> out;
  for (const OverlayItem& item : items) {
    const ItemLayout l = layout_item(item, style, height);
    out.push_back(clip(l.outline, width, height));
    out.push_back(clip(l.tag, width, height));
  }
  if (style.legend) out.push_back(clip(layout_legend(style).block, width, height));
  std::erase_if(out, [](const PixelBox& b) { return b.w <= 0 || b.h <= 0; });
  return out;
}

Raster render_overlay(const Raster& image, std::span<const OverlayItem> items,
                      const OverlayStyle& style) {
  Raster out = to_rgb(image);
  const Rgb white{255, 255, 255}, black{0, 0, 0};
  for (const OverlayItem& item : items) {
    const ItemLayout l = layout_item(item, style, out.height);
    const Rect& r = l.outline;
    const int t = std::max(1, std::min({style.thickness, r.w, r.h}));
    fill(out, r.x, r.y, r.w, t, l.color);
    fill(out, r.x, r.y + r.h - t, r.w, t, l.color);
    fill(out, r.x, r.y, t, r.h, l.color);
    fill(out, r.x + r.w - t, r.y, t, r.h, l.color);
    fill(out, l.tag.x, l.tag.y, l.tag.w, l.tag.h, l.color);
    draw_text(out, l.tag.x + kPad, l.tag.y + kPad, l.text, white, style.text_scale);
  }
  if (style.legend) {
    const LegendLayout l = layout_legend(style);
    fill(out, l.block.x, l.block.y, l.block.w, l.block.h, black);
    fill(out, l.block.x + 1, l.block.y + 1, l.block.w - 2, l.block.h - 2, white);
    for (std::size_t i = 0; i < l.labels.size(); ++i) {
      const Rect& s = l.swatches[i];
      fill(out, s.x, s.y, s.w, s.h, l.colors[i]);
      draw_text(out, l.text_at[i].first, l.text_at[i].second, l.labels[i], black,
                style.text_scale);
    }
  }
  return out;
}

}  // namespace moldscan
