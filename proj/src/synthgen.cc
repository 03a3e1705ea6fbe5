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

#include "moldscan/synthgen.h"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <random>

#include "moldscan/dataset_io.h"
#include "moldscan/error.h"
#include "moldscan/util.h"

namespace moldscan {
namespace {

constexpr std::uint8_t kInk = 0;
constexpr std::uint8_t kBackground = 255;

using Shape = std::function<bool(double u, double v)>;

// u runs left to right and v top to bottom, both in (-1, 1); pixel centers
// are symmetric about the origin, so quarter turns map the grid onto itself.
Raster rasterize(int n, const Shape& inside) {
  Raster r(n, n, 1, kBackground);
  const double half = n / 2.0;
  for (int j = 0; j < n; ++j) {
    const double v = (j + 0.5 - half) / half;
    for (int i = 0; i < n; ++i) {
      const double u = (i + 0.5 - half) / half;
      if (inside(u, v)) r.at(i, j) = kInk;
    }
  }
  return r;
}

Raster crop_to_ink(const Raster& r) {
  int x0 = r.width, y0 = r.height, x1 = -1, y1 = -1;
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      if (r.at(x, y) != kBackground) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) throw ContractError("glyph has no ink");
  return crop(r, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
}

bool ring(double r, double lo, double hi) { return r >= lo && r <= hi; }

Shape shape_of(Category c) {
  switch (c) {
    case Category::kBoss:
      return [](double u, double v) {
        const double r = std::hypot(u, v);
        return ring(r, 0.8, 1.0) || ring(r, 0.3, 0.5);
      };
    case Category::kEmbo:
      return [](double u, double v) { return std::hypot(u, v) <= 1.0; };
    case Category::kEmboBurring:
      return [](double u, double v) {
        const double r = std::hypot(u, v);
        return ring(r, 0.82, 1.0) || r <= 0.5;
      };
    case Category::kDps:
      return [](double u, double v) {
        const bool bar = std::abs(v) <= 0.3;
        const bool left = u <= -0.65 && v <= 0.0;
        const bool right = u >= 0.65 && v >= 0.0;
        return bar || left || right;
      };
    case Category::kHook:
      return [](double u, double v) {
        const bool stem = u <= -0.55;
        const bool base = v >= 0.55;
        const bool lip = u >= 0.55 && v >= 0.1;
        const bool barb = v <= -0.65 && u <= 0.2;
        return stem || base || lip || barb;
      };
    case Category::kUndercut:
      return [](double u, double v) {
        const bool frame = std::max(std::abs(u), std::abs(v)) >= 0.78;
        const bool gap = u < 0.0 && std::abs(v) < 0.3;
        const bool block = u >= 0.1 && u <= 0.55 && v >= -0.55 && v <= -0.1;
        return (frame && !gap) || block;
      };
    case Category::kEmboScrewless:
      return [](double u, double v) {
        const double r = std::hypot(u, v);
        const bool tab = u >= 0.0 && u <= 0.78 && std::abs(v) <= 0.18;
        return ring(r, 0.78, 1.0) || tab || r <= 0.28;
      };
  }
  throw ContractError("unknown category");
}

// splitmix64 finalizer; decorrelates derived seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Portable draws from the standardized engine; std distributions are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [lo, hi].
  int range(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

bool too_close(const PixelBox& a, const PixelBox& b, double gap) {
  return a.x < b.right() + gap && b.x < a.right() + gap && a.y < b.bottom() + gap &&
         b.y < a.bottom() + gap;
}

void fill_rect(Raster& r, int x0, int y0, int w, int h) {
  for (int y = std::max(0, y0); y < std::min(r.height, y0 + h); ++y) {
    for (int x = std::max(0, x0); x < std::min(r.width, x0 + w); ++x) r.at(x, y) = kInk;
  }
}

void draw_frame(Raster& r, int inset, int thickness) {
  const int w = r.width - 2 * inset, h = r.height - 2 * inset;
  if (w <= 2 * thickness || h <= 2 * thickness) return;
  fill_rect(r, inset, inset, w, thickness);
  fill_rect(r, inset, inset + h - thickness, w, thickness);
  fill_rect(r, inset, inset, thickness, h);
  fill_rect(r, inset + w - thickness, inset, thickness, h);
}

// Thin dimension-like strokes with end ticks, kept clear of every part.
void draw_dimension_lines(Raster& r, const std::vector<PixelBox>& parts, int margin, double gap,
                          Rng& rng) {
  const int lo_x = margin / 2, hi_x = r.width - margin / 2;
  const int lo_y = margin / 2, hi_y = r.height - margin / 2;
  if (hi_x - lo_x < 40 || hi_y - lo_y < 40) return;
  const int wanted = 12 + static_cast<int>(r.width * r.height / 1'000'000);
  int drawn = 0;
  for (int attempt = 0; attempt < wanted * 20 && drawn < wanted; ++attempt) {
    const bool horizontal = rng.uniform() < 0.5;
    const int len = rng.range(40, std::max(41, (horizontal ? hi_x - lo_x : hi_y - lo_y) / 3));
    int x0, y0, w, h;
    if (horizontal) {
      if (hi_x - lo_x <= len) continue;
      x0 = rng.range(lo_x, hi_x - len);
      y0 = rng.range(lo_y + 4, hi_y - 5);
      w = len;
      h = 1;
    } else {
      if (hi_y - lo_y <= len) continue;
      x0 = rng.range(lo_x + 4, hi_x - 5);
      y0 = rng.range(lo_y, hi_y - len);
      w = 1;
      h = len;
    }
    const PixelBox footprint{static_cast<double>(horizontal ? x0 : x0 - 4),
                             static_cast<double>(horizontal ? y0 - 4 : y0),
                             static_cast<double>(horizontal ? w : 9),
                             static_cast<double>(horizontal ? 9 : h)};
    const bool clear = std::none_of(parts.begin(), parts.end(), [&](const PixelBox& p) {
      return too_close(footprint, p, gap);
    });
    if (!clear) continue;
    fill_rect(r, x0, y0, w, h);
    if (horizontal) {
      fill_rect(r, x0, y0 - 4, 1, 9);
      fill_rect(r, x0 + w - 1, y0 - 4, 1, 9);
    } else {
      fill_rect(r, x0 - 4, y0, 9, 1);
      fill_rect(r, x0 - 4, y0 + h - 1, 9, 1);
    }
    ++drawn;
  }
}

Category pick_category(const std::vector<std::pair<Category, double>>& weights, double total,
                       Rng& rng) {
  double x = rng.uniform() * total;
  for (const auto& [c, w] : weights) {
    if (x < w) return c;
    x -= w;
  }
  return weights.back().first;
}

}  // namespace

GlyphLibrary::GlyphLibrary() : GlyphLibrary(48, 64) {}

GlyphLibrary::GlyphLibrary(int injection_size, int press_size)
    : injection_size_(injection_size), press_size_(press_size) {
  for (int s : {injection_size, press_size}) {
    if (s < 8 || s % 2 != 0) throw ConfigError(fmt::format("glyph size {} must be even and >= 8", s));
  }
  for (Category c : kAllCategories) bases_[c] = crop_to_ink(rasterize(nominal_size(c), shape_of(c)));
}

int GlyphLibrary::nominal_size(Category c) const {
  return family_of(c) == Family::kInjection ? injection_size_ : press_size_;
}

const Raster& GlyphLibrary::base(Category c) const { return bases_.at(c); }

Raster GlyphLibrary::render(Category c, int degrees) const {
  if (degrees % 90 != 0) throw DataError(fmt::format("rotation {} is not a quarter turn", degrees));
  return rotate_quarter_turns(base(c), ((degrees / 90) % 4 + 4) % 4);
}

SynthDrawing generate_drawing(const SynthConfig& cfg, const GlyphLibrary& library,
                              ImageId image_id, std::int64_t first_annotation_id) {
  int largest = 0;
  for (Category c : kAllCategories) largest = std::max(largest, library.nominal_size(c));
  if (cfg.parts < 0) throw ConfigError("parts must be non-negative");
  if (cfg.margin < 0 || cfg.min_separation < 0) {
    throw ConfigError("margin and min_separation must be non-negative");
  }
  if (cfg.max_retries < 1) throw ConfigError("max_retries must be positive");
  if (cfg.width < largest + 2 * cfg.margin || cfg.height < largest + 2 * cfg.margin) {
    throw ConfigError(fmt::format("drawing {}x{} too small for glyphs of {} with margin {}",
                                  cfg.width, cfg.height, largest, cfg.margin));
  }
  std::vector<std::pair<Category, double>> weights;
  double total = 0.0;
  for (Category c : kAllCategories) {
    double w = 1.0;
    if (!cfg.mix.empty()) {
      auto it = cfg.mix.find(c);
      w = it == cfg.mix.end() ? 0.0 : it->second;
    }
    if (w < 0.0 || !std::isfinite(w)) throw ConfigError("category weights must be finite and >= 0");
    if (w > 0.0) weights.emplace_back(c, w);
    total += w;
  }
  if (cfg.parts > 0 && weights.empty()) throw ConfigError("category mix has no positive weight");

  Rng rng(cfg.seed);
  SynthDrawing out;
  out.image = Raster(cfg.width, cfg.height, 1, kBackground);
  std::vector<PixelBox> boxes;
  for (int k = 0; k < cfg.parts; ++k) {
    const Category c = pick_category(weights, total, rng);
    const auto group = rotation_group(c);
    const int degrees = group[static_cast<std::size_t>(rng.range(0, static_cast<int>(group.size()) - 1))];
    Raster glyph = library.render(c, degrees);
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      const int x = rng.range(cfg.margin, cfg.width - cfg.margin - glyph.width);
      const int y = rng.range(cfg.margin, cfg.height - cfg.margin - glyph.height);
      const PixelBox box{static_cast<double>(x), static_cast<double>(y),
                         static_cast<double>(glyph.width), static_cast<double>(glyph.height)};
      if (std::any_of(boxes.begin(), boxes.end(),
                      [&](const PixelBox& b) { return too_close(box, b, cfg.min_separation); })) {
        continue;
      }
      paste(out.image, glyph, x, y);
      boxes.push_back(box);
      out.annotations.push_back(
          make_annotation(first_annotation_id + k, image_id, box, c, degrees));
      placed = true;
    }
    if (!placed) {
      throw PlacementError(
          fmt::format("placed {} of {} parts in drawing {} before running out of retries", k,
                      cfg.parts, image_id),
          k);
    }
  }
  if (cfg.clutter) {
    draw_frame(out.image, std::max(2, cfg.margin / 4), 3);
    draw_dimension_lines(out.image, boxes, cfg.margin, cfg.min_separation, rng);
  }
  return out;
}

SyntheticDataset generate_dataset(std::span<const SynthConfig> configs,
                                  const GlyphLibrary& library, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ConfigError(fmt::format("train fraction {} outside [0, 1]", train_fraction));
  }
  SyntheticDataset data;
  data.manifest.seed = configs.empty() ? 0 : configs.front().seed;
  data.manifest.train_fraction = train_fraction;
  const auto n = static_cast<int>(configs.size());
  const int n_train = static_cast<int>(std::lround(n * train_fraction));
  std::int64_t next_ann = 1;
  for (int i = 0; i < n; ++i) {
    const ImageId id = i + 1;
    SynthDrawing d = generate_drawing(configs[static_cast<std::size_t>(i)], library, id, next_ann);
    next_ann += static_cast<std::int64_t>(d.annotations.size());
    data.dataset.images.push_back(
        {id, fmt::format("images/{:06d}.png", id), d.image.width, d.image.height, std::nullopt});
    data.dataset.annotations.insert(data.dataset.annotations.end(), d.annotations.begin(),
                                    d.annotations.end());
    data.images.push_back(std::move(d.image));
    (i < n_train ? data.manifest.train : data.manifest.test).push_back(id);
  }
  return data;
}

std::vector<SynthConfig> make_config_set(const SynthConfig& base, int count, std::uint64_t seed) {
  if (count < 0) throw ConfigError("drawing count must be non-negative");
  std::vector<SynthConfig> out;
  for (int i = 0; i < count; ++i) {
    SynthConfig c = base;
    c.seed = mix64(seed ^ mix64(static_cast<std::uint64_t>(i) + 1));
    out.push_back(c);
  }
  return out;
}

void write_synthetic_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    save_png(dir / data.dataset.images[i].file_name, data.images[i]);
  }
  save_dataset(data.dataset, dir / "dataset.json");
  Json manifest = {{"seed", data.manifest.seed},
                   {"train_fraction", data.manifest.train_fraction},
                   {"train", data.manifest.train},
                   {"test", data.manifest.test}};
  write_file_atomic(dir / "manifest.json", canonical_dump(manifest));
}

TemplateBank export_template_bank(const GlyphLibrary& library, Family family) {
  TemplateBank bank;
  for (Category c : categories_of(family)) {
    for (int degrees : rotation_group(c)) {
      bank.templates.push_back({c, Rotation::make(c, degrees), library.render(c, degrees)});
    }
  }
  return bank;
}

}  // namespace moldscan
