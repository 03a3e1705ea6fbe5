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

#include "moldscan/tiler.h"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "moldscan/dataset_io.h"
#include "moldscan/error.h"
#include "moldscan/util.h"

namespace moldscan {

namespace {

int stride_for(int window, double overlap) {
  const double raw = static_cast<double>(window) * (1.0 - overlap);
  return std::max(1, static_cast<int>(std::floor(raw + 0.5)));
}

}  // namespace

std::string_view tile_mode_name(TileMode mode) {
  return mode == TileMode::kTrainingCrop ? "training" : "inference";
}

std::optional<TileMode> tile_mode_from_name(std::string_view name) {
  if (name == "training") return TileMode::kTrainingCrop;
  if (name == "inference") return TileMode::kInference;
  return std::nullopt;
}

int TilerConfig::stride_x() const { return stride_for(tile_w, overlap); }
int TilerConfig::stride_y() const { return stride_for(tile_h, overlap); }

void TilerConfig::validate() const {
  if (tile_w < 1 || tile_h < 1) {
    throw ConfigError(fmt::format("tile size {}x{} must be positive", tile_w, tile_h));
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw ConfigError(fmt::format("overlap {} outside [0, 1)", overlap));
  }
  if (!(visibility_threshold > 0.0 && visibility_threshold <= 1.0)) {
    throw ConfigError(
        fmt::format("visibility threshold {} outside (0, 1]", visibility_threshold));
  }
}

TilerConfig TilerConfig::defaults(Family family, TileMode mode) {
  TilerConfig cfg;
  if (family == Family::kPress) {
    cfg.tile_w = 2666;
    cfg.tile_h = 1600;
  }
  cfg.mode = mode;
  cfg.overlap = mode == TileMode::kTrainingCrop ? 0.9 : 0.2;
  cfg.visibility_threshold = 0.7;
  return cfg;
}

std::vector<int> axis_offsets(int extent, int window, int stride) {
  if (extent <= window) return {0};
  std::vector<int> offsets;
  int pos = 0;
  for (; pos + window <= extent; pos += stride) offsets.push_back(pos);
  if (offsets.back() + window < extent) offsets.push_back(extent - window);
  return offsets;
}

TilePlan plan_tiles(ImageId drawing_id, int width, int height,
                    const TilerConfig& config) {
  if (width < 1 || height < 1) {
    throw DataError(fmt::format("drawing {} has zero size {}x{}", drawing_id, width,
                                height));
  }
  config.validate();
  TilePlan plan;
  plan.drawing_id = drawing_id;
  plan.width = width;
  plan.height = height;
  plan.config = config;
  const int tw = std::min(config.tile_w, width);
  const int th = std::min(config.tile_h, height);
  const auto xs = axis_offsets(width, config.tile_w, config.stride_x());
  const auto ys = axis_offsets(height, config.tile_h, config.stride_y());
  plan.tiles.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) {
      plan.tiles.push_back(Tile{static_cast<int>(plan.tiles.size()), x, y, tw, th});
    }
  }
  return plan;
}

Raster extract_tile(const Raster& image, const Tile& tile) {
  return crop(image, tile.x0, tile.y0, tile.w, tile.h);
}

std::vector<Annotation> assign_annotations(std::span<const Annotation> annotations,
                                           const Tile& tile, double theta) {
  std::vector<Annotation> out;
  const PixelBox window = tile.box();
  for (const Annotation& a : annotations) {
    const double visible = visible_fraction(a.box, window);
    if (visible <= 0.0 || visible < theta) continue;
    Annotation local = a;
    const double x0 = std::max(a.box.x, window.x);
    const double y0 = std::max(a.box.y, window.y);
    const double x1 = std::min(a.box.right(), window.right());
    const double y1 = std::min(a.box.bottom(), window.bottom());
    local.box = {x0 - tile.x0, y0 - tile.y0, x1 - x0, y1 - y0};
    out.push_back(local);
  }
  return out;
}

CropExportReport export_crop_dataset(const Dataset& dataset,
                                     const std::filesystem::path& image_root,
                                     const TilerConfig& config,
                                     const std::filesystem::path& out,
                                     int threads) {
  config.validate();
  CropExportReport report;
  const auto by_image = dataset.annotations_by_image();
  std::int64_t next_ann_id = 1;
  for (const ImageRecord& record : dataset.images) {
    Raster image;
    try {
      image = load_png(image_root / record.file_name);
      if (image.width != record.width || image.height != record.height) {
        throw DataError(fmt::format("{} is {}x{}, dataset says {}x{}", record.file_name,
                                    image.width, image.height, record.width,
                                    record.height));
      }
    } catch (const Error& e) {
      report.drawing_errors.push_back(fmt::format("image {}: {}", record.id, e.what()));
      continue;
    }
    static const std::vector<Annotation> kNone;
    const auto it = by_image.find(record.id);
    const auto& anns = it == by_image.end() ? kNone : it->second;
    const TilePlan plan = plan_tiles(record.id, image.width, image.height, config);

    std::vector<std::vector<Annotation>> per_tile(plan.tiles.size());
    for (std::size_t i = 0; i < plan.tiles.size(); ++i) {
      per_tile[i] = assign_annotations(anns, plan.tiles[i], config.visibility_threshold);
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < plan.tiles.size(); ++i) {
      if (config.mode == TileMode::kInference || !per_tile[i].empty()) keep.push_back(i);
    }
    parallel_for(keep.size(), threads, [&](std::size_t k) {
      const Tile& tile = plan.tiles[keep[k]];
      save_png(out / "tiles" / std::to_string(record.id) /
                   (std::to_string(tile.index) + ".png"),
               extract_tile(image, tile));
    });
    for (std::size_t i : keep) {
      const Tile& tile = plan.tiles[i];
      ImageRecord crop_record;
      crop_record.id = static_cast<ImageId>(report.crops.images.size() + 1);
      crop_record.file_name =
          fmt::format("tiles/{}/{}.png", record.id, tile.index);
      crop_record.width = tile.w;
      crop_record.height = tile.h;
      crop_record.source = TileProvenance{record.id, tile.index, tile.x0, tile.y0};
      for (Annotation a : per_tile[i]) {
        a.id = next_ann_id++;
        a.image_id = crop_record.id;
        report.crops.annotations.push_back(a);
      }
      report.crops.images.push_back(std::move(crop_record));
      ++report.tiles_written;
    }
  }
  save_dataset(report.crops, out / "crops.json");
  return report;
}

}  // namespace moldscan
