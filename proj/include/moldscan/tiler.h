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

#ifndef MOLDSCAN_TILER_H_
#define MOLDSCAN_TILER_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/dataset.h"
#include "moldscan/image.h"

namespace moldscan {

enum class TileMode { kTrainingCrop, kInference };

std::string_view tile_mode_name(TileMode mode);
std::optional<TileMode> tile_mode_from_name(std::string_view name);

struct TilerConfig {
  int tile_w = 1333;
  int tile_h = 800;
  // Fraction of the window shared with the previous window position.
  double overlap = 0.9;
  double visibility_threshold = 0.7;
  TileMode mode = TileMode::kTrainingCrop;

  // round-half-up(tile * (1 - overlap)), at least 1.
  int stride_x() const;
  int stride_y() const;

  // Throws ConfigError.
  void validate() const;

  // 1333x800 for injection parts, 2666x1600 for press parts. Training crops
  // overlap 0.9 with threshold 0.7; inference overlaps 0.2.
  static TilerConfig defaults(Family family, TileMode mode);
};

struct TilePlan {
  ImageId drawing_id = 0;
  int width = 0;
  int height = 0;
  TilerConfig config;
  // Row-major: y outer, x inner.
  std::vector<Tile> tiles;
};

// Window offsets along one axis: the stride grid, plus one final window
// clamped to the far edge when the grid falls short. A drawing narrower than
// the window yields a single offset 0.
std::vector<int> axis_offsets(int extent, int window, int stride);

// Throws DataError for a zero-sized drawing.
TilePlan plan_tiles(ImageId drawing_id, int width, int height,
                    const TilerConfig& config);

// Pixel-exact window copy; throws DataError if the tile leaves the image.
Raster extract_tile(const Raster& image, const Tile& tile);

// Annotations at least `theta` visible in the tile, clipped to it and
// translated to tile-local coordinates.
std::vector<Annotation> assign_annotations(std::span<const Annotation> annotations,
                                           const Tile& tile, double theta);

struct CropExportReport {
  Dataset crops;  // one image record per exported tile
  std::size_t tiles_written = 0;
  std::vector<std::string> drawing_errors;
};

// Writes <out>/tiles/<drawing_id>/<tile_index>.png and <out>/crops.json.
// File names in `dataset` resolve against `image_root`. A drawing that fails
// to load is reported and skipped.
CropExportReport export_crop_dataset(const Dataset& dataset,
                                     const std::filesystem::path& image_root,
                                     const TilerConfig& config,
                                     const std::filesystem::path& out,
                                     int threads = 1);

}  // namespace moldscan

#endif  // MOLDSCAN_TILER_H_
