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

#ifndef MOLDSCAN_SYNTHGEN_H_
#define MOLDSCAN_SYNTHGEN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/dataset.h"
#include "moldscan/detect.h"
#include "moldscan/error.h"
#include "moldscan/image.h"

namespace moldscan {

// Procedural black-on-white part glyphs. Each glyph's symmetry matches its
// category's rotation group: Boss, Embo and EmboBurring are invariant under
// quarter turns, DPS under half turns only, and Hook, Undercut and
// EmboScrewless under none.
class GlyphLibrary {
 public:
  GlyphLibrary();
  // Nominal side in pixels; must be even and at least 8.
  GlyphLibrary(int injection_size, int press_size);

  int nominal_size(Category c) const;
  // Unrotated glyph, cropped to its ink bounding box.
  const Raster& base(Category c) const;
  // The base glyph turned clockwise by `degrees` (any multiple of 90).
  Raster render(Category c, int degrees) const;

 private:
  int injection_size_;
  int press_size_;
  std::map<Category, Raster> bases_;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int width = 4000;
  int height = 2400;
  int parts = 25;
  // Relative category weights; an empty map means all seven equally.
  std::map<Category, double> mix;
  // Minimum clear gap between part boxes, and between parts and clutter.
  int min_separation = 32;
  // Keeps parts away from the drawing border and its frame.
  int margin = 80;
  bool clutter = true;
  int max_retries = 5000;
};

struct SynthDrawing {
  Raster image;  // gray
  std::vector<Annotation> annotations;
};

class PlacementError : public Error {
 public:
  PlacementError(const std::string& what, int achieved) : Error(what), achieved_(achieved) {}
  int achieved() const { return achieved_; }

 private:
  int achieved_;
};

// Deterministic for a given (config, library, image id). Annotation ids
// start at `first_annotation_id`.
SynthDrawing generate_drawing(const SynthConfig& cfg, const GlyphLibrary& library,
                              ImageId image_id, std::int64_t first_annotation_id = 1);

struct SplitManifest {
  std::uint64_t seed = 0;
  double train_fraction = 0.75;
  std::vector<ImageId> train;
  std::vector<ImageId> test;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<Raster> images;  // parallel to dataset.images
  SplitManifest manifest;
};

// Image ids run 1..n; the first round(n * train_fraction) drawings form the
// training split.
SyntheticDataset generate_dataset(std::span<const SynthConfig> configs,
                                  const GlyphLibrary& library,
                                  double train_fraction = 0.75);

// One config per drawing, seeds derived from `seed`.
std::vector<SynthConfig> make_config_set(const SynthConfig& base, int count,
                                         std::uint64_t seed);

// Writes images/<id>.png, dataset.json and manifest.json under `dir`.
void write_synthetic_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

// One template per (category, rotation) in the family's rotation groups.
TemplateBank export_template_bank(const GlyphLibrary& library, Family family);

}  // namespace moldscan

#endif  // MOLDSCAN_SYNTHGEN_H_
