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

#ifndef MOLDSCAN_DETECT_H_
#define MOLDSCAN_DETECT_H_

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/image.h"
#include "moldscan/ncc.h"
#include "moldscan/subprocess.h"
#include "moldscan/tiler.h"

namespace moldscan {

struct TileInput {
  ImageId image_id = 0;
  Tile tile;
  // Gray tile pixels; null for backends that do not read pixels.
  const Raster* pixels = nullptr;
};

// Tile raster in, tile-local scored detections out. Implementations must be
// deterministic for a fixed configuration and input, and safe to call
// concurrently unless single_flight() is true.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string name() const = 0;
  virtual Family family() const = 0;
  virtual std::vector<Detection> detect(const TileInput& input) = 0;
  virtual bool needs_pixels() const { return true; }
  virtual bool single_flight() const { return false; }
};

// Throws ContractError unless every detection has a score in [0, 1], a box
// inside the tile and a category of `family`.
void validate_detections(std::span<const Detection> dets, const Tile& tile, Family family);

struct NoiseConfig {
  double jitter_sigma = 0.0;        // pixels, applied to x, y, w, h
  double drop_probability = 0.0;    // per emitted detection
  double false_positive_rate = 0.0; // expected spurious boxes per tile
  std::uint64_t seed = 0;
};

// One detection per fully visible ground-truth box, score 1.0, with optional
// seeded perturbation. The random stream depends only on (seed, image, tile).
std::vector<Detection> oracle_detect(const Tile& tile, ImageId image_id,
                                     std::span<const Annotation> truth, Family family,
                                     const NoiseConfig& noise);

class OracleDetector : public Detector {
 public:
  OracleDetector(Family family, std::span<const Annotation> truth, NoiseConfig noise = {});
  std::string name() const override { return "oracle"; }
  Family family() const override { return family_; }
  bool needs_pixels() const override { return false; }
  std::vector<Detection> detect(const TileInput& input) override;

 private:
  Family family_;
  NoiseConfig noise_;
  std::map<ImageId, std::vector<Annotation>> truth_;
};

struct Template {
  Category category = Category::kHook;
  Rotation rotation = Rotation::zero();
  Raster raster;  // gray
};

struct TemplateBank {
  std::vector<Template> templates;
  double threshold = 0.8;  // minimum NCC for a detection
  int stride = 1;
  // Same-category peaks overlapping more than this are one part.
  double peak_suppression_iou = 0.2;

  std::vector<Template> for_family(Family family) const;
};

// Normalized cross-correlation detector. Scores are exact NCC values; boxes
// are the template footprint at the peak.
class TemplateDetector : public Detector {
 public:
  TemplateDetector(Family family, TemplateBank bank);
  std::string name() const override { return "template"; }
  Family family() const override { return family_; }
  std::vector<Detection> detect(const TileInput& input) override;

  // One entry per template rejected for being larger than a tile.
  std::vector<std::string> warnings() const;

 private:
  Family family_;
  TemplateBank bank_;
  std::vector<Template> templates_;
  std::unique_ptr<NccMatcher> matcher_;
  mutable std::mutex warn_mu_;
  std::vector<std::string> warnings_;
};

std::vector<Detection> template_detect(const Raster& tile, const TemplateBank& bank,
                                       Family family);

struct ExternalEndpoint {
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{30000};
  int pool_size = 1;
};

// Wire format of the external-detector protocol, one JSON object per line.
std::string encode_detect_request(std::int64_t id, const Raster& gray);
// Throws ContractError on malformed lines, id mismatch, unknown categories or
// invalid values; the result is validated against the tile.
std::vector<Detection> parse_detect_response(const std::string& line, std::int64_t id,
                                             const Tile& tile, Family family);

class ExternalDetector : public Detector {
 public:
  ExternalDetector(Family family, ExternalEndpoint endpoint);
  std::string name() const override { return "external"; }
  Family family() const override { return family_; }
  bool single_flight() const override { return pool_.size() == 1; }
  std::vector<Detection> detect(const TileInput& input) override;

 private:
  Family family_;
  ProcessPool pool_;
};

struct TileOutcome {
  int tile_index = 0;
  std::vector<Detection> detections;
  std::optional<std::string> error;
};

// Runs the detector once per tile. Results are ordered by tile index and do
// not depend on the worker count. A failing tile records its error and the
// batch continues. `gray` may be empty when the detector needs no pixels.
std::vector<TileOutcome> detect_tiles(const TilePlan& plan, ImageId image_id,
                                      const Raster& gray, Detector& detector,
                                      int threads = 1);

}  // namespace moldscan

#endif  // MOLDSCAN_DETECT_H_
