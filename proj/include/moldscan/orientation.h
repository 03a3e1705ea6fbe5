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

#ifndef MOLDSCAN_ORIENTATION_H_
#define MOLDSCAN_ORIENTATION_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/detect.h"
#include "moldscan/image.h"
#include "moldscan/subprocess.h"

namespace moldscan {

// Composite (category, rotation) labels of the rotation-variant parts.
// Injection: Hook0..Hook270, Undercut0..Undercut270 (8 labels).
// Press: DPS0, DPS90, ES0..ES270 (6 labels).
struct CompositeLabel {
  Category category;
  int degrees;
};

std::span<const CompositeLabel> label_space(Family family);
std::string label_name(const CompositeLabel& label);

// Throws DataError for symmetric categories or rotations outside the group.
int encode_label(Category category, Rotation rotation);
// Throws DataError for an index outside the family's label space.
std::pair<Category, Rotation> decode_label(Family family, int index);

struct OrientationCropConfig {
  int target_side = 224;
  double padding = 0.1;  // context fraction per side
  std::uint8_t fill = 255;

  void validate() const;
};

// Bilinear resample with half-pixel centers and edge clamping.
Raster resize_bilinear(const Raster& src, int width, int height);

// Expands the box by `padding` per side (clamped to the image), letterboxes
// it onto a square canvas of `fill`, and resamples to target_side squared.
Raster crop_for_orientation(const Raster& gray, const PixelBox& box,
                            const OrientationCropConfig& cfg);

struct OrientationQuery {
  std::int64_t id = 0;
  ImageId image_id = 0;
  Family family = Family::kInjection;
  Category category = Category::kHook;
  PixelBox box;           // drawing coordinates
  const Raster* patch = nullptr;  // target_side squared, gray
};

struct ClassifyResult {
  int label_index = 0;
  double confidence = 0.0;
  bool below_floor = false;
};

class OrientationClassifier {
 public:
  virtual ~OrientationClassifier() = default;
  virtual std::string name() const = 0;
  virtual ClassifyResult classify(const OrientationQuery& query) = 0;
  virtual bool needs_patch() const { return true; }
  virtual bool single_flight() const { return false; }
};

// Argmax NCC against reference patches built from the bank's templates by
// the same crop path as the queries.
class TemplateClassifier : public OrientationClassifier {
 public:
  TemplateClassifier(const TemplateBank& bank, const OrientationCropConfig& cfg);
  std::string name() const override { return "template"; }
  ClassifyResult classify(const OrientationQuery& query) override;

  const Raster& reference(Family family, int label_index) const;

 private:
  std::map<std::pair<Family, int>, Raster> references_;
};

// Reads the rotation of the best-overlapping ground-truth part.
class OracleClassifier : public OrientationClassifier {
 public:
  explicit OracleClassifier(std::span<const Annotation> truth);
  std::string name() const override { return "oracle"; }
  bool needs_patch() const override { return false; }
  ClassifyResult classify(const OrientationQuery& query) override;

 private:
  std::map<ImageId, std::vector<Annotation>> truth_;
};

std::string encode_classify_request(std::int64_t id, Family family, const Raster& patch);
// Throws ContractError for malformed lines, id mismatch, out-of-range label
// or confidence.
ClassifyResult parse_classify_response(const std::string& line, std::int64_t id,
                                       Family family);

class ExternalClassifier : public OrientationClassifier {
 public:
  explicit ExternalClassifier(ExternalEndpoint endpoint);
  std::string name() const override { return "external"; }
  bool single_flight() const override { return pool_.size() == 1; }
  ClassifyResult classify(const OrientationQuery& query) override;

 private:
  ProcessPool pool_;
};

// Runs the classifier and marks results under `confidence_floor`; throws
// ContractError if the index is outside the family's label space.
ClassifyResult classify_orientation(const OrientationQuery& query,
                                    OrientationClassifier& classifier,
                                    double confidence_floor);

struct OrientationConfig {
  OrientationCropConfig crop;
  double confidence_floor = 0.3;
  int threads = 1;
};

struct OrientationStats {
  std::size_t classified = 0;
  std::size_t symmetric = 0;      // rotation 0 without a classifier call
  std::size_t mismatches = 0;     // label category differed from detection
  std::size_t low_confidence = 0;
  std::size_t failures = 0;       // rotation left absent
  std::vector<std::string> errors;

  OrientationStats& operator+=(const OrientationStats& other);
};

// Sets each detection's rotation. Symmetric categories get 0 without a
// classifier call. For rotation-variant parts the classifier's rotation is
// taken and the detection keeps its own category; disagreement is counted.
std::vector<Detection> assign_orientation(const Raster& gray, ImageId image_id,
                                          std::vector<Detection> detections, Family family,
                                          OrientationClassifier& classifier,
                                          const OrientationConfig& cfg,
                                          OrientationStats* stats = nullptr);

}  // namespace moldscan

#endif  // MOLDSCAN_ORIENTATION_H_
