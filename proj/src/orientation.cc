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

#include "moldscan/orientation.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <mutex>

#include "json.hpp"
#include "moldscan/error.h"
#include "moldscan/ncc.h"
#include "moldscan/util.h"

namespace moldscan {

namespace {

constexpr std::array<CompositeLabel, 8> kInjectionLabels = {{
    {Category::kHook, 0},
    {Category::kHook, 90},
    {Category::kHook, 180},
    {Category::kHook, 270},
    {Category::kUndercut, 0},
    {Category::kUndercut, 90},
    {Category::kUndercut, 180},
    {Category::kUndercut, 270},
}};

constexpr std::array<CompositeLabel, 6> kPressLabels = {{
    {Category::kDps, 0},
    {Category::kDps, 90},
    {Category::kEmboScrewless, 0},
    {Category::kEmboScrewless, 90},
    {Category::kEmboScrewless, 180},
    {Category::kEmboScrewless, 270},
}};

}  // namespace

std::span<const CompositeLabel> label_space(Family family) {
  if (family == Family::kInjection) return kInjectionLabels;
  return kPressLabels;
}

std::string label_name(const CompositeLabel& label) {
  const std::string_view prefix =
      label.category == Category::kEmboScrewless ? "ES" : category_name(label.category);
  return fmt::format("{}{}", prefix, label.degrees);
}

int encode_label(Category category, Rotation rotation) {
  if (!rotation_variant(category)) {
    throw DataError(fmt::format("{} is symmetric and has no orientation label",
                                category_name(category)));
  }
  const auto space = label_space(family_of(category));
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space[i].category == category && space[i].degrees == rotation.degrees()) {
      return static_cast<int>(i);
    }
  }
  throw DataError(fmt::format("no label for {} at {} degrees", category_name(category),
                              rotation.degrees()));
}

std::pair<Category, Rotation> decode_label(Family family, int index) {
  const auto space = label_space(family);
  if (index < 0 || index >= static_cast<int>(space.size())) {
    throw DataError(fmt::format("label {} outside the {}-label {} space", index, space.size(),
                                family_name(family)));
  }
  const CompositeLabel& l = space[static_cast<std::size_t>(index)];
  return {l.category, Rotation::make(l.category, l.degrees)};
}

void OrientationCropConfig::validate() const {
  if (target_side < 1) throw ConfigError("orientation target side must be positive");
  if (!(padding >= 0.0 && padding < 10.0)) {
    throw ConfigError(fmt::format("orientation padding {} out of range", padding));
  }
}

Raster resize_bilinear(const Raster& src, int width, int height) {
  if (src.empty() || width < 1 || height < 1) throw DataError("cannot resize an empty raster");
  if (src.width == width && src.height == height) return src;
  Raster out(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  std::vector<int> x0s(width), x1s(width);
  std::vector<double> fxs(width);
  for (int x = 0; x < width; ++x) {
    double fx = (x + 0.5) * sx - 0.5;
    fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
    x0s[x] = static_cast<int>(std::floor(fx));
    x1s[x] = std::min(x0s[x] + 1, src.width - 1);
    fxs[x] = fx - x0s[x];
  }
  for (int y = 0; y < height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double wx = fxs[x];
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(x0s[x], y0, c) * (1.0 - wx) + src.at(x1s[x], y0, c) * wx;
        const double bottom = src.at(x0s[x], y1, c) * (1.0 - wx) + src.at(x1s[x], y1, c) * wx;
        const double v = top * (1.0 - wy) + bottom * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
      }
    }
  }
  return out;
}

Raster crop_for_orientation(const Raster& gray, const PixelBox& box,
                            const OrientationCropConfig& cfg) {
  cfg.validate();
  const double pad_x = cfg.padding * box.w;
  const double pad_y = cfg.padding * box.h;
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x - pad_x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y - pad_y)));
  const int x1 = std::min(gray.width, static_cast<int>(std::ceil(box.right() + pad_x)));
  const int y1 = std::min(gray.height, static_cast<int>(std::ceil(box.bottom() + pad_y)));
  if (x1 - x0 < 1 || y1 - y0 < 1) {
    throw DataError(fmt::format("orientation crop of [{}, {}, {}, {}] is empty", box.x, box.y,
                                box.w, box.h));
  }
  const Raster region = crop(gray, x0, y0, x1 - x0, y1 - y0);
  const int side = std::max(region.width, region.height);
  Raster canvas(side, side, gray.channels, cfg.fill);
  paste(canvas, region, (side - region.width) / 2, (side - region.height) / 2);
  return resize_bilinear(canvas, cfg.target_side, cfg.target_side);
}

TemplateClassifier::TemplateClassifier(const TemplateBank& bank,
                                       const OrientationCropConfig& cfg) {
  cfg.validate();
  for (Family family : {Family::kInjection, Family::kPress}) {
    const auto space = label_space(family);
    for (std::size_t i = 0; i < space.size(); ++i) {
      auto it = std::find_if(bank.templates.begin(), bank.templates.end(), [&](const Template& t) {
        return t.category == space[i].category && t.rotation.degrees() == space[i].degrees;
      });
      if (it == bank.templates.end()) continue;
      const Raster& r = it->raster;
      const int margin = static_cast<int>(std::ceil(cfg.padding * std::max(r.width, r.height))) + 2;
      Raster canvas(r.width + 2 * margin, r.height + 2 * margin, 1, cfg.fill);
      paste(canvas, r, margin, margin);
      const PixelBox box{static_cast<double>(margin), static_cast<double>(margin),
                         static_cast<double>(r.width), static_cast<double>(r.height)};
      references_[{family, static_cast<int>(i)}] = crop_for_orientation(canvas, box, cfg);
    }
  }
  if (references_.empty()) throw ConfigError("template bank has no rotation-variant templates");
}

const Raster& TemplateClassifier::reference(Family family, int label_index) const {
  auto it = references_.find({family, label_index});
  if (it == references_.end()) {
    throw DataError(fmt::format("no reference for label {}", label_index));
  }
  return it->second;
}

ClassifyResult TemplateClassifier::classify(const OrientationQuery& query) {
  if (!query.patch) throw ContractError("template classifier needs a patch");
  ClassifyResult best;
  best.label_index = -1;
  best.confidence = -2.0;
  const int labels = static_cast<int>(label_space(query.family).size());
  for (int i = 0; i < labels; ++i) {
    auto it = references_.find({query.family, i});
    if (it == references_.end()) continue;
    if (it->second.width != query.patch->width || it->second.height != query.patch->height) {
      throw ContractError("patch size differs from the reference patches");
    }
    const double score = ncc_same_size(*query.patch, it->second);
    if (score > best.confidence) {
      best.confidence = score;
      best.label_index = i;
    }
  }
  if (best.label_index < 0) throw ContractError("no reference patches for this family");
  best.confidence = std::clamp(best.confidence, 0.0, 1.0);
  return best;
}

OracleClassifier::OracleClassifier(std::span<const Annotation> truth) {
  for (const Annotation& a : truth) truth_[a.image_id].push_back(a);
}

ClassifyResult OracleClassifier::classify(const OrientationQuery& query) {
  const Annotation* best = nullptr;
  double best_iou = 0.0;
  bool best_same = false;
  if (auto it = truth_.find(query.image_id); it != truth_.end()) {
    for (const Annotation& a : it->second) {
      if (family_of(a.category) != query.family || !rotation_variant(a.category)) continue;
      const double o = iou(a.box, query.box);
      const bool same = a.category == query.category;
      if (o < 0.5) continue;
      if (!best || std::make_pair(same, o) > std::make_pair(best_same, best_iou)) {
        best = &a;
        best_iou = o;
        best_same = same;
      }
    }
  }
  if (!best) throw ContractError("no ground-truth part overlaps the detection");
  return {encode_label(best->category, best->rotation), 1.0, false};
}

std::string encode_classify_request(std::int64_t id, Family family, const Raster& patch) {
  if (patch.channels != 1) throw DataError("classifier requests carry gray pixels");
  return fmt::format(R"({{"id": {}, "family": "{}", "pixels_b64": "{}"}})", id,
                     family_name(family), base64_encode(patch.pixels));
}

ClassifyResult parse_classify_response(const std::string& line, std::int64_t id,
                                       Family family) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw ContractError("malformed response line");
  }
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_number_integer() ||
      !doc.contains("label_index") || !doc["label_index"].is_number_integer() ||
      !doc.contains("confidence") || !doc["confidence"].is_number()) {
    throw ContractError(
        "response must be {\"id\": int, \"label_index\": int, \"confidence\": number}");
  }
  if (doc["id"].get<std::int64_t>() != id) {
    throw ContractError(fmt::format("response id {} does not match request {}",
                                    doc["id"].get<std::int64_t>(), id));
  }
  ClassifyResult r;
  r.label_index = doc["label_index"].get<int>();
  r.confidence = doc["confidence"].get<double>();
  if (r.label_index < 0 || r.label_index >= static_cast<int>(label_space(family).size())) {
    throw ContractError(fmt::format("label index {} outside the {} label space", r.label_index,
                                    family_name(family)));
  }
  if (!std::isfinite(r.confidence) || r.confidence < 0.0 || r.confidence > 1.0) {
    throw ContractError(fmt::format("confidence {} outside [0, 1]", r.confidence));
  }
  return r;
}

ExternalClassifier::ExternalClassifier(ExternalEndpoint endpoint)
    : pool_(std::move(endpoint.command), endpoint.pool_size, endpoint.timeout) {}

ClassifyResult ExternalClassifier::classify(const OrientationQuery& query) {
  if (!query.patch) throw ContractError("external classifier needs a patch");
  const std::string response =
      pool_.request(encode_classify_request(query.id, query.family, *query.patch));
  return parse_classify_response(response, query.id, query.family);
}

ClassifyResult classify_orientation(const OrientationQuery& query,
                                    OrientationClassifier& classifier,
                                    double confidence_floor) {
  ClassifyResult r = classifier.classify(query);
  if (r.label_index < 0 || r.label_index >= static_cast<int>(label_space(query.family).size())) {
    throw ContractError(fmt::format("label index {} outside the {} label space", r.label_index,
                                    family_name(query.family)));
  }
  r.below_floor = r.confidence < confidence_floor;
  return r;
}

OrientationStats& OrientationStats::operator+=(const OrientationStats& other) {
  classified += other.classified;
  symmetric += other.symmetric;
  mismatches += other.mismatches;
  low_confidence += other.low_confidence;
  failures += other.failures;
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  return *this;
}

std::vector<Detection> assign_orientation(const Raster& gray, ImageId image_id,
                                          std::vector<Detection> detections, Family family,
                                          OrientationClassifier& classifier,
                                          const OrientationConfig& cfg,
                                          OrientationStats* stats) {
  struct Outcome {
    bool symmetric = false;
    bool mismatch = false;
    bool low = false;
    std::optional<std::string> error;
  };
  std::vector<Outcome> outcomes(detections.size());
  std::mutex flight_mu;
  const bool serialize = classifier.single_flight();
  parallel_for(detections.size(), cfg.threads, [&](std::size_t i) {
    Detection& det = detections[i];
    Outcome& out = outcomes[i];
    if (!rotation_variant(det.category)) {
      det.rotation = Rotation::zero();
      out.symmetric = true;
      return;
    }
    try {
      Raster patch;
      OrientationQuery query;
      query.id = static_cast<std::int64_t>(i);
      query.image_id = image_id;
      query.family = family;
      query.category = det.category;
      query.box = det.box;
      if (classifier.needs_patch()) {
        patch = crop_for_orientation(gray, det.box, cfg.crop);
        query.patch = &patch;
      }
      ClassifyResult r;
      if (serialize) {
        std::lock_guard lock(flight_mu);
        r = classify_orientation(query, classifier, cfg.confidence_floor);
      } else {
        r = classify_orientation(query, classifier, cfg.confidence_floor);
      }
      const auto [label_category, label_rotation] = decode_label(family, r.label_index);
      out.mismatch = label_category != det.category;
      out.low = r.below_floor;
      det.rotation = Rotation::normalized(det.category, label_rotation.degrees());
    } catch (const std::exception& e) {
      det.rotation.reset();
      out.error = e.what();
    }
  });
  if (stats) {
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const Outcome& o = outcomes[i];
      if (o.symmetric) {
        ++stats->symmetric;
      } else if (o.error) {
        ++stats->failures;
        stats->errors.push_back(fmt::format("image {} detection {}: {}", image_id, i, *o.error));
      } else {
        ++stats->classified;
        if (o.mismatch) ++stats->mismatches;
        if (o.low) ++stats->low_confidence;
      }
    }
  }
  return detections;
}

}  // namespace moldscan
