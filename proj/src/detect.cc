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

#include "moldscan/detect.h"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <random>

#include "json.hpp"
#include "moldscan/error.h"
#include "moldscan/merger.h"
#include "moldscan/util.h"

namespace moldscan {

namespace {

std::mt19937_64 tile_rng(std::uint64_t seed, ImageId image_id, int tile_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(image_id),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(image_id) >> 32),
                    static_cast<std::uint32_t>(tile_index)};
  return std::mt19937_64(seq);
}

}  // namespace

void validate_detections(std::span<const Detection> dets, const Tile& tile, Family family) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Detection& d = dets[i];
    if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) {
      throw ContractError(fmt::format("detection {}: score {} outside [0, 1]", i, d.score));
    }
    const PixelBox& b = d.box;
    if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) ||
        !std::isfinite(b.h) || !b.valid() || !box_within(b, tile.w, tile.h)) {
      throw ContractError(fmt::format("detection {}: box [{}, {}, {}, {}] outside {}x{} tile",
                                      i, b.x, b.y, b.w, b.h, tile.w, tile.h));
    }
    if (family_of(d.category) != family) {
      throw ContractError(fmt::format("detection {}: {} is not a {} part", i,
                                      category_name(d.category), family_name(family)));
    }
    if (d.rotation && !in_rotation_group(d.category, d.rotation->degrees())) {
      throw ContractError(fmt::format("detection {}: invalid rotation", i));
    }
  }
}

std::vector<Detection> oracle_detect(const Tile& tile, ImageId image_id,
                                     std::span<const Annotation> truth, Family family,
                                     const NoiseConfig& noise) {
  std::vector<Detection> out;
  const bool noisy = noise.jitter_sigma > 0.0 || noise.drop_probability > 0.0 ||
                     noise.false_positive_rate > 0.0;
  std::mt19937_64 rng = tile_rng(noise.seed, image_id, tile.index);
  std::normal_distribution<double> jitter(0.0, noise.jitter_sigma > 0 ? noise.jitter_sigma : 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const PixelBox window = tile.box();
  for (const Annotation& a : truth) {
    if (a.image_id != image_id || family_of(a.category) != family) continue;
    if (visible_fraction(a.box, window) < 1.0) continue;
    Detection d;
    d.category = a.category;
    d.score = 1.0;
    d.box = {a.box.x - tile.x0, a.box.y - tile.y0, a.box.w, a.box.h};
    if (noisy) {
      if (unit(rng) < noise.drop_probability) continue;
      if (noise.jitter_sigma > 0.0) {
        const double x0 = std::clamp(d.box.x + jitter(rng), 0.0, static_cast<double>(tile.w));
        const double y0 = std::clamp(d.box.y + jitter(rng), 0.0, static_cast<double>(tile.h));
        const double x1 = std::clamp(d.box.right() + jitter(rng), 0.0, static_cast<double>(tile.w));
        const double y1 = std::clamp(d.box.bottom() + jitter(rng), 0.0, static_cast<double>(tile.h));
        if (x1 - x0 < 1.0 || y1 - y0 < 1.0) continue;
        d.box = {x0, y0, x1 - x0, y1 - y0};
      }
    }
    out.push_back(d);
  }
  if (noise.false_positive_rate > 0.0) {
    std::poisson_distribution<int> count(noise.false_positive_rate);
    const auto cats = categories_of(family);
    std::uniform_int_distribution<std::size_t> pick(0, cats.size() - 1);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double side = std::min({16.0 + 64.0 * unit(rng), static_cast<double>(tile.w),
                                    static_cast<double>(tile.h)});
      Detection d;
      d.category = cats[pick(rng)];
      d.score = 0.05 + 0.9 * unit(rng);
      d.box = {unit(rng) * (tile.w - side), unit(rng) * (tile.h - side), side, side};
      out.push_back(d);
    }
  }
  return out;
}

OracleDetector::OracleDetector(Family family, std::span<const Annotation> truth,
                               NoiseConfig noise)
    : family_(family), noise_(noise) {
  for (const Annotation& a : truth) truth_[a.image_id].push_back(a);
}

std::vector<Detection> OracleDetector::detect(const TileInput& input) {
  auto it = truth_.find(input.image_id);
  if (it == truth_.end()) return {};
  return oracle_detect(input.tile, input.image_id, it->second, family_, noise_);
}

std::vector<Template> TemplateBank::for_family(Family family) const {
  std::vector<Template> out;
  for (const Template& t : templates) {
    if (family_of(t.category) == family) out.push_back(t);
  }
  return out;
}

namespace {

std::vector<Detection> suppress_peaks(std::vector<Detection> candidates, double max_iou) {
  std::sort(candidates.begin(), candidates.end(), canonical_less);
  std::vector<Detection> kept;
  for (const Detection& c : candidates) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.category == c.category && iou(k.box, c.box) > max_iou;
    });
    if (!overlaps) kept.push_back(c);
  }
  return kept;
}

std::vector<Raster> template_rasters(const std::vector<Template>& templates) {
  std::vector<Raster> out;
  for (const Template& t : templates) out.push_back(t.raster);
  return out;
}

}  // namespace

TemplateDetector::TemplateDetector(Family family, TemplateBank bank)
    : family_(family), bank_(std::move(bank)), templates_(bank_.for_family(family)) {
  if (!(bank_.threshold > 0.0 && bank_.threshold <= 1.0)) {
    throw ConfigError(fmt::format("template threshold {} outside (0, 1]", bank_.threshold));
  }
  if (bank_.stride < 1) throw ConfigError("template stride must be at least 1");
  if (templates_.empty()) {
    throw ConfigError(fmt::format("template bank has no {} templates", family_name(family)));
  }
  matcher_ = std::make_unique<NccMatcher>(template_rasters(templates_));
}

std::vector<std::string> TemplateDetector::warnings() const {
  std::lock_guard lock(warn_mu_);
  return warnings_;
}

std::vector<Detection> TemplateDetector::detect(const TileInput& input) {
  if (!input.pixels) throw ContractError("template detector needs tile pixels");
  std::vector<std::size_t> skipped;
  const auto peaks = matcher_->match(*input.pixels, bank_.threshold, bank_.stride, &skipped);
  if (!skipped.empty()) {
    std::lock_guard lock(warn_mu_);
    for (std::size_t t : skipped) {
      auto msg = fmt::format("template {} {} ({}x{}) does not fit a {}x{} tile",
                             category_name(templates_[t].category),
                             templates_[t].rotation.degrees(), templates_[t].raster.width,
                             templates_[t].raster.height, input.pixels->width,
                             input.pixels->height);
      if (std::find(warnings_.begin(), warnings_.end(), msg) == warnings_.end()) {
        warnings_.push_back(std::move(msg));
      }
    }
  }
  std::vector<Detection> candidates;
  for (std::size_t t = 0; t < peaks.size(); ++t) {
    const Raster& r = templates_[t].raster;
    for (const NccPeak& p : peaks[t]) {
      Detection d;
      d.category = templates_[t].category;
      d.score = std::clamp(p.score, 0.0, 1.0);
      d.box = {static_cast<double>(p.x), static_cast<double>(p.y),
               static_cast<double>(r.width), static_cast<double>(r.height)};
      candidates.push_back(d);
    }
  }
  return suppress_peaks(std::move(candidates), bank_.peak_suppression_iou);
}

std::vector<Detection> template_detect(const Raster& tile, const TemplateBank& bank,
                                       Family family) {
  TemplateDetector detector(family, bank);
  TileInput input;
  input.tile = Tile{0, 0, 0, tile.width, tile.height};
  input.pixels = &tile;
  return detector.detect(input);
}

std::string encode_detect_request(std::int64_t id, const Raster& gray) {
  if (gray.channels != 1) throw DataError("detector requests carry gray pixels");
  return fmt::format(R"({{"id": {}, "width": {}, "height": {}, "pixels_b64": "{}"}})", id,
                     gray.width, gray.height, base64_encode(gray.pixels));
}

std::vector<Detection> parse_detect_response(const std::string& line, std::int64_t id,
                                             const Tile& tile, Family family) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw ContractError("malformed response line");
  }
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_number_integer() ||
      !doc.contains("detections") || !doc["detections"].is_array()) {
    throw ContractError("response must be {\"id\": int, \"detections\": [...]}");
  }
  if (doc["id"].get<std::int64_t>() != id) {
    throw ContractError(fmt::format("response id {} does not match request {}",
                                    doc["id"].get<std::int64_t>(), id));
  }
  std::vector<Detection> out;
  for (const auto& j : doc["detections"]) {
    if (!j.is_object()) throw ContractError("detection entries must be objects");
    for (const char* key : {"x", "y", "w", "h", "score"}) {
      if (!j.contains(key) || !j[key].is_number()) {
        throw ContractError(fmt::format("detection field \"{}\" missing or not a number", key));
      }
    }
    if (!j.contains("category") || !j["category"].is_string()) {
      throw ContractError("detection field \"category\" missing or not a string");
    }
    const auto cat = category_from_name(j["category"].get<std::string>());
    if (!cat) {
      throw ContractError(
          fmt::format("unknown category \"{}\"", j["category"].get<std::string>()));
    }
    Detection d;
    d.category = *cat;
    d.score = j["score"].get<double>();
    d.box = {j["x"].get<double>(), j["y"].get<double>(), j["w"].get<double>(),
             j["h"].get<double>()};
    out.push_back(d);
  }
  validate_detections(out, tile, family);
  return out;
}

ExternalDetector::ExternalDetector(Family family, ExternalEndpoint endpoint)
    : family_(family),
      pool_(std::move(endpoint.command), endpoint.pool_size, endpoint.timeout) {}

std::vector<Detection> ExternalDetector::detect(const TileInput& input) {
  if (!input.pixels) throw ContractError("external detector needs tile pixels");
  const std::int64_t id = input.tile.index;
  const std::string response = pool_.request(encode_detect_request(id, *input.pixels));
  return parse_detect_response(response, id, input.tile, family_);
}

std::vector<TileOutcome> detect_tiles(const TilePlan& plan, ImageId image_id,
                                      const Raster& gray, Detector& detector, int threads) {
  if (detector.needs_pixels() && (gray.width != plan.width || gray.height != plan.height)) {
    throw DataError(fmt::format("plan is for {}x{}, image is {}x{}", plan.width, plan.height,
                                gray.width, gray.height));
  }
  std::vector<TileOutcome> outcomes(plan.tiles.size());
  std::mutex flight_mu;
  const bool serialize = detector.single_flight();
  parallel_for(plan.tiles.size(), threads, [&](std::size_t i) {
    const Tile& tile = plan.tiles[i];
    TileOutcome& outcome = outcomes[i];
    outcome.tile_index = tile.index;
    try {
      Raster pixels;
      TileInput input;
      input.image_id = image_id;
      input.tile = tile;
      if (detector.needs_pixels()) {
        pixels = extract_tile(gray, tile);
        input.pixels = &pixels;
      }
      std::vector<Detection> dets;
      if (serialize) {
        std::lock_guard lock(flight_mu);
        dets = detector.detect(input);
      } else {
        dets = detector.detect(input);
      }
      validate_detections(dets, tile, detector.family());
      for (Detection& d : dets) d.source_tile = tile.index;
      outcome.detections = std::move(dets);
    } catch (const std::exception& e) {
      outcome.detections.clear();
      outcome.error = e.what();
    }
  });
  return outcomes;
}

}  // namespace moldscan
