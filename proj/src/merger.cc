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

#include "moldscan/merger.h"

#include <algorithm>
#include <fmt/format.h>
#include <tuple>

#include "moldscan/error.h"

namespace moldscan {

void MergeConfig::validate() const {
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) {
    throw ConfigError(fmt::format("nms_iou {} outside (0, 1)", nms_iou));
  }
  if (!(score_floor >= 0.0 && score_floor <= 1.0)) {
    throw ConfigError(fmt::format("score_floor {} outside [0, 1]", score_floor));
  }
}

bool canonical_less(const Detection& a, const Detection& b) {
  const int ta = a.source_tile.value_or(-1), tb = b.source_tile.value_or(-1);
  return std::make_tuple(-a.score, a.box.x, a.box.y, category_id(a.category), a.box.w,
                         a.box.h, ta) <
         std::make_tuple(-b.score, b.box.x, b.box.y, category_id(b.category), b.box.w,
                         b.box.h, tb);
}

void canonical_sort(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), canonical_less);
}

std::vector<Detection> remap_all(const TilePlan& plan, std::span<const TileOutcome> outcomes) {
  std::vector<Detection> out;
  for (const TileOutcome& outcome : outcomes) {
    if (outcome.tile_index < 0 || outcome.tile_index >= static_cast<int>(plan.tiles.size())) {
      throw DataError(fmt::format("tile index {} not in plan", outcome.tile_index));
    }
    if (outcome.error) continue;
    const Tile& tile = plan.tiles[outcome.tile_index];
    for (const Detection& d : outcome.detections) {
      Detection g = to_global(d, tile.origin(), plan.width, plan.height);
      g.source_tile = tile.index;
      out.push_back(g);
    }
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, const MergeConfig& cfg) {
  std::erase_if(dets, [&](const Detection& d) { return d.score < cfg.score_floor; });
  canonical_sort(dets);
  std::vector<bool> removed(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (removed[j]) continue;
      if (cfg.class_aware && dets[j].category != dets[i].category) continue;
      if (iou(dets[i].box, dets[j].box) >= cfg.nms_iou) removed[j] = true;
    }
  }
  return kept;
}

MergeResult merge_pipeline(const TilePlan& plan, std::span<const TileOutcome> outcomes,
                           const MergeConfig& cfg) {
  cfg.validate();
  MergeResult result;
  std::vector<Detection> global = remap_all(plan, outcomes);
  result.pre_nms = global.size();
  result.detections = nms(std::move(global), cfg);
  result.post_nms = result.detections.size();
  return result;
}

}  // namespace moldscan
