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

#ifndef MOLDSCAN_MERGER_H_
#define MOLDSCAN_MERGER_H_

#include <cstddef>
#include <span>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/detect.h"
#include "moldscan/tiler.h"

namespace moldscan {

struct MergeConfig {
  double nms_iou = 0.5;
  double score_floor = 0.05;
  bool class_aware = true;

  void validate() const;
};

// Canonical detection order: score descending, then x, y, category id, w, h
// and source tile ascending.
bool canonical_less(const Detection& a, const Detection& b);
void canonical_sort(std::vector<Detection>& dets);

// Concatenates every tile's detections translated to drawing coordinates.
// Failed tiles contribute nothing.
std::vector<Detection> remap_all(const TilePlan& plan, std::span<const TileOutcome> outcomes);

// Greedy suppression in canonical order: drops detections below the score
// floor, then keeps the head and removes every remaining detection (of the
// same category when class-aware) with iou >= nms_iou.
std::vector<Detection> nms(std::vector<Detection> dets, const MergeConfig& cfg);

struct MergeResult {
  std::vector<Detection> detections;
  std::size_t pre_nms = 0;
  std::size_t post_nms = 0;
};

MergeResult merge_pipeline(const TilePlan& plan, std::span<const TileOutcome> outcomes,
                           const MergeConfig& cfg);

}  // namespace moldscan

#endif  // MOLDSCAN_MERGER_H_
