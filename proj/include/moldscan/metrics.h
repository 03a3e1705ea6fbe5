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

#ifndef MOLDSCAN_METRICS_H_
#define MOLDSCAN_METRICS_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "moldscan/core.h"

namespace moldscan {

// 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  int recall_points = 101;
  // Per image, highest scores first; applies to average recall.
  int max_detections = 100;

  void validate() const;
};

struct MatchResult {
  // Indices into the input detections, in ranked (canonical) order.
  std::vector<std::size_t> order;
  // Parallel to `order`: matched ground-truth index, or -1 for a false positive.
  std::vector<int> matched_gt;
  std::size_t true_positives = 0;
  std::size_t unmatched_gt = 0;

  bool is_tp(std::size_t rank) const { return matched_gt[rank] >= 0; }
};

// Greedy matching for one image and one category: detections in canonical
// order each take the unmatched ground truth of highest IoU >= iou_t (lowest
// index on ties); each ground truth matches at most once.
MatchResult match_detections(std::span<const Detection> dets, std::span<const PixelBox> truth,
                             double iou_t);

struct RankedFlag {
  double score = 0.0;
  bool tp = false;
};

// Interpolated AP from score-ranked flags: precision envelope sampled at
// `recall_points` evenly spaced recalls in [0, 1]. Flags must already be in
// rank order. Undefined when there is neither ground truth nor a detection;
// 0 when only one of them exists.
std::optional<double> average_precision(std::span<const RankedFlag> ranked, std::size_t num_gt,
                                        int recall_points = 101);

struct CategoryEval {
  Category category = Category::kHook;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  std::vector<std::optional<double>> ap;      // per threshold
  std::vector<std::optional<double>> recall;  // per threshold, top max_detections
};

struct ThresholdCounts {
  double iou = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct OrientationAccuracy {
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  std::optional<double> value;
};

struct EvalReport {
  Family family = Family::kInjection;
  EvalConfig config;
  std::vector<CategoryEval> categories;
  // Mean over thresholds per category, then over categories.
  std::optional<double> mean_ap;
  // Mean over categories per threshold, then over thresholds.
  std::optional<double> mean_ap_threshold_first;
  std::vector<std::optional<double>> ap_at_threshold;
  std::optional<double> average_recall;
  std::vector<ThresholdCounts> counts;
  OrientationAccuracy orientation;

  // AP averaged over categories at one configured threshold.
  std::optional<double> ap_at(double iou) const;
};

using DetectionsByImage = std::map<ImageId, std::vector<Detection>>;

// Category-first mean of per-category AP over thresholds.
std::optional<double> ap_over_thresholds(std::span<const CategoryEval> categories);
std::optional<double> ap_over_thresholds_threshold_first(std::span<const CategoryEval> categories,
                                                         std::size_t thresholds);
// Recall averaged over thresholds and over categories that have ground truth.
std::optional<double> average_recall(std::span<const CategoryEval> categories);

// Pairs detections with ground truth by matching at IoU 0.5 and scores the
// rotation of matched rotation-variant parts; symmetric parts are excluded.
// A matched detection without a rotation counts as wrong. With no family,
// every category is considered.
OrientationAccuracy orientation_accuracy(const DetectionsByImage& detections,
                                         std::span<const Annotation> truth,
                                         std::optional<Family> family);

// Full evaluation of one family's categories.
EvalReport evaluate(const DetectionsByImage& detections, std::span<const Annotation> truth,
                    Family family, const EvalConfig& cfg = {});

}  // namespace moldscan

#endif  // MOLDSCAN_METRICS_H_
