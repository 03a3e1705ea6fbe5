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

#include "moldscan/metrics.h"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <set>
#include <tuple>

#include "moldscan/error.h"
#include "moldscan/merger.h"

namespace moldscan {

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw ConfigError("at least one IoU threshold is required");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t < 1.0)) throw ConfigError(fmt::format("IoU threshold {} outside (0, 1)", t));
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw ConfigError("IoU thresholds must be strictly increasing");
    }
  }
  if (recall_points < 2) throw ConfigError("need at least 2 recall sample points");
  if (max_detections < 1) throw ConfigError("max_detections must be positive");
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const PixelBox> truth,
                             double iou_t) {
  MatchResult r;
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return canonical_less(dets[a], dets[b]);
  });
  std::vector<bool> taken(truth.size(), false);
  r.matched_gt.assign(dets.size(), -1);
  for (std::size_t rank = 0; rank < r.order.size(); ++rank) {
    const PixelBox& box = dets[r.order[rank]].box;
    int best = -1;
    double best_iou = iou_t;
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (taken[g]) continue;
      const double o = iou(box, truth[g]);
      if (o >= best_iou && (best < 0 || o > best_iou)) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      r.matched_gt[rank] = best;
      ++r.true_positives;
    }
  }
  r.unmatched_gt = truth.size() - r.true_positives;
  return r;
}

std::optional<double> average_precision(std::span<const RankedFlag> ranked, std::size_t num_gt,
                                        int recall_points) {
  if (num_gt == 0) {
    if (ranked.empty()) return std::nullopt;
    return 0.0;
  }
  if (ranked.empty()) return 0.0;
  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].tp) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (int k = 0; k < recall_points; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(recall_points - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / recall_points;
}

std::optional<double> EvalReport::ap_at(double threshold) const {
  for (std::size_t i = 0; i < config.iou_thresholds.size(); ++i) {
    if (std::abs(config.iou_thresholds[i] - threshold) < 1e-9) return ap_at_threshold[i];
  }
  return std::nullopt;
}

namespace {

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
  }
  return mean_of(defined);
}

struct ImageCategoryKey {
  ImageId image;
  Category category;
  auto operator<=>(const ImageCategoryKey&) const = default;
};

}  // namespace

std::optional<double> ap_over_thresholds(std::span<const CategoryEval> categories) {
  std::vector<double> per_category;
  for (const CategoryEval& c : categories) {
    if (auto m = mean_defined(c.ap)) per_category.push_back(*m);
  }
  return mean_of(per_category);
}

std::optional<double> ap_over_thresholds_threshold_first(std::span<const CategoryEval> categories,
                                                         std::size_t thresholds) {
  std::vector<std::optional<double>> per_threshold;
  for (std::size_t t = 0; t < thresholds; ++t) {
    std::vector<std::optional<double>> column;
    for (const CategoryEval& c : categories) column.push_back(c.ap[t]);
    per_threshold.push_back(mean_defined(column));
  }
  return mean_defined(per_threshold);
}

std::optional<double> average_recall(std::span<const CategoryEval> categories) {
  std::vector<double> per_category;
  for (const CategoryEval& c : categories) {
    if (c.num_gt == 0) continue;
    if (auto m = mean_defined(c.recall)) per_category.push_back(*m);
  }
  return mean_of(per_category);
}

OrientationAccuracy orientation_accuracy(const DetectionsByImage& detections,
                                         std::span<const Annotation> truth,
                                         std::optional<Family> family) {
  std::map<ImageCategoryKey, std::vector<const Annotation*>> gts;
  for (const Annotation& a : truth) {
    if (family && family_of(a.category) != *family) continue;
    gts[{a.image_id, a.category}].push_back(&a);
  }
  std::map<ImageCategoryKey, std::vector<Detection>> dets;
  for (const auto& [image, list] : detections) {
    for (const Detection& d : list) {
      if (family && family_of(d.category) != *family) continue;
      dets[{image, d.category}].push_back(d);
    }
  }
  OrientationAccuracy acc;
  for (const auto& [key, gt_list] : gts) {
    if (!rotation_variant(key.category)) continue;
    auto it = dets.find(key);
    if (it == dets.end()) continue;
    std::vector<PixelBox> boxes;
    for (const Annotation* a : gt_list) boxes.push_back(a->box);
    const MatchResult m = match_detections(it->second, boxes, 0.5);
    for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
      if (!m.is_tp(rank)) continue;
      const Detection& d = it->second[m.order[rank]];
      const Annotation& g = *gt_list[static_cast<std::size_t>(m.matched_gt[rank])];
      ++acc.evaluated;
      if (d.rotation && *d.rotation == g.rotation) ++acc.correct;
    }
  }
  if (acc.evaluated > 0) {
    acc.value = static_cast<double>(acc.correct) / static_cast<double>(acc.evaluated);
  }
  return acc;
}

EvalReport evaluate(const DetectionsByImage& detections, std::span<const Annotation> truth,
                    Family family, const EvalConfig& cfg) {
  cfg.validate();
  EvalReport report;
  report.family = family;
  report.config = cfg;
  const std::size_t nt = cfg.iou_thresholds.size();

  std::set<ImageId> images;
  std::map<ImageCategoryKey, std::vector<PixelBox>> gts;
  for (const Annotation& a : truth) {
    if (family_of(a.category) != family) continue;
    gts[{a.image_id, a.category}].push_back(a.box);
    images.insert(a.image_id);
  }
  // All detections for AP; the top max_detections per image for recall.
  std::map<ImageCategoryKey, std::vector<Detection>> all_dets, top_dets;
  for (const auto& [image, list] : detections) {
    std::vector<Detection> ranked;
    for (const Detection& d : list) {
      if (family_of(d.category) == family) ranked.push_back(d);
    }
    if (ranked.empty()) continue;
    images.insert(image);
    canonical_sort(ranked);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      all_dets[{image, ranked[i].category}].push_back(ranked[i]);
      if (i < static_cast<std::size_t>(cfg.max_detections)) {
        top_dets[{image, ranked[i].category}].push_back(ranked[i]);
      }
    }
  }

  report.counts.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) report.counts[t].iou = cfg.iou_thresholds[t];

  static const std::vector<PixelBox> kNoBoxes;
  static const std::vector<Detection> kNoDets;
  for (Category cat : categories_of(family)) {
    CategoryEval ce;
    ce.category = cat;
    ce.ap.resize(nt);
    ce.recall.resize(nt);
    for (ImageId image : images) {
      if (auto it = gts.find({image, cat}); it != gts.end()) ce.num_gt += it->second.size();
      if (auto it = all_dets.find({image, cat}); it != all_dets.end()) {
        ce.num_detections += it->second.size();
      }
    }
    for (std::size_t t = 0; t < nt; ++t) {
      const double thr = cfg.iou_thresholds[t];
      // (score, image, rank) keeps the dataset-wide ranking deterministic.
      std::vector<std::tuple<double, ImageId, std::size_t, bool>> flags;
      std::size_t recalled = 0;
      for (ImageId image : images) {
        const auto git = gts.find({image, cat});
        const auto& boxes = git == gts.end() ? kNoBoxes : git->second;
        const auto dit = all_dets.find({image, cat});
        const auto& dets = dit == all_dets.end() ? kNoDets : dit->second;
        const MatchResult m = match_detections(dets, boxes, thr);
        for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
          flags.emplace_back(-dets[m.order[rank]].score, image, rank, m.is_tp(rank));
        }
        report.counts[t].tp += m.true_positives;
        report.counts[t].fp += dets.size() - m.true_positives;
        report.counts[t].fn += m.unmatched_gt;

        const auto tit = top_dets.find({image, cat});
        const auto& top = tit == top_dets.end() ? kNoDets : tit->second;
        recalled += match_detections(top, boxes, thr).true_positives;
      }
      std::sort(flags.begin(), flags.end());
      std::vector<RankedFlag> ranked;
      ranked.reserve(flags.size());
      for (const auto& f : flags) ranked.push_back({-std::get<0>(f), std::get<3>(f)});
      ce.ap[t] = average_precision(ranked, ce.num_gt, cfg.recall_points);
      if (ce.num_gt > 0) {
        ce.recall[t] = static_cast<double>(recalled) / static_cast<double>(ce.num_gt);
      }
    }
    report.categories.push_back(std::move(ce));
  }

  report.mean_ap = ap_over_thresholds(report.categories);
  report.mean_ap_threshold_first = ap_over_thresholds_threshold_first(report.categories, nt);
  report.ap_at_threshold.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<std::optional<double>> column;
    for (const CategoryEval& c : report.categories) column.push_back(c.ap[t]);
    report.ap_at_threshold[t] = mean_defined(column);
  }
  report.average_recall = average_recall(report.categories);
  report.orientation = orientation_accuracy(detections, truth, family);
  return report;
}

}  // namespace moldscan
