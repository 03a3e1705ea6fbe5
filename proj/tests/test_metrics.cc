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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

#include "moldscan/error.h"
#include "moldscan/metrics.h"

using namespace moldscan;

namespace {

Detection det(PixelBox box, double score, Category c = Category::kHook,
              std::optional<int> rotation = std::nullopt) {
  Detection d;
  d.box = box;
  d.score = score;
  d.category = c;
  if (rotation) d.rotation = Rotation::make(c, *rotation);
  return d;
}

// Direct envelope: at each recall sample, the best precision reached at any
// rank whose recall is at least the sample.
double envelope_ap(const std::vector<bool>& tp, std::size_t num_gt, int points = 101) {
  std::vector<double> prec, rec;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i];
    prec.push_back(static_cast<double>(hits) / static_cast<double>(i + 1));
    rec.push_back(static_cast<double>(hits) / static_cast<double>(num_gt));
  }
  double sum = 0;
  for (int k = 0; k < points; ++k) {
    const double r = static_cast<double>(k) / (points - 1);
    double best = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      if (rec[i] >= r - 1e-12) best = std::max(best, prec[i]);
    }
    sum += best;
  }
  return sum / points;
}

std::vector<RankedFlag> flags(const std::vector<bool>& tp) {
  std::vector<RankedFlag> out;
  double s = 1.0;
  for (bool b : tp) {
    out.push_back({s, b});
    s -= 0.001;
  }
  return out;
}

// Maximum bipartite matching by augmenting paths over edges iou >= t.
std::size_t max_matching(const std::vector<PixelBox>& dets, const std::vector<PixelBox>& gts,
                         double t) {
  std::vector<int> owner(gts.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment =
      [&](std::size_t d, std::vector<bool>& seen) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (seen[g] || iou(dets[d], gts[g]) < t) continue;
          seen[g] = true;
          if (owner[g] < 0 || augment(static_cast<std::size_t>(owner[g]), seen)) {
            owner[g] = static_cast<int>(d);
            return true;
          }
        }
        return false;
      };
  std::size_t n = 0;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    std::vector<bool> seen(gts.size(), false);
    n += augment(d, seen);
  }
  return n;
}

}  // namespace

TEST_CASE("config validation") {
  EvalConfig c;
  CHECK(c.iou_thresholds.size() == 10);
  CHECK(c.iou_thresholds.front() == doctest::Approx(0.5));
  CHECK(c.iou_thresholds.back() == doctest::Approx(0.95));
  CHECK_NOTHROW(c.validate());
  c.iou_thresholds = {0.5, 0.5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.iou_thresholds = {0.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.recall_points = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("matching examples") {
  const std::vector<PixelBox> gt = {{0, 0, 10, 10}};
  // iou 0.6: 10x10 against 10x6 inside it.
  const std::vector<Detection> one = {det({0, 0, 10, 6}, 0.9)};
  const MatchResult a = match_detections(one, gt, 0.5);
  CHECK(a.true_positives == 1);
  CHECK(a.unmatched_gt == 0);
  CHECK(a.is_tp(0));

  const std::vector<Detection> two = {det({0, 0, 10, 9}, 0.8), det({0, 0, 10, 10}, 0.9)};
  const MatchResult b = match_detections(two, gt, 0.5);
  REQUIRE(b.order.size() == 2);
  CHECK(b.order[0] == 1);
  CHECK(b.is_tp(0));
  CHECK_FALSE(b.is_tp(1));

  const std::vector<Detection> weak = {det({0, 0, 10, 4}, 0.9)};
  const MatchResult c = match_detections(weak, gt, 0.5);
  CHECK(c.true_positives == 0);
  CHECK(c.unmatched_gt == 1);

  // The highest-IoU free ground truth wins, lowest index on ties.
  const std::vector<PixelBox> pair = {{0, 0, 10, 10}, {2, 0, 10, 10}};
  const MatchResult d = match_detections(std::vector<Detection>{det({2, 0, 10, 10}, 0.9)}, pair, 0.5);
  CHECK(d.matched_gt[0] == 1);
  const std::vector<PixelBox> twins = {{0, 0, 10, 10}, {0, 0, 10, 10}};
  const MatchResult e = match_detections(std::vector<Detection>{det({0, 0, 10, 10}, 0.9)}, twins, 0.5);
  CHECK(e.matched_gt[0] == 0);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision(flags({true, true, true}), 3) == 1.0);
  CHECK(average_precision({}, 4) == 0.0);
  CHECK(average_precision(flags({false, false}), 0) == 0.0);
  CHECK_FALSE(average_precision({}, 0).has_value());

  const double expected = (51 * 1.0 + 50 * (2.0 / 3.0)) / 101;
  CHECK(expected == doctest::Approx(0.83498).epsilon(1e-5));
  const auto ap = average_precision(flags({true, false, true}), 2);
  REQUIRE(ap.has_value());
  CHECK(*ap == doctest::Approx(expected).epsilon(1e-12));
  CHECK(envelope_ap({true, false, true}, 2) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("average precision matches the direct envelope") {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.6);
  std::uniform_int_distribution<int> len(0, 30), extra(0, 5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<bool> tp(static_cast<std::size_t>(len(rng)));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      tp[i] = coin(rng);
      hits += tp[i];
    }
    const std::size_t num_gt = hits + static_cast<std::size_t>(extra(rng));
    if (num_gt == 0) continue;
    const auto ap = average_precision(flags(tp), num_gt);
    REQUIRE(ap.has_value());
    CHECK(*ap == doctest::Approx(envelope_ap(tp, num_gt)).epsilon(1e-12));
    CHECK(*ap >= 0.0);
    CHECK(*ap <= 1.0);
  }
}

TEST_CASE("greedy matching equals maximum matching when IoU is all or nothing") {
  // Each ground truth sits on one of three disjoint slots; a detection either
  // copies a slot exactly or lies in empty space, so every IoU is 0 or 1.
  const PixelBox slots[] = {{0, 0, 10, 10}, {20, 0, 10, 10}, {40, 0, 10, 10}, {60, 0, 10, 10}};
  std::mt19937_64 rng(17);
  std::size_t configs = 0;
  for (int num_gt = 0; num_gt <= 4; ++num_gt) {
    for (int num_det = 0; num_det <= 6; ++num_det) {
      // Ground truth slot assignment and detection slot assignment (3 = empty).
      const int gt_combos = static_cast<int>(std::pow(3, num_gt));
      const int det_combos = static_cast<int>(std::pow(4, num_det));
      for (int gc = 0; gc < gt_combos; ++gc) {
        std::vector<PixelBox> gts;
        for (int i = 0, v = gc; i < num_gt; ++i, v /= 3) gts.push_back(slots[v % 3]);
        for (int dc = 0; dc < det_combos; ++dc) {
          std::vector<Detection> dets;
          std::vector<PixelBox> boxes;
          for (int i = 0, v = dc; i < num_det; ++i, v /= 4) {
            boxes.push_back(slots[v % 4]);
            dets.push_back(det(slots[v % 4], std::uniform_real_distribution<double>(0.1, 1.0)(rng)));
          }
          const MatchResult m = match_detections(dets, gts, 0.5);
          REQUIRE(m.true_positives == max_matching(boxes, gts, 0.5));
          REQUIRE(m.true_positives + m.unmatched_gt == gts.size());
          ++configs;
        }
      }
    }
  }
  CHECK(configs > 100000);
}

TEST_CASE("greedy matching can fall short of maximum with partial overlaps") {
  // The first detection prefers A, which is the only option of the second.
  const std::vector<PixelBox> gts = {{0, 0, 10, 10}, {4, 0, 10, 10}};
  const std::vector<Detection> dets = {det({1, 0, 10, 10}, 0.9), det({0, 0, 10, 10}, 0.8)};
  CHECK(iou(dets[0].box, gts[0]) > iou(dets[0].box, gts[1]));
  CHECK(iou(dets[0].box, gts[1]) >= 0.5);
  CHECK(iou(dets[1].box, gts[1]) < 0.5);
  const MatchResult m = match_detections(dets, gts, 0.5);
  CHECK(m.true_positives == 1);
  CHECK(max_matching({dets[0].box, dets[1].box}, gts, 0.5) == 2);
}

TEST_CASE("evaluation is monotone in the threshold and ranking-only") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> jitter(0.0, 1.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Annotation> truth;
    DetectionsByImage dets;
    std::int64_t id = 1;
    for (ImageId img = 1; img <= 3; ++img) {
      for (int i = 0; i < 6; ++i) {
        const Category c = i % 2 ? Category::kBoss : Category::kHook;
        const PixelBox box{40.0 * i, 50.0 * static_cast<double>(img), 20, 20};
        truth.push_back(make_annotation(id++, img, box, c, 0));
        if (u(rng) < 0.8) {
          dets[img].push_back(det({box.x + jitter(rng), box.y + jitter(rng), 20 + jitter(rng),
                                   20 + jitter(rng)},
                                  u(rng), c));
        }
        if (u(rng) < 0.3) dets[img].push_back(det({box.x + 5, box.y + 5, 20, 20}, u(rng), c));
      }
    }
    const EvalReport r = evaluate(dets, truth, Family::kInjection);
    for (const CategoryEval& c : r.categories) {
      for (std::size_t t = 1; t < c.ap.size(); ++t) {
        if (c.ap[t - 1] && c.ap[t]) CHECK(*c.ap[t] <= *c.ap[t - 1] + 1e-12);
        if (c.recall[t - 1] && c.recall[t]) CHECK(*c.recall[t] <= *c.recall[t - 1] + 1e-12);
      }
    }
    std::size_t num_gt = truth.size();
    for (const ThresholdCounts& k : r.counts) CHECK(k.tp + k.fn == num_gt);

    DetectionsByImage rescaled = dets;
    for (auto& [img, list] : rescaled) {
      for (Detection& d : list) d.score = 0.05 + 0.9 * d.score * d.score;
    }
    const EvalReport s = evaluate(rescaled, truth, Family::kInjection);
    CHECK(s.mean_ap == r.mean_ap);
    CHECK(s.average_recall == r.average_recall);
  }
}

TEST_CASE("threshold averaging") {
  auto cat = [](Category c, double v) {
    CategoryEval e;
    e.category = c;
    e.num_gt = 1;
    e.ap.assign(10, v);
    e.recall.assign(10, v);
    return e;
  };
  const std::vector<CategoryEval> same = {cat(Category::kHook, 0.4), cat(Category::kBoss, 0.4)};
  CHECK(*ap_over_thresholds(same) == doctest::Approx(0.4));
  const std::vector<CategoryEval> mixed = {cat(Category::kHook, 1.0), cat(Category::kBoss, 0.5)};
  CHECK(*ap_over_thresholds(mixed) == doctest::Approx(0.75));
  CHECK(*ap_over_thresholds_threshold_first(mixed, 10) == doctest::Approx(0.75));
  CHECK(*average_recall(mixed) == doctest::Approx(0.75));

  // Undefined categories are left out of the means.
  std::vector<CategoryEval> partial = mixed;
  CategoryEval empty;
  empty.category = Category::kUndercut;
  empty.ap.assign(10, std::nullopt);
  empty.recall.assign(10, std::nullopt);
  partial.push_back(empty);
  CHECK(*ap_over_thresholds(partial) == doctest::Approx(0.75));
  CHECK(*average_recall(partial) == doctest::Approx(0.75));
  CHECK_FALSE(ap_over_thresholds(std::vector<CategoryEval>{empty}).has_value());
}

TEST_CASE("perfect detections score one everywhere") {
  std::vector<Annotation> truth = {
      make_annotation(1, 1, {10, 10, 30, 30}, Category::kHook, 90),
      make_annotation(2, 1, {100, 10, 30, 30}, Category::kUndercut, 180),
      make_annotation(3, 2, {10, 10, 30, 30}, Category::kBoss, 0)};
  DetectionsByImage dets;
  for (const Annotation& a : truth) {
    dets[a.image_id].push_back(det(a.box, 1.0, a.category, a.rotation.degrees()));
  }
  const EvalReport r = evaluate(dets, truth, Family::kInjection);
  CHECK(r.mean_ap == 1.0);
  CHECK(r.mean_ap_threshold_first == 1.0);
  CHECK(r.average_recall == 1.0);
  CHECK(r.ap_at(0.5) == 1.0);
  CHECK(r.ap_at(0.95) == 1.0);
  CHECK(r.orientation.value == 1.0);
  CHECK(r.orientation.evaluated == 2);
}

TEST_CASE("half the parts found gives recall one half") {
  std::vector<Annotation> truth;
  DetectionsByImage dets;
  for (int i = 0; i < 4; ++i) {
    truth.push_back(make_annotation(i + 1, 1, {40.0 * i, 0, 30, 30}, Category::kBoss, 0));
    if (i % 2 == 0) dets[1].push_back(det(truth.back().box, 0.9, Category::kBoss));
  }
  const EvalReport r = evaluate(dets, truth, Family::kInjection);
  REQUIRE(r.average_recall.has_value());
  CHECK(*r.average_recall == doctest::Approx(0.5));
  for (const ThresholdCounts& k : r.counts) {
    CHECK(k.tp == 2);
    CHECK(k.fn == 2);
    CHECK(k.fp == 0);
  }

  // The per-image cap keeps only the top-scoring detections for recall.
  EvalConfig capped;
  capped.max_detections = 1;
  dets[1][0].score = 0.95;
  CHECK(*evaluate(dets, truth, Family::kInjection, capped).average_recall ==
        doctest::Approx(0.25));
}

TEST_CASE("undefined metrics are absent") {
  const EvalReport none = evaluate({}, {}, Family::kPress);
  CHECK_FALSE(none.mean_ap.has_value());
  CHECK_FALSE(none.average_recall.has_value());
  CHECK_FALSE(none.orientation.value.has_value());

  // Detections of a category without ground truth score zero.
  DetectionsByImage stray;
  stray[1].push_back(det({0, 0, 10, 10}, 0.9, Category::kDps));
  const EvalReport r = evaluate(stray, {}, Family::kPress);
  REQUIRE(r.mean_ap.has_value());
  CHECK(*r.mean_ap == 0.0);
  CHECK_FALSE(r.average_recall.has_value());
}

TEST_CASE("orientation accuracy counts rotation-variant matches only") {
  const std::vector<Annotation> truth = {
      make_annotation(1, 1, {0, 0, 30, 30}, Category::kHook, 90),
      make_annotation(2, 1, {50, 0, 30, 30}, Category::kUndercut, 180),
      make_annotation(3, 1, {100, 0, 30, 30}, Category::kBoss, 0),
      make_annotation(4, 1, {150, 0, 30, 30}, Category::kEmbo, 0)};
  DetectionsByImage dets;
  dets[1] = {det({0, 0, 30, 30}, 0.9, Category::kHook, 90),
             det({50, 0, 30, 30}, 0.9, Category::kUndercut, 0),
             det({100, 0, 30, 30}, 0.9, Category::kBoss, 0),
             det({150, 0, 30, 30}, 0.9, Category::kEmbo, 0)};
  const OrientationAccuracy acc = orientation_accuracy(dets, truth, std::nullopt);
  CHECK(acc.evaluated == 2);
  CHECK(acc.correct == 1);
  CHECK(acc.value == 0.5);

  // A matched detection with no rotation counts as wrong.
  dets[1][0].rotation.reset();
  CHECK(orientation_accuracy(dets, truth, Family::kInjection).value == 0.0);

  const std::vector<Annotation> symmetric = {truth[2], truth[3]};
  CHECK_FALSE(orientation_accuracy(dets, symmetric, std::nullopt).value.has_value());
}
