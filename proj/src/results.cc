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

#include "moldscan/results.h"

#include <fmt/format.h>

#include "moldscan/error.h"
#include "moldscan/json_schema.h"
#include "moldscan/merger.h"
#include "moldscan/util.h"

namespace moldscan {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json optional_numbers(const std::vector<std::optional<double>>& values) {
  Json out = Json::array();
  for (const auto& v : values) out.push_back(optional_number(v));
  return out;
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::string cell(const Json& v) {
  if (v.is_null()) return "-";
  return fmt::format("{:.1f}", 100.0 * v.get<double>());
}

std::optional<std::size_t> threshold_index(const Json& thresholds, double t) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i].get<double>() - t) < 1e-9) return i;
  }
  return std::nullopt;
}

}  // namespace

std::size_t ResultsFile::total_tiles() const {
  std::size_t n = 0;
  for (const auto& s : merge_stats) n += s.tiles;
  return n;
}

std::size_t ResultsFile::failed_tiles() const {
  std::size_t n = 0;
  for (const auto& s : merge_stats) n += s.failed_tiles;
  return n;
}

Json eval_report_to_json(const EvalReport& report) {
  Json cats = Json::array();
  for (const CategoryEval& c : report.categories) {
    cats.push_back({{"category", category_name(c.category)},
                    {"category_id", category_id(c.category)},
                    {"num_gt", c.num_gt},
                    {"num_detections", c.num_detections},
                    {"ap", optional_numbers(c.ap)},
                    {"mean_ap", optional_number(mean_defined(c.ap))},
                    {"recall", optional_numbers(c.recall)},
                    {"average_recall", optional_number(mean_defined(c.recall))}});
  }
  Json counts = Json::array();
  for (const ThresholdCounts& t : report.counts) {
    counts.push_back({{"iou", t.iou}, {"tp", t.tp}, {"fp", t.fp}, {"fn", t.fn}});
  }
  return {{"family", family_name(report.family)},
          {"iou_thresholds", report.config.iou_thresholds},
          {"recall_points", report.config.recall_points},
          {"max_detections", report.config.max_detections},
          {"mean_ap", optional_number(report.mean_ap)},
          {"mean_ap_threshold_first", optional_number(report.mean_ap_threshold_first)},
          {"ap_per_threshold", optional_numbers(report.ap_at_threshold)},
          {"average_recall", optional_number(report.average_recall)},
          {"categories", std::move(cats)},
          {"counts", std::move(counts)},
          {"orientation",
           {{"evaluated", report.orientation.evaluated},
            {"correct", report.orientation.correct},
            {"accuracy", optional_number(report.orientation.value)}}}};
}

std::string format_eval_table(const Json& report) {
  const Json& thresholds = report.at("iou_thresholds");
  const auto i50 = threshold_index(thresholds, 0.5);
  const auto i75 = threshold_index(thresholds, 0.75);
  auto at = [](const Json& values, std::optional<std::size_t> i) {
    return i ? values.at(*i) : Json(nullptr);
  };
  std::string out = fmt::format("family: {}\n", report.at("family").get<std::string>());
  out += fmt::format("{:<16}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n", "category", "AP", "AP50", "AP75",
                     "AR", "GT", "DET");
  for (const Json& c : report.at("categories")) {
    out += fmt::format("{:<16}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
                       c.at("category").get<std::string>(), cell(c.at("mean_ap")),
                       cell(at(c.at("ap"), i50)), cell(at(c.at("ap"), i75)),
                       cell(c.at("average_recall")), c.at("num_gt").get<std::size_t>(),
                       c.at("num_detections").get<std::size_t>());
  }
  out += fmt::format("{:<16}{:>8}{:>8}{:>8}{:>8}\n", "all", cell(report.at("mean_ap")),
                     cell(at(report.at("ap_per_threshold"), i50)),
                     cell(at(report.at("ap_per_threshold"), i75)),
                     cell(report.at("average_recall")));
  const Json& o = report.at("orientation");
  out += fmt::format("orientation accuracy: {} ({} of {})\n", cell(o.at("accuracy")),
                     o.at("correct").get<std::size_t>(), o.at("evaluated").get<std::size_t>());
  return out;
}

std::string format_eval_table(const EvalReport& report) {
  return format_eval_table(eval_report_to_json(report));
}

Json results_to_json(const ResultsFile& r) {
  Json meta = {{"config_hash", r.meta.config_hash},
               {"seed", r.meta.seed},
               {"family", family_name(r.meta.family)},
               {"detector", r.meta.detector},
               {"classifier", r.meta.classifier},
               {"reproducible", r.meta.reproducible}};
  if (r.meta.started_at) meta["started_at"] = *r.meta.started_at;
  if (r.meta.finished_at) meta["finished_at"] = *r.meta.finished_at;

  Json dets = Json::array();
  for (const auto& [image, list] : r.detections) {
    std::vector<Detection> sorted = list;
    canonical_sort(sorted);
    for (const Detection& d : sorted) {
      dets.push_back({{"image_id", image},
                      {"category_id", category_id(d.category)},
                      {"bbox", box_to_json(d.box)},
                      {"score", d.score},
                      {"rotation", d.rotation ? Json(d.rotation->degrees()) : Json(nullptr)},
                      {"source_tile", d.source_tile ? Json(*d.source_tile) : Json(nullptr)}});
    }
  }
  Json failures = Json::array();
  for (const TileFailure& f : r.tile_failures) {
    failures.push_back({{"image_id", f.image_id}, {"tile_index", f.tile_index}, {"error", f.error}});
  }
  Json per_image = Json::array();
  std::size_t pre = 0, post = 0;
  for (const ImageMergeStats& s : r.merge_stats) {
    per_image.push_back({{"image_id", s.image_id},
                         {"tiles", s.tiles},
                         {"failed_tiles", s.failed_tiles},
                         {"pre_nms", s.pre_nms},
                         {"post_nms", s.post_nms}});
    pre += s.pre_nms;
    post += s.post_nms;
  }
  Json doc = {{"meta", std::move(meta)},
              {"detections", std::move(dets)},
              {"tile_failures", std::move(failures)},
              {"merge_stats",
               {{"pre_nms", pre},
                {"post_nms", post},
                {"tiles", r.total_tiles()},
                {"failed_tiles", r.failed_tiles()},
                {"images", std::move(per_image)}}},
              {"orientation_stats", r.orientation_stats},
              {"errors", r.errors}};
  if (r.eval) doc["eval"] = *r.eval;
  return doc;
}

ResultsFile results_from_json(const Json& doc) {
  using schema::FieldPath;
  const FieldPath root;
  schema::require_object(doc, root);
  ResultsFile r;

  const FieldPath mp = root.key("meta");
  const Json& meta = schema::require(doc, "meta", root);
  schema::require_object(meta, mp);
  r.meta.config_hash = schema::require_string(meta, "config_hash", mp);
  const Json& seed = schema::require(meta, "seed", mp);
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw DataError(fmt::format("{}: expected a non-negative integer", mp.key("seed").str()));
  }
  r.meta.seed = seed.get<std::uint64_t>();
  const std::string family = schema::require_string(meta, "family", mp);
  const auto fam = family_from_name(family);
  if (!fam) throw DataError(fmt::format("{}: unknown family \"{}\"", mp.key("family").str(), family));
  r.meta.family = *fam;
  r.meta.detector = schema::require_string(meta, "detector", mp);
  r.meta.classifier = schema::require_string(meta, "classifier", mp);
  const Json& repro = schema::require(meta, "reproducible", mp);
  if (!repro.is_boolean()) {
    throw DataError(fmt::format("{}: expected a boolean", mp.key("reproducible").str()));
  }
  r.meta.reproducible = repro.get<bool>();
  if (meta.contains("started_at")) r.meta.started_at = schema::require_string(meta, "started_at", mp);
  if (meta.contains("finished_at")) {
    r.meta.finished_at = schema::require_string(meta, "finished_at", mp);
  }

  const Json& dets = schema::require_array(doc, "detections", root);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const FieldPath p = root.key("detections").index(i);
    const Json& j = dets[i];
    schema::require_object(j, p);
    const ImageId image = schema::require_int(j, "image_id", p);
    const int cat_id = static_cast<int>(schema::require_int(j, "category_id", p));
    const auto cat = category_from_id(cat_id);
    if (!cat) throw DataError(fmt::format("{}: unknown category {}", p.key("category_id").str(), cat_id));
    const auto bbox = schema::require_numbers(j, "bbox", 4, p);
    Detection d;
    d.box = {bbox[0], bbox[1], bbox[2], bbox[3]};
    if (!d.box.valid()) throw DataError(fmt::format("{}: degenerate box", p.key("bbox").str()));
    d.category = *cat;
    d.score = schema::require_number(j, "score", p);
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw DataError(fmt::format("{}: score {} outside [0, 1]", p.key("score").str(), d.score));
    }
    const Json& rot = schema::require(j, "rotation", p);
    if (!rot.is_null()) {
      const int degrees = static_cast<int>(schema::require_int(j, "rotation", p));
      try {
        d.rotation = Rotation::make(*cat, degrees);
      } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", p.key("rotation").str(), e.what()));
      }
    }
    const Json& tile = schema::require(j, "source_tile", p);
    if (!tile.is_null()) d.source_tile = static_cast<int>(schema::require_int(j, "source_tile", p));
    r.detections[image].push_back(d);
  }
  for (auto& [image, list] : r.detections) canonical_sort(list);

  const Json& failures = schema::require_array(doc, "tile_failures", root);
  for (std::size_t i = 0; i < failures.size(); ++i) {
    const FieldPath p = root.key("tile_failures").index(i);
    schema::require_object(failures[i], p);
    r.tile_failures.push_back({schema::require_int(failures[i], "image_id", p),
                               static_cast<int>(schema::require_int(failures[i], "tile_index", p)),
                               schema::require_string(failures[i], "error", p)});
  }

  const FieldPath sp = root.key("merge_stats");
  const Json& stats = schema::require(doc, "merge_stats", root);
  schema::require_object(stats, sp);
  const Json& images = schema::require_array(stats, "images", sp);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FieldPath p = sp.key("images").index(i);
    const Json& j = images[i];
    schema::require_object(j, p);
    auto count = [&](const char* key) {
      const std::int64_t v = schema::require_int(j, key, p);
      if (v < 0) throw DataError(fmt::format("{}: negative count", p.key(key).str()));
      return static_cast<std::size_t>(v);
    };
    ImageMergeStats s;
    s.image_id = schema::require_int(j, "image_id", p);
    s.tiles = count("tiles");
    s.failed_tiles = count("failed_tiles");
    s.pre_nms = count("pre_nms");
    s.post_nms = count("post_nms");
    r.merge_stats.push_back(s);
  }

  if (doc.contains("orientation_stats")) {
    schema::require_object(doc["orientation_stats"], root.key("orientation_stats"));
    r.orientation_stats = doc["orientation_stats"];
  }
  if (doc.contains("errors")) {
    const Json& errors = schema::require_array(doc, "errors", root);
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i].is_string()) {
        throw DataError(fmt::format("{}: expected a string", root.key("errors").index(i).str()));
      }
      r.errors.push_back(errors[i].get<std::string>());
    }
  }
  if (doc.contains("eval")) {
    schema::require_object(doc["eval"], root.key("eval"));
    r.eval = doc["eval"];
  }
  return r;
}

void save_results(const ResultsFile& results, const std::filesystem::path& path) {
  const std::string text = canonical_dump(results_to_json(results));
  try {
    results_from_json(Json::parse(text));
  } catch (const std::exception& e) {
    throw ContractError(fmt::format("results failed self-check before write: {}", e.what()));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

ResultsFile load_results(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return results_from_json(doc);
}

}  // namespace moldscan
