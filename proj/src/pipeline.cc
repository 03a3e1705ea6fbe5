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

#include "moldscan/pipeline.h"

#include <chrono>
#include <ctime>
#include <fmt/format.h>
#include <memory>
#include <set>

#include "moldscan/error.h"
#include "moldscan/synthgen.h"
#include "moldscan/util.h"

namespace moldscan {
namespace {

// Reads typed fields out of one config section, rejecting unknown keys.
class Section {
 public:
  Section(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where()));
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key);
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = doc_.at(key);
    if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", where(key)));
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = doc_.at(key);
    if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", where(key)));
    return v.get<std::int64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = doc_.at(key);
    if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", where(key)));
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = doc_.at(key);
    if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", where(key)));
    return v.get<std::string>();
  }

  Section child(const std::string& key) {
    static const Json kEmpty = Json::object();
    return Section(has(key) ? doc_.at(key) : kEmpty, where(key));
  }

  // Call once every field has been read.
  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(fmt::format("unknown config key {}", where(it.key())));
    }
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<config>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const Json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::set<std::string> kBackends = {"oracle", "template", "external"};

std::string policy_name(FailurePolicy p) {
  switch (p) {
    case FailurePolicy::kFailAny: return "fail-any";
    case FailurePolicy::kFailNone: return "fail-none";
    case FailurePolicy::kThreshold: return "threshold";
  }
  return "fail-any";
}

std::string source_name(OrientationSource s) {
  return s == OrientationSource::kDetections ? "detections" : "ground_truth";
}

ExternalEndpoint read_endpoint(Section& s) {
  ExternalEndpoint e;
  if (s.has("command")) {
    const Json& cmd = s.raw("command");
    if (!cmd.is_array()) throw ConfigError(fmt::format("{}: expected a list", s.where("command")));
    for (const Json& part : cmd) {
      if (!part.is_string()) {
        throw ConfigError(fmt::format("{}: expected strings", s.where("command")));
      }
      e.command.push_back(part.get<std::string>());
    }
  }
  e.timeout = std::chrono::milliseconds(s.integer("timeout_ms", 30000));
  e.pool_size = static_cast<int>(s.integer("pool_size", 1));
  if (e.timeout.count() < 1) throw ConfigError(fmt::format("{}: must be positive", s.where("timeout_ms")));
  if (e.pool_size < 1) throw ConfigError(fmt::format("{}: must be positive", s.where("pool_size")));
  return e;
}

std::string backend_kind(Section& s, const std::string& fallback) {
  const std::string kind = s.string("kind", fallback);
  if (!kBackends.count(kind)) {
    throw ConfigError(fmt::format("{}: unknown backend \"{}\" (expected oracle, template or external)",
                                  s.where("kind"), kind));
  }
  return kind;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", tm.tm_year + 1900, tm.tm_mon + 1,
                     tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
}

std::vector<ImageId> read_split(const std::filesystem::path& dataset_path, const std::string& split) {
  const auto manifest_path = dataset_path.parent_path() / "manifest.json";
  Json doc;
  try {
    doc = Json::parse(read_file(manifest_path));
  } catch (const Json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  if (!doc.is_object() || !doc.contains(split) || !doc[split].is_array()) {
    throw DataError(fmt::format("{}: missing \"{}\" list", manifest_path.string(), split));
  }
  std::vector<ImageId> ids;
  for (const Json& v : doc[split]) {
    if (!v.is_number_integer()) {
      throw DataError(fmt::format("{}: {} ids must be integers", manifest_path.string(), split));
    }
    ids.push_back(v.get<ImageId>());
  }
  return ids;
}

Json orientation_stats_json(const OrientationStats& s) {
  return {{"classified", s.classified},
          {"symmetric", s.symmetric},
          {"mismatches", s.mismatches},
          {"low_confidence", s.low_confidence},
          {"failures", s.failures},
          {"errors", s.errors}};
}

TemplateBank make_bank(const PipelineConfig& cfg) {
  const GlyphLibrary library(cfg.templates.injection_size, cfg.templates.press_size);
  TemplateBank bank = export_template_bank(library, cfg.family);
  bank.threshold = cfg.templates.threshold;
  bank.stride = cfg.templates.stride;
  bank.peak_suppression_iou = cfg.templates.peak_suppression_iou;
  return bank;
}

}  // namespace

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override \"{}\" is not key=value", assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("override key \"{}\" has an empty segment", key));
    if (!node->is_object()) {
      throw ConfigError(fmt::format("override \"{}\": {} is not a section", key, part));
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = Json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

PipelineConfig config_from_json(const Json& doc) {
  PipelineConfig cfg;
  Section root(doc, "");

  const std::string family = root.string("family", "injection");
  const auto fam = family_from_name(family);
  if (!fam) throw ConfigError(fmt::format("family: unknown family \"{}\"", family));
  cfg.family = *fam;
  const std::int64_t seed = root.integer("seed", 1);
  if (seed < 0) throw ConfigError("seed: must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.threads = static_cast<int>(root.integer("threads", 1));
  if (cfg.threads < 0) throw ConfigError("threads: must be >= 0 (0 = all cores)");
  cfg.reproducible = root.boolean("reproducible", false);
  cfg.output = root.string("output", "results.json");

  {
    Section s = root.child("dataset");
    cfg.dataset = s.string("path", "");
    cfg.image_root = s.string("image_root", "");
    cfg.split = s.string("split", "all");
    if (cfg.split != "all" && cfg.split != "train" && cfg.split != "test") {
      throw ConfigError(fmt::format("dataset.split: \"{}\" is not all, train or test", cfg.split));
    }
    s.finish();
  }
  {
    Section s = root.child("tiler");
    const std::string mode_name = s.string("mode", "inference");
    const auto mode = tile_mode_from_name(mode_name);
    if (!mode) throw ConfigError(fmt::format("tiler.mode: unknown mode \"{}\"", mode_name));
    TilerConfig t = TilerConfig::defaults(cfg.family, *mode);
    t.tile_w = static_cast<int>(s.integer("tile_w", t.tile_w));
    t.tile_h = static_cast<int>(s.integer("tile_h", t.tile_h));
    t.overlap = s.number("overlap", t.overlap);
    t.visibility_threshold = s.number("visibility_threshold", t.visibility_threshold);
    s.finish();
    t.validate();
    cfg.tiler = t;
  }
  {
    Section s = root.child("merge");
    cfg.merge.nms_iou = s.number("nms_iou", cfg.merge.nms_iou);
    cfg.merge.score_floor = s.number("score_floor", cfg.merge.score_floor);
    cfg.merge.class_aware = s.boolean("class_aware", cfg.merge.class_aware);
    s.finish();
    cfg.merge.validate();
  }
  {
    Section s = root.child("orientation");
    OrientationCropConfig& c = cfg.orientation.crop;
    c.target_side = static_cast<int>(s.integer("target_side", c.target_side));
    c.padding = s.number("padding", c.padding);
    const std::int64_t fill = s.integer("fill", c.fill);
    if (fill < 0 || fill > 255) throw ConfigError("orientation.fill: must be in [0, 255]");
    c.fill = static_cast<std::uint8_t>(fill);
    cfg.orientation.confidence_floor = s.number("confidence_floor", cfg.orientation.confidence_floor);
    const std::string source = s.string("source", "detections");
    if (source == "detections") {
      cfg.orientation_source = OrientationSource::kDetections;
    } else if (source == "ground_truth") {
      cfg.orientation_source = OrientationSource::kGroundTruth;
    } else {
      throw ConfigError(fmt::format("orientation.source: \"{}\" is not detections or ground_truth", source));
    }
    s.finish();
    c.validate();
    if (!(cfg.orientation.confidence_floor >= 0.0 && cfg.orientation.confidence_floor <= 1.0)) {
      throw ConfigError("orientation.confidence_floor: must be in [0, 1]");
    }
  }
  {
    Section s = root.child("eval");
    cfg.evaluate = s.boolean("enabled", true);
    if (s.has("iou_thresholds")) {
      const Json& t = s.raw("iou_thresholds");
      if (!t.is_array()) throw ConfigError("eval.iou_thresholds: expected a list");
      cfg.eval.iou_thresholds.clear();
      for (const Json& v : t) {
        if (!v.is_number()) throw ConfigError("eval.iou_thresholds: expected numbers");
        cfg.eval.iou_thresholds.push_back(v.get<double>());
      }
    }
    cfg.eval.recall_points = static_cast<int>(s.integer("recall_points", cfg.eval.recall_points));
    cfg.eval.max_detections = static_cast<int>(s.integer("max_detections", cfg.eval.max_detections));
    s.finish();
    cfg.eval.validate();
  }
  {
    Section b = root.child("backend");
    Section d = b.child("detector");
    cfg.detector.kind = backend_kind(d, "oracle");
    {
      Section n = d.child("noise");
      cfg.detector.noise.jitter_sigma = n.number("jitter_sigma", 0.0);
      cfg.detector.noise.drop_probability = n.number("drop_probability", 0.0);
      cfg.detector.noise.false_positive_rate = n.number("false_positive_rate", 0.0);
      n.finish();
      const NoiseConfig& nc = cfg.detector.noise;
      if (nc.jitter_sigma < 0.0 || !(nc.drop_probability >= 0.0 && nc.drop_probability <= 1.0) ||
          nc.false_positive_rate < 0.0) {
        throw ConfigError("backend.detector.noise: values out of range");
      }
    }
    cfg.detector.endpoint = read_endpoint(d);
    d.finish();
    Section c = b.child("classifier");
    cfg.classifier.kind = backend_kind(c, "oracle");
    cfg.classifier.endpoint = read_endpoint(c);
    c.finish();
    Section t = b.child("templates");
    cfg.templates.injection_size = static_cast<int>(t.integer("injection_size", 48));
    cfg.templates.press_size = static_cast<int>(t.integer("press_size", 64));
    cfg.templates.threshold = t.number("threshold", 0.8);
    cfg.templates.stride = static_cast<int>(t.integer("stride", 1));
    cfg.templates.peak_suppression_iou = t.number("peak_suppression_iou", 0.2);
    t.finish();
    b.finish();
    for (int size : {cfg.templates.injection_size, cfg.templates.press_size}) {
      if (size < 8 || size % 2 != 0) {
        throw ConfigError("backend.templates: glyph sizes must be even and >= 8");
      }
    }
    if (!(cfg.templates.threshold > -1.0 && cfg.templates.threshold <= 1.0)) {
      throw ConfigError("backend.templates.threshold: must be in (-1, 1]");
    }
    if (cfg.templates.stride < 1) throw ConfigError("backend.templates.stride: must be positive");
    if (cfg.detector.kind == "external" && cfg.detector.endpoint.command.empty()) {
      throw ConfigError("backend.detector.command: required for the external backend");
    }
    if (cfg.classifier.kind == "external" && cfg.classifier.endpoint.command.empty()) {
      throw ConfigError("backend.classifier.command: required for the external backend");
    }
  }
  {
    Section s = root.child("failure_policy");
    const std::string mode = s.string("mode", "fail-any");
    if (mode == "fail-any") {
      cfg.failure_policy = FailurePolicy::kFailAny;
    } else if (mode == "fail-none") {
      cfg.failure_policy = FailurePolicy::kFailNone;
    } else if (mode == "threshold") {
      cfg.failure_policy = FailurePolicy::kThreshold;
    } else {
      throw ConfigError(fmt::format("failure_policy.mode: unknown policy \"{}\"", mode));
    }
    cfg.failure_threshold = s.number("threshold", 0.0);
    if (!(cfg.failure_threshold >= 0.0 && cfg.failure_threshold <= 1.0)) {
      throw ConfigError("failure_policy.threshold: must be in [0, 1]");
    }
    s.finish();
  }
  root.finish();
  return cfg;
}

Json config_to_json(const PipelineConfig& cfg) {
  const OrientationCropConfig& c = cfg.orientation.crop;
  return {
      {"family", family_name(cfg.family)},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"reproducible", cfg.reproducible},
      {"output", cfg.output.string()},
      {"dataset",
       {{"path", cfg.dataset.string()},
        {"image_root", cfg.image_root.string()},
        {"split", cfg.split}}},
      {"tiler",
       {{"mode", tile_mode_name(cfg.tiler.mode)},
        {"tile_w", cfg.tiler.tile_w},
        {"tile_h", cfg.tiler.tile_h},
        {"overlap", cfg.tiler.overlap},
        {"visibility_threshold", cfg.tiler.visibility_threshold}}},
      {"merge",
       {{"nms_iou", cfg.merge.nms_iou},
        {"score_floor", cfg.merge.score_floor},
        {"class_aware", cfg.merge.class_aware}}},
      {"orientation",
       {{"target_side", c.target_side},
        {"padding", c.padding},
        {"fill", c.fill},
        {"confidence_floor", cfg.orientation.confidence_floor},
        {"source", source_name(cfg.orientation_source)}}},
      {"eval",
       {{"enabled", cfg.evaluate},
        {"iou_thresholds", cfg.eval.iou_thresholds},
        {"recall_points", cfg.eval.recall_points},
        {"max_detections", cfg.eval.max_detections}}},
      {"backend",
       {{"detector",
         {{"kind", cfg.detector.kind},
          {"noise",
           {{"jitter_sigma", cfg.detector.noise.jitter_sigma},
            {"drop_probability", cfg.detector.noise.drop_probability},
            {"false_positive_rate", cfg.detector.noise.false_positive_rate}}},
          {"command", cfg.detector.endpoint.command},
          {"timeout_ms", cfg.detector.endpoint.timeout.count()},
          {"pool_size", cfg.detector.endpoint.pool_size}}},
        {"classifier",
         {{"kind", cfg.classifier.kind},
          {"command", cfg.classifier.endpoint.command},
          {"timeout_ms", cfg.classifier.endpoint.timeout.count()},
          {"pool_size", cfg.classifier.endpoint.pool_size}}},
        {"templates",
         {{"injection_size", cfg.templates.injection_size},
          {"press_size", cfg.templates.press_size},
          {"threshold", cfg.templates.threshold},
          {"stride", cfg.templates.stride},
          {"peak_suppression_iou", cfg.templates.peak_suppression_iou}}}}},
      {"failure_policy",
       {{"mode", policy_name(cfg.failure_policy)}, {"threshold", cfg.failure_threshold}}},
  };
}

std::string config_hash(const PipelineConfig& cfg) {
  Json doc = config_to_json(cfg);
  doc.erase("output");
  doc.erase("threads");
  doc.erase("reproducible");
  // Pool sizes only change scheduling.
  doc["backend"]["detector"].erase("pool_size");
  doc["backend"]["classifier"].erase("pool_size");
  return sha256_hex(canonical_dump(doc));
}

Json load_config_document(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  Json doc = Json::object();
  if (!path.empty()) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!doc.is_object()) throw ConfigError(fmt::format("{}: expected an object", path.string()));
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  return doc;
}

PipelineRun run_pipeline(const PipelineConfig& cfg) {
  PipelineRun run;
  ResultsFile& results = run.results;
  if (!cfg.reproducible) results.meta.started_at = utc_now();
  results.meta.config_hash = config_hash(cfg);
  results.meta.seed = cfg.seed;
  results.meta.family = cfg.family;
  results.meta.detector = cfg.detector.kind;
  results.meta.classifier = cfg.classifier.kind;
  results.meta.reproducible = cfg.reproducible;

  if (cfg.dataset.empty()) throw ConfigError("dataset.path: required");
  const Dataset dataset = load_dataset(cfg.dataset);
  const std::filesystem::path image_root =
      cfg.image_root.empty() ? cfg.dataset.parent_path() : cfg.image_root;

  std::vector<const ImageRecord*> images;
  if (cfg.split == "all") {
    for (const ImageRecord& img : dataset.images) images.push_back(&img);
  } else {
    for (ImageId id : read_split(cfg.dataset, cfg.split)) {
      const ImageRecord* img = dataset.find_image(id);
      if (!img) throw DataError(fmt::format("manifest lists image {} not in the dataset", id));
      images.push_back(img);
    }
  }
  std::set<ImageId> selected;
  for (const ImageRecord* img : images) selected.insert(img->id);
  std::vector<Annotation> truth;
  for (const Annotation& a : dataset.annotations) {
    if (family_of(a.category) == cfg.family && selected.count(a.image_id)) truth.push_back(a);
  }

  std::unique_ptr<Detector> detector;
  std::unique_ptr<OrientationClassifier> classifier;
  std::optional<TemplateBank> bank;
  if (cfg.detector.kind == "template" || cfg.classifier.kind == "template") bank = make_bank(cfg);
  if (cfg.detector.kind == "oracle") {
    NoiseConfig noise = cfg.detector.noise;
    noise.seed = cfg.seed;
    detector = std::make_unique<OracleDetector>(cfg.family, truth, noise);
  } else if (cfg.detector.kind == "template") {
    detector = std::make_unique<TemplateDetector>(cfg.family, *bank);
  } else if (cfg.detector.kind == "external") {
    detector = std::make_unique<ExternalDetector>(cfg.family, cfg.detector.endpoint);
  } else {
    throw ConfigError(fmt::format("unknown detector backend \"{}\"", cfg.detector.kind));
  }
  if (cfg.classifier.kind == "oracle") {
    classifier = std::make_unique<OracleClassifier>(truth);
  } else if (cfg.classifier.kind == "template") {
    classifier = std::make_unique<TemplateClassifier>(*bank, cfg.orientation.crop);
  } else if (cfg.classifier.kind == "external") {
    classifier = std::make_unique<ExternalClassifier>(cfg.classifier.endpoint);
  } else {
    throw ConfigError(fmt::format("unknown classifier backend \"{}\"", cfg.classifier.kind));
  }
  const bool needs_pixels = detector->needs_pixels() || classifier->needs_patch();

  OrientationConfig ocfg = cfg.orientation;
  ocfg.threads = cfg.threads;
  OrientationStats stats, gt_stats;
  OrientationAccuracy gt_accuracy;
  const auto truth_by_image = [&] {
    std::map<ImageId, std::vector<Annotation>> m;
    for (const Annotation& a : truth) m[a.image_id].push_back(a);
    return m;
  }();

  for (const ImageRecord* img : images) {
    const TilePlan plan = plan_tiles(img->id, img->width, img->height, cfg.tiler);
    ImageMergeStats ms;
    ms.image_id = img->id;
    ms.tiles = plan.tiles.size();
    Raster gray;
    if (needs_pixels) {
      try {
        gray = to_gray(load_png(image_root / img->file_name));
        if (gray.width != img->width || gray.height != img->height) {
          throw DataError(fmt::format("{} is {}x{}, dataset says {}x{}", img->file_name, gray.width,
                                      gray.height, img->width, img->height));
        }
      } catch (const Error& e) {
        const std::string msg = fmt::format("image {}: {}", img->id, e.what());
        results.errors.push_back(msg);
        run.diagnostics.push_back(msg);
        for (const Tile& t : plan.tiles) results.tile_failures.push_back({img->id, t.index, e.what()});
        ms.failed_tiles = plan.tiles.size();
        results.merge_stats.push_back(ms);
        results.detections[img->id];
        continue;
      }
    }
    const std::vector<TileOutcome> outcomes =
        detect_tiles(plan, img->id, gray, *detector, cfg.threads);
    for (const TileOutcome& o : outcomes) {
      if (!o.error) continue;
      ++ms.failed_tiles;
      results.tile_failures.push_back({img->id, o.tile_index, *o.error});
      run.diagnostics.push_back(fmt::format("image {} tile {}: {}", img->id, o.tile_index, *o.error));
    }
    MergeResult merged = merge_pipeline(plan, outcomes, cfg.merge);
    ms.pre_nms = merged.pre_nms;
    ms.post_nms = merged.post_nms;
    results.detections[img->id] = assign_orientation(
        gray, img->id, std::move(merged.detections), cfg.family, *classifier, ocfg, &stats);
    results.merge_stats.push_back(ms);

    if (cfg.orientation_source == OrientationSource::kGroundTruth) {
      auto it = truth_by_image.find(img->id);
      if (it == truth_by_image.end()) continue;
      std::vector<Detection> queries;
      std::vector<const Annotation*> source;
      for (const Annotation& a : it->second) {
        if (!rotation_variant(a.category)) continue;
        queries.push_back({a.box, a.category, 1.0, std::nullopt, std::nullopt});
        source.push_back(&a);
      }
      const auto answered =
          assign_orientation(gray, img->id, queries, cfg.family, *classifier, ocfg, &gt_stats);
      for (std::size_t i = 0; i < answered.size(); ++i) {
        ++gt_accuracy.evaluated;
        if (answered[i].rotation && *answered[i].rotation == source[i]->rotation) ++gt_accuracy.correct;
      }
    }
  }
  results.orientation_stats = orientation_stats_json(stats);
  if (cfg.orientation_source == OrientationSource::kGroundTruth) {
    if (gt_accuracy.evaluated > 0) {
      gt_accuracy.value = static_cast<double>(gt_accuracy.correct) /
                          static_cast<double>(gt_accuracy.evaluated);
    }
    results.orientation_stats["ground_truth_crops"] = orientation_stats_json(gt_stats);
  }
  for (const std::string& e : stats.errors) run.diagnostics.push_back("orientation: " + e);

  if (cfg.evaluate && !truth.empty()) {
    EvalReport report = evaluate(results.detections, truth, cfg.family, cfg.eval);
    if (cfg.orientation_source == OrientationSource::kGroundTruth) report.orientation = gt_accuracy;
    Json j = eval_report_to_json(report);
    j["orientation"]["source"] = source_name(cfg.orientation_source);
    results.eval = std::move(j);
  }

  const std::size_t total = results.total_tiles(), failed = results.failed_tiles();
  bool over = false;
  switch (cfg.failure_policy) {
    case FailurePolicy::kFailAny: over = failed > 0; break;
    case FailurePolicy::kFailNone: over = false; break;
    case FailurePolicy::kThreshold:
      over = total > 0 && static_cast<double>(failed) / static_cast<double>(total) > cfg.failure_threshold;
      break;
  }
  if (failed > 0) {
    run.diagnostics.push_back(fmt::format("{} of {} tiles failed (policy {})", failed, total,
                                          policy_name(cfg.failure_policy)));
  }
  run.exit_code = over ? kExitTileFailures : kExitOk;
  if (!cfg.reproducible) results.meta.finished_at = utc_now();
  return run;
}

}  // namespace moldscan
