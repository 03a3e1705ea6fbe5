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

// Command-line front end: synth, crop, detect, eval and report.

#include <cstdio>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "moldscan/dataset_io.h"
#include "moldscan/error.h"
#include "moldscan/metrics.h"
#include "moldscan/orientation.h"
#include "moldscan/overlay.h"
#include "moldscan/pipeline.h"
#include "moldscan/results.h"
#include "moldscan/synthgen.h"
#include "moldscan/tiler.h"
#include "moldscan/util.h"

namespace fs = std::filesystem;
using namespace moldscan;

namespace {

Family parse_family(const std::string& name) {
  const auto f = family_from_name(name);
  if (!f) throw ConfigError(fmt::format("unknown family \"{}\" (expected injection or press)", name));
  return *f;
}

struct SynthArgs {
  fs::path out;
  int count = 10;
  std::uint64_t seed = 1;
  int parts = 25;
  int width = 4000;
  int height = 2400;
  double train_fraction = 0.75;
  bool no_clutter = false;
  std::string family;
};

int run_synth(const SynthArgs& a) {
  SynthConfig base;
  base.parts = a.parts;
  base.width = a.width;
  base.height = a.height;
  base.clutter = !a.no_clutter;
  if (!a.family.empty()) {
    for (Category c : categories_of(parse_family(a.family))) base.mix[c] = 1.0;
  }
  const GlyphLibrary library;
  const auto configs = make_config_set(base, a.count, a.seed);
  SyntheticDataset data = generate_dataset(configs, library, a.train_fraction);
  data.manifest.seed = a.seed;
  write_synthetic_dataset(data, a.out);
  load_dataset(a.out / "dataset.json");
  fmt::print(stderr, "wrote {} drawings, {} parts to {}\n", data.dataset.images.size(),
             data.dataset.annotations.size(), a.out.string());
  return kExitOk;
}

struct CropArgs {
  fs::path dataset;
  fs::path images;
  fs::path out;
  std::string family;
  std::string purpose = "detection";
  std::string mode = "training";
  std::optional<double> overlap;
  std::optional<double> threshold;
  int threads = 1;
};

int export_orientation_crops(const Dataset& dataset, const fs::path& root, Family family,
                             const fs::path& out) {
  const OrientationCropConfig cfg;
  Json crops = Json::array();
  std::vector<std::string> errors;
  for (const auto& [image_id, anns] : dataset.annotations_by_image()) {
    const ImageRecord* img = dataset.find_image(image_id);
    Raster gray;
    bool loaded = false;
    for (const Annotation& a : anns) {
      if (family_of(a.category) != family || !rotation_variant(a.category)) continue;
      if (!loaded) {
        try {
          gray = to_gray(load_png(root / img->file_name));
        } catch (const Error& e) {
          errors.push_back(fmt::format("image {}: {}", image_id, e.what()));
          break;
        }
        loaded = true;
      }
      const int label = encode_label(a.category, a.rotation);
      const std::string file = fmt::format("orientation/{}/{}.png", image_id, a.id);
      save_png(out / file, crop_for_orientation(gray, a.box, cfg));
      crops.push_back({{"file_name", file},
                       {"drawing_id", image_id},
                       {"annotation_id", a.id},
                       {"label_index", label},
                       {"label", label_name(label_space(family)[static_cast<std::size_t>(label)])}});
    }
  }
  Json labels = Json::array();
  for (const CompositeLabel& l : label_space(family)) labels.push_back(label_name(l));
  const Json doc = {{"family", family_name(family)},
                    {"target_side", cfg.target_side},
                    {"padding", cfg.padding},
                    {"labels", labels},
                    {"crops", crops},
                    {"errors", errors}};
  write_file_atomic(out / "orientation.json", canonical_dump(doc));
  for (const auto& e : errors) fmt::print(stderr, "{}\n", e);
  fmt::print(stderr, "wrote {} orientation crops to {}\n", crops.size(), out.string());
  return errors.empty() ? kExitOk : kExitData;
}

int run_crop(const CropArgs& a) {
  const Family family = parse_family(a.family);
  const Dataset full = load_dataset(a.dataset);
  Dataset ds = full;
  ds.annotations = filter_family(full.annotations, family);
  const fs::path root = a.images.empty() ? a.dataset.parent_path() : a.images;
  fs::create_directories(a.out);
  if (a.purpose == "orientation") return export_orientation_crops(ds, root, family, a.out);
  if (a.purpose != "detection") {
    throw ConfigError(fmt::format("unknown purpose \"{}\" (expected detection or orientation)", a.purpose));
  }
  const auto mode = tile_mode_from_name(a.mode);
  if (!mode) throw ConfigError(fmt::format("unknown tile mode \"{}\"", a.mode));
  TilerConfig cfg = TilerConfig::defaults(family, *mode);
  if (a.overlap) cfg.overlap = *a.overlap;
  if (a.threshold) cfg.visibility_threshold = *a.threshold;
  cfg.validate();
  const CropExportReport report = export_crop_dataset(ds, root, cfg, a.out, a.threads);
  load_dataset(a.out / "crops.json");
  for (const auto& e : report.drawing_errors) fmt::print(stderr, "{}\n", e);
  fmt::print(stderr, "wrote {} tiles with {} annotations to {}\n", report.tiles_written,
             report.crops.annotations.size(), a.out.string());
  return report.drawing_errors.empty() ? kExitOk : kExitData;
}

struct DetectArgs {
  fs::path config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string family;
  bool reproducible = false;
  fs::path out;
  std::optional<int> threads;
  bool quiet = false;
};

int run_detect(const DetectArgs& a) {
  std::vector<std::string> overrides = a.overrides;
  if (a.seed) overrides.push_back(fmt::format("seed={}", *a.seed));
  if (!a.family.empty()) overrides.push_back(fmt::format("family=\"{}\"", a.family));
  if (a.reproducible) overrides.push_back("reproducible=true");
  if (a.threads) overrides.push_back(fmt::format("threads={}", *a.threads));
  if (!a.out.empty()) overrides.push_back(fmt::format("output={}", Json(a.out.string()).dump()));
  const PipelineConfig cfg = config_from_json(load_config_document(a.config, overrides));
  PipelineRun run = run_pipeline(cfg);
  save_results(run.results, cfg.output);
  for (const auto& d : run.diagnostics) fmt::print(stderr, "{}\n", d);
  if (!a.quiet) {
    std::size_t n = 0;
    for (const auto& [id, dets] : run.results.detections) n += dets.size();
    fmt::print(stderr, "{} detections over {} images -> {}\n", n, run.results.detections.size(),
               cfg.output.string());
    if (run.results.eval) fmt::print(stderr, "{}", format_eval_table(*run.results.eval));
  }
  return run.exit_code;
}

struct EvalArgs {
  fs::path results;
  fs::path dataset;
  fs::path out;
  bool table = false;
};

int run_eval(const EvalArgs& a) {
  const ResultsFile results = load_results(a.results);
  const Dataset dataset = load_dataset(a.dataset);
  std::vector<Annotation> truth;
  for (const Annotation& ann : dataset.annotations) {
    if (results.detections.count(ann.image_id)) truth.push_back(ann);
  }
  const EvalReport report = evaluate(results.detections, truth, results.meta.family);
  const Json doc = eval_report_to_json(report);
  const std::string text = canonical_dump(doc);
  format_eval_table(Json::parse(text));
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(a.out, text);
  }
  if (a.table) std::cerr << format_eval_table(report);
  return kExitOk;
}

struct ReportArgs {
  fs::path results;
  fs::path dataset;
  fs::path images;
  fs::path out;
  bool ground_truth = false;
  bool scores = false;
};

int run_report(const ReportArgs& a) {
  const ResultsFile results = load_results(a.results);
  const Dataset dataset = load_dataset(a.dataset);
  const fs::path root = a.images.empty() ? a.dataset.parent_path() : a.images;
  fs::create_directories(a.out);
  OverlayStyle style;
  style.show_scores = a.scores;
  const auto truth = dataset.annotations_by_image();
  int status = kExitOk;
  for (const auto& [image_id, dets] : results.detections) {
    const ImageRecord* img = dataset.find_image(image_id);
    if (!img) {
      fmt::print(stderr, "image {} is not in the dataset\n", image_id);
      status = kExitData;
      continue;
    }
    Raster image;
    try {
      image = load_png(root / img->file_name);
    } catch (const Error& e) {
      fmt::print(stderr, "image {}: {}\n", image_id, e.what());
      status = kExitData;
      continue;
    }
    save_png(a.out / fmt::format("overlay_{:06d}.png", image_id),
             render_overlay(image, overlay_items(dets), style));
    if (a.ground_truth) {
      std::vector<Annotation> gt;
      if (auto it = truth.find(image_id); it != truth.end()) {
        for (const Annotation& ann : it->second) {
          if (family_of(ann.category) == results.meta.family) gt.push_back(ann);
        }
      }
      save_png(a.out / fmt::format("truth_{:06d}.png", image_id),
               render_overlay(image, overlay_items(gt), style));
    }
  }
  std::vector<Annotation> truth_list;
  for (const Annotation& ann : dataset.annotations) {
    if (results.detections.count(ann.image_id)) truth_list.push_back(ann);
  }
  const std::string table = results.eval
                                ? format_eval_table(*results.eval)
                                : format_eval_table(evaluate(results.detections, truth_list,
                                                             results.meta.family));
  write_file_atomic(a.out / "table.txt", table);
  std::cout << table;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moldscan: mold-part detection on engineering drawings"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic drawing dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of drawings");
  s->add_option("--seed", synth.seed, "Base seed");
  s->add_option("--parts", synth.parts, "Parts per drawing");
  s->add_option("--width", synth.width, "Drawing width");
  s->add_option("--height", synth.height, "Drawing height");
  s->add_option("--train-fraction", synth.train_fraction, "Share of drawings in the train split");
  s->add_flag("--no-clutter", synth.no_clutter, "Leave out the frame and dimension lines");
  s->add_option("--family", synth.family, "Only place parts of this family");

  CropArgs crop;
  auto* c = app.add_subcommand("crop", "Export tile crops or orientation crops");
  c->add_option("--dataset", crop.dataset, "Dataset file")->required();
  c->add_option("--images", crop.images, "Image root (default: dataset directory)");
  c->add_option("--out", crop.out, "Output directory")->required();
  c->add_option("--family", crop.family, "injection or press")->required();
  c->add_option("--purpose", crop.purpose, "detection or orientation");
  c->add_option("--mode", crop.mode, "training or inference");
  c->add_option("--overlap", crop.overlap, "Window overlap fraction");
  c->add_option("--threshold", crop.threshold, "Visibility threshold");
  c->add_option("--threads", crop.threads, "Worker threads (0 = all cores)");

  DetectArgs detect;
  auto* d = app.add_subcommand("detect", "Run the detection pipeline");
  d->add_option("--config", detect.config, "Config file");
  d->add_option("--set", detect.overrides, "Override a config key (key=value)");
  d->add_option("--seed", detect.seed, "Run seed");
  d->add_option("--family", detect.family, "injection or press");
  d->add_flag("--reproducible", detect.reproducible, "Leave timestamps out of the results");
  d->add_option("--out", detect.out, "Results file");
  d->add_option("--threads", detect.threads, "Worker threads (0 = all cores)");
  d->add_flag("--quiet", detect.quiet, "Only print diagnostics");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score a results file against ground truth");
  e->add_option("--results", eval.results, "Results file")->required();
  e->add_option("--dataset", eval.dataset, "Dataset file with ground truth")->required();
  e->add_option("--out", eval.out, "Report file (default: stdout)");
  e->add_flag("--table", eval.table, "Print the summary table to stderr");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Render overlays and the summary table");
  r->add_option("--results", report.results, "Results file")->required();
  r->add_option("--dataset", report.dataset, "Dataset file")->required();
  r->add_option("--images", report.images, "Image root (default: dataset directory)");
  r->add_option("--out", report.out, "Output directory")->required();
  r->add_flag("--ground-truth", report.ground_truth, "Also render ground-truth overlays");
  r->add_flag("--scores", report.scores, "Print scores in tags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*s) return run_synth(synth);
    if (*c) return run_crop(crop);
    if (*d) return run_detect(detect);
    if (*e) return run_eval(eval);
    if (*r) return run_report(report);
  } catch (const ConfigError& err) {
    fmt::print(stderr, "config error: {}\n", err.what());
    return kExitConfig;
  } catch (const std::exception& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return kExitData;
  }
  return kExitOk;
}
