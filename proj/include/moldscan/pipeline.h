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

#ifndef MOLDSCAN_PIPELINE_H_
#define MOLDSCAN_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "moldscan/dataset_io.h"
#include "moldscan/detect.h"
#include "moldscan/merger.h"
#include "moldscan/metrics.h"
#include "moldscan/orientation.h"
#include "moldscan/results.h"
#include "moldscan/tiler.h"

namespace moldscan {

enum class FailurePolicy { kFailAny, kFailNone, kThreshold };
enum class OrientationSource { kDetections, kGroundTruth };

struct DetectorSpec {
  std::string kind = "oracle";  // oracle | template | external
  NoiseConfig noise;            // oracle only; the seed comes from the run seed
  ExternalEndpoint endpoint;    // external only
};

struct ClassifierSpec {
  std::string kind = "oracle";  // oracle | template | external
  ExternalEndpoint endpoint;
};

struct TemplateSpec {
  int injection_size = 48;
  int press_size = 64;
  double threshold = 0.8;
  int stride = 1;
  double peak_suppression_iou = 0.2;
};

struct PipelineConfig {
  Family family = Family::kInjection;
  std::uint64_t seed = 1;
  std::filesystem::path dataset;
  // Empty means the dataset file's directory.
  std::filesystem::path image_root;
  // all | train | test; train and test read manifest.json beside the dataset.
  std::string split = "all";
  std::filesystem::path output = "results.json";
  TilerConfig tiler = TilerConfig::defaults(Family::kInjection, TileMode::kInference);
  MergeConfig merge;
  OrientationConfig orientation;
  OrientationSource orientation_source = OrientationSource::kDetections;
  bool evaluate = true;
  EvalConfig eval;
  DetectorSpec detector;
  ClassifierSpec classifier;
  TemplateSpec templates;
  FailurePolicy failure_policy = FailurePolicy::kFailAny;
  double failure_threshold = 0.0;  // fraction of tiles, kThreshold only
  int threads = 1;
  bool reproducible = false;
};

// Sets a dotted key from "a.b.c=value". The value is read as JSON when it
// parses, otherwise as a string. Throws ConfigError for a malformed spec.
void apply_override(Json& doc, std::string_view assignment);

// Unknown keys, unknown backend names and out-of-range values are
// ConfigErrors. Tiler fields left out take the family's inference defaults.
PipelineConfig config_from_json(const Json& doc);
// Fully resolved form; config_from_json(config_to_json(c)) reproduces c.
Json config_to_json(const PipelineConfig& cfg);
// SHA-256 over the resolved config, excluding output path, thread count and
// the reproducible flag, which do not change results.
std::string config_hash(const PipelineConfig& cfg);

// Reads a config file (a missing path means all defaults), then applies the
// overrides in order.
Json load_config_document(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides);

struct PipelineRun {
  ResultsFile results;
  int exit_code = 0;  // 0, or 3 when tile failures exceed the policy
  std::vector<std::string> diagnostics;
};

// plan, detect, merge, orient, and evaluate when ground truth is present.
// Throws ConfigError or DataError before any tile work for bad inputs.
PipelineRun run_pipeline(const PipelineConfig& cfg);

// 0 success, 1 config error, 2 data error, 3 tile failures over threshold.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTileFailures = 3;

}  // namespace moldscan

#endif  // MOLDSCAN_PIPELINE_H_
