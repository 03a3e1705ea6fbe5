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

#ifndef MOLDSCAN_RESULTS_H_
#define MOLDSCAN_RESULTS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "moldscan/core.h"
#include "moldscan/dataset_io.h"
#include "moldscan/metrics.h"

namespace moldscan {

struct RunMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  Family family = Family::kInjection;
  std::string detector;
  std::string classifier;
  bool reproducible = false;
  // Omitted in reproducible runs.
  std::optional<std::string> started_at;
  std::optional<std::string> finished_at;
};

struct TileFailure {
  ImageId image_id = 0;
  int tile_index = 0;
  std::string error;
};

struct ImageMergeStats {
  ImageId image_id = 0;
  std::size_t tiles = 0;
  std::size_t failed_tiles = 0;
  std::size_t pre_nms = 0;
  std::size_t post_nms = 0;
};

struct ResultsFile {
  RunMeta meta;
  // Per image in canonical order; images ascend by id.
  DetectionsByImage detections;
  std::vector<TileFailure> tile_failures;
  std::vector<ImageMergeStats> merge_stats;
  // Orientation counters; kept as JSON so the file stays self-describing.
  Json orientation_stats = Json::object();
  std::vector<std::string> errors;
  std::optional<Json> eval;

  std::size_t total_tiles() const;
  std::size_t failed_tiles() const;
};

Json eval_report_to_json(const EvalReport& report);

// Per-category AP / AP50 / AP75 / AR table plus orientation accuracy.
std::string format_eval_table(const EvalReport& report);
// Same table from the JSON form stored in a results file.
std::string format_eval_table(const Json& report);

Json results_to_json(const ResultsFile& results);
// Throws DataError with field paths. Detections are re-sorted canonically.
ResultsFile results_from_json(const Json& doc);

// Serializes, re-parses the text as a self-check, then writes atomically.
void save_results(const ResultsFile& results, const std::filesystem::path& path);
ResultsFile load_results(const std::filesystem::path& path);

}  // namespace moldscan

#endif  // MOLDSCAN_RESULTS_H_
