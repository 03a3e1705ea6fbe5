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

#ifndef MOLDSCAN_DATASET_H_
#define MOLDSCAN_DATASET_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moldscan/core.h"

namespace moldscan {

// Where an exported crop came from.
struct TileProvenance {
  ImageId drawing_id = 0;
  int tile_index = 0;
  int x0 = 0;
  int y0 = 0;

  friend bool operator==(const TileProvenance&, const TileProvenance&) = default;
};

struct ImageRecord {
  ImageId id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::optional<TileProvenance> source;
};

struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;

  const ImageRecord* find_image(ImageId id) const;
  // Annotations grouped by image id, each group in file order.
  std::map<ImageId, std::vector<Annotation>> annotations_by_image() const;
};

// Keeps only annotations of the given family.
std::vector<Annotation> filter_family(const std::vector<Annotation>& annotations,
                                      Family family);

}  // namespace moldscan

#endif  // MOLDSCAN_DATASET_H_
