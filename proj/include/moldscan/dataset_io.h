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

#ifndef MOLDSCAN_DATASET_IO_H_
#define MOLDSCAN_DATASET_IO_H_

#include <filesystem>
#include <string>

#include "json.hpp"

#include "moldscan/dataset.h"

namespace moldscan {

using Json = nlohmann::json;

// Canonical text form: sorted keys, two-space indent, arrays of scalars on
// one line, floats fixed at 4 decimals under "bbox"/"origin" keys and 6
// decimals elsewhere. A trailing newline ends the document.
std::string canonical_dump(const Json& doc);

Json box_to_json(const PixelBox& box);

Json dataset_to_json(const Dataset& dataset);
// Throws DataError with a path-to-field diagnostic ("annotations[3].bbox[2]")
// for schema violations; referential breaks are enumerated in one message.
Dataset dataset_from_json(const Json& doc);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace moldscan

#endif  // MOLDSCAN_DATASET_IO_H_
