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

#ifndef MOLDSCAN_JSON_SCHEMA_H_
#define MOLDSCAN_JSON_SCHEMA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

// Field accessors that throw DataError naming the offending field path.
namespace moldscan::schema {

class FieldPath {
 public:
  FieldPath key(const std::string& k) const;
  FieldPath index(std::size_t i) const;
  std::string str() const { return path_.empty() ? "<root>" : path_; }

 private:
  std::string path_;
};

void require_object(const nlohmann::json& v, const FieldPath& path);
const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                              const FieldPath& path);
const nlohmann::json& require_array(const nlohmann::json& obj, const std::string& key,
                                    const FieldPath& path);
std::int64_t require_int(const nlohmann::json& obj, const std::string& key,
                         const FieldPath& path);
double require_number(const nlohmann::json& obj, const std::string& key,
                      const FieldPath& path);
std::string require_string(const nlohmann::json& obj, const std::string& key,
                           const FieldPath& path);
std::vector<double> require_numbers(const nlohmann::json& obj, const std::string& key,
                                    std::size_t count, const FieldPath& path);

}  // namespace moldscan::schema

#endif  // MOLDSCAN_JSON_SCHEMA_H_
