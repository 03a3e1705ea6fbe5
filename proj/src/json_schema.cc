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

#include "moldscan/json_schema.h"

#include <cmath>
#include <fmt/format.h>

#include "moldscan/error.h"

namespace moldscan::schema {

using nlohmann::json;

FieldPath FieldPath::key(const std::string& k) const {
  FieldPath p = *this;
  p.path_ += p.path_.empty() ? k : "." + k;
  return p;
}

FieldPath FieldPath::index(std::size_t i) const {
  FieldPath p = *this;
  p.path_ += fmt::format("[{}]", i);
  return p;
}

void require_object(const json& v, const FieldPath& path) {
  if (!v.is_object()) throw DataError(fmt::format("{}: expected an object", path.str()));
}

const json& require(const json& obj, const std::string& key, const FieldPath& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw DataError(fmt::format("{}: missing field", path.key(key).str()));
  }
  return *it;
}

const json& require_array(const json& obj, const std::string& key, const FieldPath& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) {
    throw DataError(fmt::format("{}: expected an array", path.key(key).str()));
  }
  return v;
}

std::int64_t require_int(const json& obj, const std::string& key, const FieldPath& path) {
  const json& v = require(obj, key, path);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<std::int64_t>(d);
  }
  throw DataError(fmt::format("{}: expected an integer", path.key(key).str()));
}

double require_number(const json& obj, const std::string& key, const FieldPath& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) {
    throw DataError(fmt::format("{}: expected a number", path.key(key).str()));
  }
  return v.get<double>();
}

std::string require_string(const json& obj, const std::string& key, const FieldPath& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) {
    throw DataError(fmt::format("{}: expected a string", path.key(key).str()));
  }
  return v.get<std::string>();
}

std::vector<double> require_numbers(const json& obj, const std::string& key,
                                    std::size_t count, const FieldPath& path) {
  const json& v = require_array(obj, key, path);
  if (v.size() != count) {
    throw DataError(fmt::format("{}: expected {} numbers, got {}", path.key(key).str(),
                                count, v.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (!v[i].is_number()) {
      throw DataError(fmt::format("{}: expected a number", path.key(key).index(i).str()));
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

}  // namespace moldscan::schema
