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

#ifndef MOLDSCAN_ERROR_H_
#define MOLDSCAN_ERROR_H_

#include <stdexcept>
#include <string>

namespace moldscan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration; detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data: schema violations, out-of-bounds boxes, bad rasters.
class DataError : public Error {
 public:
  using Error::Error;
};

// A backend broke the detector/classifier contract or the wire protocol.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace moldscan

#endif  // MOLDSCAN_ERROR_H_
