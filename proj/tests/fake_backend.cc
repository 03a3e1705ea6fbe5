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

// Scripted stand-in for an external detector or orientation classifier.
//
//   fake_backend echo [category]       fixed detection list
//   fake_backend bad-score             score 1.5
//   fake_backend wrong-id              answers with id + 1
//   fake_backend malformed             not JSON
//   fake_backend hang <id>             never answers request <id>
//   fake_backend die                   exits on the first request
//   fake_backend classify <label> <confidence>
//   fake_backend classify-by-id        label = id % 6, confidence 0.9

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "json.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line, nullptr, false);
    const std::int64_t id = req.is_object() && req.contains("id") ? req["id"].get<std::int64_t>() : -1;
    json resp = {{"id", id}};
    if (mode == "echo" || mode == "hang") {
      if (mode == "hang" && argc > 2 && id == std::atoll(argv[2])) {
        std::this_thread::sleep_for(std::chrono::hours(1));
      }
      const std::string category = mode == "echo" && argc > 2 ? argv[2] : "Hook";
      resp["detections"] = json::array(
          {{{"x", 1.5}, {"y", 2.0}, {"w", 10.0}, {"h", 12.0}, {"category", category}, {"score", 0.9}},
           {{"x", 20.0}, {"y", 4.0}, {"w", 8.0}, {"h", 8.0}, {"category", category}, {"score", 0.25}}});
    } else if (mode == "bad-score") {
      resp["detections"] = json::array(
          {{{"x", 1}, {"y", 1}, {"w", 5}, {"h", 5}, {"category", "Hook"}, {"score", 1.5}}});
    } else if (mode == "wrong-id") {
      resp["id"] = id + 1;
      resp["detections"] = json::array();
    } else if (mode == "malformed") {
      std::cout << "{not json" << std::endl;
      continue;
    } else if (mode == "die") {
      return 3;
    } else if (mode == "classify") {
      resp["label_index"] = argc > 2 ? std::atoi(argv[2]) : 0;
      resp["confidence"] = argc > 3 ? std::atof(argv[3]) : 1.0;
    } else if (mode == "classify-by-id") {
      resp["label_index"] = id % 6;
      resp["confidence"] = 0.9;
    } else {
      std::cerr << "unknown mode " << mode << "\n";
      return 2;
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
