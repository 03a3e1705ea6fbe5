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

#ifndef MOLDSCAN_UTIL_H_
#define MOLDSCAN_UTIL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace moldscan {

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
// concurrency). Exceptions from the body propagate after all workers join;
// the first one by index wins.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

int resolve_threads(int requested);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws DataError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::string_view data);

}  // namespace moldscan

#endif  // MOLDSCAN_UTIL_H_
