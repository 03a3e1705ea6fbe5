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

#ifndef MOLDSCAN_IMAGE_H_
#define MOLDSCAN_IMAGE_H_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace moldscan {

// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int w, int h, int c = 1, std::uint8_t fill = 0);

  bool empty() const { return width == 0 || height == 0; }
  std::size_t stride() const { return static_cast<std::size_t>(width) * channels; }

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[static_cast<std::size_t>(y) * stride() +
                  static_cast<std::size_t>(x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[static_cast<std::size_t>(y) * stride() +
                  static_cast<std::size_t>(x) * channels + c];
  }
  const std::uint8_t* row(int y) const {
    return pixels.data() + static_cast<std::size_t>(y) * stride();
  }

  friend bool operator==(const Raster&, const Raster&) = default;
};

// Rec. 601 luma, rounded. Gray input is returned unchanged.
Raster to_gray(const Raster& src);
Raster to_rgb(const Raster& src);

// Exact copy of the window; throws DataError when it leaves the raster.
Raster crop(const Raster& src, int x0, int y0, int w, int h);

// Rotates clockwise by quarter_turns * 90 degrees. Lossless.
Raster rotate_quarter_turns(const Raster& src, int quarter_turns);

// Pastes `patch` with its top-left corner at (x0, y0); clipped to `dst`.
void paste(Raster& dst, const Raster& patch, int x0, int y0);

// PNG I/O, 8-bit gray or RGB. Alpha is composited away on load.
Raster load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Raster& raster);
std::vector<std::uint8_t> encode_png(const Raster& raster);

}  // namespace moldscan

#endif  // MOLDSCAN_IMAGE_H_
