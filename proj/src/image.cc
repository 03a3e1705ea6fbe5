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

#include "moldscan/image.h"

#include <png.h>

#include <cstring>
#include <fmt/format.h>

#include "moldscan/error.h"
#include "moldscan/util.h"

namespace moldscan {

Raster::Raster(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {}

Raster to_gray(const Raster& src) {
  if (src.channels == 1) return src;
  Raster out(src.width, src.height, 1);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const int r = src.at(x, y, 0), g = src.at(x, y, 1), b = src.at(x, y, 2);
      out.at(x, y) = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
  }
  return out;
}

Raster to_rgb(const Raster& src) {
  if (src.channels == 3) return src;
  Raster out(src.width, src.height, 3);
  for (std::size_t i = 0; i < src.pixels.size(); ++i) {
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = src.pixels[i];
  }
  return out;
}

Raster crop(const Raster& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > src.width ||
      y0 + h > src.height) {
    throw DataError(fmt::format("crop window ({}, {}, {}x{}) outside {}x{} raster",
                                x0, y0, w, h, src.width, src.height));
  }
  Raster out(w, h, src.channels);
  const std::size_t row_bytes = static_cast<std::size_t>(w) * src.channels;
  for (int y = 0; y < h; ++y) {
    std::memcpy(out.pixels.data() + y * row_bytes,
                src.row(y0 + y) + static_cast<std::size_t>(x0) * src.channels,
                row_bytes);
  }
  return out;
}

Raster rotate_quarter_turns(const Raster& src, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return src;
  const bool swap = (k % 2) == 1;
  Raster out(swap ? src.height : src.width, swap ? src.width : src.height,
             src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      int dx = 0, dy = 0;
      switch (k) {
        case 1: dx = src.height - 1 - y; dy = x; break;
        case 2: dx = src.width - 1 - x; dy = src.height - 1 - y; break;
        case 3: dx = y; dy = src.width - 1 - x; break;
      }
      for (int c = 0; c < src.channels; ++c) out.at(dx, dy, c) = src.at(x, y, c);
    }
  }
  return out;
}

void paste(Raster& dst, const Raster& patch, int x0, int y0) {
  for (int y = 0; y < patch.height; ++y) {
    const int ty = y0 + y;
    if (ty < 0 || ty >= dst.height) continue;
    for (int x = 0; x < patch.width; ++x) {
      const int tx = x0 + x;
      if (tx < 0 || tx >= dst.width) continue;
      for (int c = 0; c < dst.channels; ++c) {
        dst.at(tx, ty, c) = patch.at(x, y, patch.channels == 1 ? 0 : c);
      }
    }
  }
}

namespace {

png_image make_header(const Raster& raster) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  return image;
}

}  // namespace

Raster load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DataError(fmt::format("cannot read PNG {}: {}", path.string(), image.message));
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height),
             color ? 3 : 1);
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&image, &white, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError(fmt::format("cannot decode PNG {}: {}", path.string(), image.message));
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  png_image image = make_header(raster);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raster.pixels.data(),
                                 0, nullptr)) {
    throw DataError(fmt::format("cannot size PNG: {}", image.message));
  }
  std::vector<std::uint8_t> buffer(size);
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0,
                                 raster.pixels.data(), 0, nullptr)) {
    throw DataError(fmt::format("cannot encode PNG: {}", image.message));
  }
  buffer.resize(size);
  return buffer;
}

void save_png(const std::filesystem::path& path, const Raster& raster) {
  const auto bytes = encode_png(raster);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

}  // namespace moldscan
