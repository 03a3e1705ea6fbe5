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

#ifndef MOLDSCAN_NCC_H_
#define MOLDSCAN_NCC_H_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "moldscan/image.h"

namespace moldscan {

// Normalized cross-correlation on zero-mean, unit-variance patches, in
// [-1, 1]. A patch with zero variance scores 0. Computed from exact integer
// moments, so a perfect linear match returns exactly 1.0.
double ncc_from_moments(std::int64_t n, std::int64_t sum_a, std::int64_t sum_aa,
                        std::int64_t sum_b, std::int64_t sum_bb, std::int64_t sum_ab);

// NCC of two gray rasters of identical size.
double ncc_same_size(const Raster& a, const Raster& b);

// NCC of `templ` placed with its top-left corner at (x, y) in `image`.
double ncc_at(const Raster& image, const Raster& templ, int x, int y);

// Exact window sums of an 8-bit gray raster.
class IntegralImage {
 public:
  explicit IntegralImage(const Raster& gray);

  std::int64_t sum(int x, int y, int w, int h) const;
  std::int64_t sum_sq(int x, int y, int w, int h) const;

 private:
  std::int64_t at(const std::vector<std::int64_t>& table, int x, int y) const {
    return table[static_cast<std::size_t>(y) * (width_ + 1) + x];
  }

  int width_;
  int height_;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sum_sq_;
};

struct NccPeak {
  int x = 0;
  int y = 0;
  double score = 0.0;
};

// Slides a fixed set of gray templates over images and reports every stride
// grid position whose exact NCC reaches a threshold. Candidate positions are
// screened with FFT cross-correlation, then rescored exactly, so the output
// does not depend on floating-point FFT error. Safe for concurrent use.
class NccMatcher {
 public:
  explicit NccMatcher(std::vector<Raster> templates);
  ~NccMatcher();
  NccMatcher(const NccMatcher&) = delete;
  NccMatcher& operator=(const NccMatcher&) = delete;

  std::size_t size() const { return templates_.size(); }
  const Raster& templ(std::size_t i) const { return templates_[i]; }

  // One list per template, row-major order. Templates larger than the image
  // (or with zero variance) yield an empty list and are flagged in `skipped`.
  std::vector<std::vector<NccPeak>> match(const Raster& gray, double threshold,
                                          int stride,
                                          std::vector<std::size_t>* skipped = nullptr) const;

 private:
  struct Stats {
    std::int64_t n = 0;
    std::int64_t sum = 0;
    std::int64_t sum_sq = 0;
  };
  struct Spectra;

  std::shared_ptr<const Spectra> spectra_for(int padded_w, int padded_h) const;

  std::vector<Raster> templates_;
  std::vector<Stats> stats_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::pair<int, int>, std::shared_ptr<const Spectra>> cache_;
};

// Smallest n >= min whose only prime factors are 2, 3, 5 and 7.
int fft_friendly_size(int min);

}  // namespace moldscan

#endif  // MOLDSCAN_NCC_H_
