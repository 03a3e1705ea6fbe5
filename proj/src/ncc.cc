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

#include "moldscan/ncc.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fmt/format.h>

#include "moldscan/error.h"

namespace moldscan {

namespace {

// The FFTW planner is not reentrant; executing existing plans is.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) {
  return ComplexBuffer(fftw_alloc_complex(n));
}

// Screening slack: FFT round-off is many orders of magnitude below this.
constexpr double kScreenMargin = 1e-3;

}  // namespace

double ncc_from_moments(std::int64_t n, std::int64_t sum_a, std::int64_t sum_aa,
                        std::int64_t sum_b, std::int64_t sum_bb, std::int64_t sum_ab) {
  using I128 = __int128;
  const I128 cov = static_cast<I128>(n) * sum_ab - static_cast<I128>(sum_a) * sum_b;
  const I128 var_a = static_cast<I128>(n) * sum_aa - static_cast<I128>(sum_a) * sum_a;
  const I128 var_b = static_cast<I128>(n) * sum_bb - static_cast<I128>(sum_b) * sum_b;
  if (var_a <= 0 || var_b <= 0) return 0.0;
  if (cov * cov == var_a * var_b) return cov > 0 ? 1.0 : -1.0;
  const double r = static_cast<double>(cov) /
                   std::sqrt(static_cast<double>(var_a) * static_cast<double>(var_b));
  return std::clamp(r, -1.0, 1.0);
}

double ncc_same_size(const Raster& a, const Raster& b) {
  if (a.width != b.width || a.height != b.height || a.channels != 1 || b.channels != 1) {
    throw DataError("ncc_same_size needs two gray rasters of equal size");
  }
  std::int64_t sa = 0, saa = 0, sb = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const std::int64_t va = a.pixels[i], vb = b.pixels[i];
    sa += va;
    saa += va * va;
    sb += vb;
    sbb += vb * vb;
    sab += va * vb;
  }
  return ncc_from_moments(static_cast<std::int64_t>(a.pixels.size()), sa, saa, sb, sbb, sab);
}

double ncc_at(const Raster& image, const Raster& templ, int x, int y) {
  if (image.channels != 1 || templ.channels != 1) {
    throw DataError("ncc_at needs gray rasters");
  }
  if (x < 0 || y < 0 || x + templ.width > image.width || y + templ.height > image.height) {
    throw DataError("ncc_at window outside image");
  }
  std::int64_t sa = 0, saa = 0, sb = 0, sbb = 0, sab = 0;
  for (int ty = 0; ty < templ.height; ++ty) {
    const std::uint8_t* irow = image.row(y + ty) + x;
    const std::uint8_t* trow = templ.row(ty);
    for (int tx = 0; tx < templ.width; ++tx) {
      const std::int64_t va = irow[tx], vb = trow[tx];
      sa += va;
      saa += va * va;
      sb += vb;
      sbb += vb * vb;
      sab += va * vb;
    }
  }
  return ncc_from_moments(static_cast<std::int64_t>(templ.width) * templ.height, sa, saa,
                          sb, sbb, sab);
}

IntegralImage::IntegralImage(const Raster& gray)
    : width_(gray.width),
      height_(gray.height),
      sum_(static_cast<std::size_t>(gray.width + 1) * (gray.height + 1), 0),
      sum_sq_(sum_.size(), 0) {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  for (int y = 0; y < height_; ++y) {
    std::int64_t row = 0, row_sq = 0;
    const std::uint8_t* src = gray.row(y);
    for (int x = 0; x < width_; ++x) {
      const std::int64_t v = src[x];
      row += v;
      row_sq += v * v;
      sum_[(y + 1) * stride + x + 1] = sum_[y * stride + x + 1] + row;
      sum_sq_[(y + 1) * stride + x + 1] = sum_sq_[y * stride + x + 1] + row_sq;
    }
  }
}

std::int64_t IntegralImage::sum(int x, int y, int w, int h) const {
  return at(sum_, x + w, y + h) - at(sum_, x, y + h) - at(sum_, x + w, y) + at(sum_, x, y);
}

std::int64_t IntegralImage::sum_sq(int x, int y, int w, int h) const {
  return at(sum_sq_, x + w, y + h) - at(sum_sq_, x, y + h) - at(sum_sq_, x + w, y) +
         at(sum_sq_, x, y);
}

int fft_friendly_size(int min) {
  for (int n = std::max(1, min);; ++n) {
    int r = n;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return n;
  }
}

struct NccMatcher::Spectra {
  int padded_w = 0;
  int padded_h = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<ComplexBuffer> templates;

  std::size_t complex_size() const {
    return static_cast<std::size_t>(padded_h) * (padded_w / 2 + 1);
  }
  ~Spectra() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

NccMatcher::NccMatcher(std::vector<Raster> templates) : templates_(std::move(templates)) {
  for (const Raster& t : templates_) {
    if (t.channels != 1 || t.empty()) throw DataError("templates must be non-empty gray rasters");
    Stats s;
    s.n = static_cast<std::int64_t>(t.pixels.size());
    for (std::uint8_t v : t.pixels) {
      s.sum += v;
      s.sum_sq += static_cast<std::int64_t>(v) * v;
    }
    stats_.push_back(s);
  }
}

NccMatcher::~NccMatcher() = default;

std::shared_ptr<const NccMatcher::Spectra> NccMatcher::spectra_for(int padded_w,
                                                                   int padded_h) const {
  std::lock_guard lock(cache_mu_);
  auto key = std::make_pair(padded_w, padded_h);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  auto spectra = std::make_shared<Spectra>();
  spectra->padded_w = padded_w;
  spectra->padded_h = padded_h;
  const std::size_t real_size = static_cast<std::size_t>(padded_w) * padded_h;
  RealBuffer real = alloc_real(real_size);
  ComplexBuffer cplx = alloc_complex(spectra->complex_size());
  {
    std::lock_guard plan_lock(planner_mutex());
    spectra->forward = fftw_plan_dft_r2c_2d(padded_h, padded_w, real.get(), cplx.get(),
                                            FFTW_ESTIMATE);
    spectra->backward = fftw_plan_dft_c2r_2d(padded_h, padded_w, cplx.get(), real.get(),
                                             FFTW_ESTIMATE);
  }
  for (std::size_t t = 0; t < templates_.size(); ++t) {
    const Raster& tpl = templates_[t];
    ComplexBuffer out = alloc_complex(spectra->complex_size());
    std::fill(real.get(), real.get() + real_size, 0.0);
    if (tpl.width <= padded_w && tpl.height <= padded_h) {
      const double mean = static_cast<double>(stats_[t].sum) / static_cast<double>(stats_[t].n);
      for (int y = 0; y < tpl.height; ++y) {
        for (int x = 0; x < tpl.width; ++x) {
          real[static_cast<std::size_t>(y) * padded_w + x] = tpl.at(x, y) - mean;
        }
      }
      fftw_execute_dft_r2c(spectra->forward, real.get(), out.get());
    }
    spectra->templates.push_back(std::move(out));
  }
  cache_.emplace(key, spectra);
  return spectra;
}

std::vector<std::vector<NccPeak>> NccMatcher::match(const Raster& gray, double threshold,
                                                    int stride,
                                                    std::vector<std::size_t>* skipped) const {
  if (gray.channels != 1) throw DataError("NCC matching needs a gray raster");
  if (stride < 1) throw ConfigError("match stride must be at least 1");
  std::vector<std::vector<NccPeak>> peaks(templates_.size());
  if (gray.empty()) return peaks;

  const int width = gray.width, height = gray.height;
  const int pw = fft_friendly_size(width), ph = fft_friendly_size(height);
  const auto spectra = spectra_for(pw, ph);
  const IntegralImage integral(gray);

  const std::size_t real_size = static_cast<std::size_t>(pw) * ph;
  const std::size_t cplx_size = spectra->complex_size();
  RealBuffer real = alloc_real(real_size);
  ComplexBuffer image_spec = alloc_complex(cplx_size);
  ComplexBuffer product = alloc_complex(cplx_size);
  std::fill(real.get(), real.get() + real_size, 0.0);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* src = gray.row(y);
    double* dst = real.get() + static_cast<std::size_t>(y) * pw;
    for (int x = 0; x < width; ++x) dst[x] = src[x];
  }
  fftw_execute_dft_r2c(spectra->forward, real.get(), image_spec.get());

  const double scale = 1.0 / static_cast<double>(real_size);
  for (std::size_t t = 0; t < templates_.size(); ++t) {
    const Raster& tpl = templates_[t];
    const Stats& st = stats_[t];
    const std::int64_t var_t = st.n * st.sum_sq - st.sum * st.sum;
    if (tpl.width > width || tpl.height > height || var_t <= 0) {
      if (skipped) skipped->push_back(t);
      continue;
    }
    const fftw_complex* ts = spectra->templates[t].get();
    for (std::size_t k = 0; k < cplx_size; ++k) {
      const double ar = image_spec[k][0], ai = image_spec[k][1];
      const double br = ts[k][0], bi = -ts[k][1];
      product[k][0] = ar * br - ai * bi;
      product[k][1] = ar * bi + ai * br;
    }
    fftw_execute_dft_c2r(spectra->backward, product.get(), real.get());

    const double n = static_cast<double>(st.n);
    const double var_t_d = static_cast<double>(var_t);
    const double screen = threshold - kScreenMargin;
    for (int v = 0; v + tpl.height <= height; v += stride) {
      const double* corr_row = real.get() + static_cast<std::size_t>(v) * pw;
      for (int u = 0; u + tpl.width <= width; u += stride) {
        const std::int64_t s = integral.sum(u, v, tpl.width, tpl.height);
        const std::int64_t ss = integral.sum_sq(u, v, tpl.width, tpl.height);
        const std::int64_t var_i = st.n * ss - s * s;
        if (var_i <= 0) continue;
        const double approx =
            n * corr_row[u] * scale / std::sqrt(static_cast<double>(var_i) * var_t_d);
        if (approx < screen) continue;
        const double exact = ncc_at(gray, tpl, u, v);
        if (exact >= threshold) peaks[t].push_back({u, v, exact});
      }
    }
  }
  return peaks;
}

}  // namespace moldscan
