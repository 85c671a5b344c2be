#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fpd/core/image.hpp"
#include "fpd/dataops/gabor.hpp"

namespace fpd {

namespace detail {

// Otsu threshold over a 256-bin histogram of the given values.
inline double otsu_threshold(const std::vector<double>& values, double lo, double hi) {
  constexpr int kBins = 256;
  std::vector<int> hist(kBins, 0);
  double range = hi - lo;
  if (range <= 0) return lo;
  for (double v : values) {
    int b = static_cast<int>((v - lo) / range * (kBins - 1));
    hist[static_cast<size_t>(std::clamp(b, 0, kBins - 1))]++;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int i = 0; i < kBins; ++i) sum_all += i * hist[static_cast<size_t>(i)];

  double best_var = -1.0;
  int best_bin = 0;
  double w0 = 0.0, sum0 = 0.0;
  for (int i = 0; i < kBins; ++i) {
    w0 += hist[static_cast<size_t>(i)];
    if (w0 == 0) continue;
    double w1 = total - w0;
    if (w1 == 0) break;
    sum0 += i * hist[static_cast<size_t>(i)];
    double m0 = sum0 / w0;
    double m1 = (sum_all - sum0) / w1;
    double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best_bin = i;
    }
  }
  return lo + (best_bin + 0.5) / (kBins - 1) * range;
}

inline void morph_3x3(GrayImage& mask, bool dilate) {
  GrayImage src = mask;
  const int W = mask.width(), H = mask.height();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = dilate ? 0.0 : 1.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int ix = std::clamp(x + dx, 0, W - 1);
          int iy = std::clamp(y + dy, 0, H - 1);
          if (dilate)
            acc = std::max(acc, src.at(ix, iy));
          else
            acc = std::min(acc, src.at(ix, iy));
        }
      mask.at(x, y) = acc;
    }
}

}  // namespace detail

// Foreground segmentation from Gabor response energy: threshold the
// per-pixel bank energy with Otsu, then morphologically close. Returns a
// binary {0,1} mask; entirely flat inputs produce an empty mask.
inline GrayImage segment_foreground(const GrayImage& img, const GaborParams& params = {}) {
  std::vector<double> resp = gabor_max_response(img, params);
  std::vector<double> energy(resp.size());
  for (size_t i = 0; i < resp.size(); ++i) energy[i] = resp[i] * resp[i];

  double emax = *std::max_element(energy.begin(), energy.end());
  GrayImage mask(img.width(), img.height());
  if (emax < 1e-9) return mask;  // no oriented structure anywhere

  double t = detail::otsu_threshold(energy, 0.0, emax);
  for (size_t i = 0; i < energy.size(); ++i) mask.data()[i] = energy[i] > t ? 1.0 : 0.0;

  // Close: bridge pores and valley gaps inside the print.
  detail::morph_3x3(mask, true);
  detail::morph_3x3(mask, true);
  detail::morph_3x3(mask, false);
  detail::morph_3x3(mask, false);
  return mask;
}

}  // namespace fpd
