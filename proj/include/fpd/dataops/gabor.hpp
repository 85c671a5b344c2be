#pragma once

#include <cmath>
#include <vector>

#include "fpd/core/errors.hpp"
#include "fpd/core/image.hpp"

namespace fpd {

// Oriented Gabor bank used for both ridge-map ground truth and segmentation.
// Defaults target the typical 8-pixel ridge period: frequency 1/8 cycles/px,
// 8 orientations, 21x21 kernels.
struct GaborParams {
  double frequency = 1.0 / 8.0;
  int orientations = 8;
  int kernel_size = 21;

  void validate() const {
    if (!(frequency > 0.0 && frequency < 0.5))
      throw ConfigError("GaborParams: frequency must be in (0, 0.5)");
    if (orientations < 1) throw ConfigError("GaborParams: need at least one orientation");
    if (kernel_size < 3 || kernel_size % 2 == 0)
      throw ConfigError("GaborParams: kernel_size must be odd and >= 3");
  }
};

// Even (cosine) Gabor kernel at the given ridge orientation. The carrier
// runs perpendicular to the ridge direction. Mean is subtracted so the DC
// response is exactly zero, which makes the ridge map invariant to
// brightness offsets.
inline std::vector<double> gabor_kernel(double ridge_angle, const GaborParams& p) {
  p.validate();
  const int k = p.kernel_size;
  const int r = k / 2;
  const double sigma = 0.56 / p.frequency;
  const double gamma = 0.5;  // spatial aspect ratio
  // Wave vector perpendicular to ridge flow.
  const double ca = std::cos(ridge_angle + M_PI / 2.0);
  const double sa = std::sin(ridge_angle + M_PI / 2.0);

  std::vector<double> kern(static_cast<size_t>(k) * k);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      double xr = x * ca + y * sa;   // along the wave
      double yr = -x * sa + y * ca;  // along the ridge
      double env = std::exp(-(xr * xr + gamma * gamma * yr * yr) / (2.0 * sigma * sigma));
      double v = env * std::cos(2.0 * M_PI * p.frequency * xr);
      kern[static_cast<size_t>(y + r) * k + (x + r)] = v;
      sum += v;
    }
  double mean = sum / static_cast<double>(k * k);
  double ss = 0.0;
  for (double& v : kern) {
    v -= mean;
    ss += v * v;
  }
  double inv = ss > 0 ? 1.0 / std::sqrt(ss) : 1.0;
  for (double& v : kern) v *= inv;
  return kern;
}

namespace detail {

inline int reflect_idx(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

// Reflect padding keeps the full kernel support everywhere, so the zero-mean
// property (and with it brightness invariance) holds at the borders too.
inline double conv_at(const GrayImage& img, const std::vector<double>& kern, int k, int cx,
                      int cy) {
  const int r = k / 2;
  const int W = img.width(), H = img.height();
  double acc = 0.0;
  for (int y = -r; y <= r; ++y) {
    int iy = reflect_idx(cy + y, H);
    for (int x = -r; x <= r; ++x) {
      int ix = reflect_idx(cx + x, W);
      acc += kern[static_cast<size_t>(y + r) * k + (x + r)] * img.at(ix, iy);
    }
  }
  return acc;
}

}  // namespace detail

// Per-pixel signed response of the dominant orientation (the one with the
// largest |response|). Magnitude measures local ridge energy, the sign
// carries ridge/valley phase.
inline std::vector<double> gabor_max_response(const GrayImage& img, const GaborParams& p) {
  p.validate();
  std::vector<std::vector<double>> bank;
  bank.reserve(static_cast<size_t>(p.orientations));
  for (int o = 0; o < p.orientations; ++o)
    bank.push_back(gabor_kernel(M_PI * o / p.orientations, p));

  const int W = img.width(), H = img.height();
  std::vector<double> best(static_cast<size_t>(W) * H, 0.0);
  for (const auto& kern : bank)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double v = detail::conv_at(img, kern, p.kernel_size, x, y);
        size_t i = static_cast<size_t>(y) * W + x;
        if (std::abs(v) > std::abs(best[i])) best[i] = v;
      }
  return best;
}

// Binary ridge map: 1 where the dominant oriented response is positive.
// Used as the ground-truth target for the ridge extractor network. The
// tiny threshold absorbs the rounding residue of the zero-DC kernels so a
// constant image maps to exactly zero.
inline GrayImage gabor_ridge_map(const GrayImage& img, const GaborParams& p = {}) {
  std::vector<double> resp = gabor_max_response(img, p);
  GrayImage out(img.width(), img.height());
  for (size_t i = 0; i < resp.size(); ++i) out.data()[i] = resp[i] > 1e-9 ? 1.0 : 0.0;
  return out;
}

}  // namespace fpd
