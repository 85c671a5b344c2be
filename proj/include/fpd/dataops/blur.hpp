#pragma once

#include <cmath>
#include <vector>

#include "fpd/core/errors.hpp"
#include "fpd/core/image.hpp"

namespace fpd {

// Gaussian blur synthesis. Kernel size follows k = 6*sigma - 1, rounded to
// the nearest odd integer when sigma is not integral.
struct BlurConfig {
  double sigma = 0.0;
  int kernel_size = 0;

  static BlurConfig from_sigma(double sigma) {
    if (sigma <= 0.0) throw ConfigError("BlurConfig: sigma must be positive");
    double raw = 6.0 * sigma - 1.0;
    int k = static_cast<int>(std::lround(raw));
    if (k % 2 == 0) k += (raw > k) ? 1 : -1;
    if (k < 1) k = 1;
    return BlurConfig{sigma, k};
  }

  void validate() const {
    if (sigma <= 0.0) throw ConfigError("BlurConfig: sigma must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw ConfigError("BlurConfig: kernel_size must be odd and positive");
  }
};

// 1-D Gaussian taps normalized to sum exactly 1.
inline std::vector<double> gaussian_kernel_1d(const BlurConfig& cfg) {
  cfg.validate();
  const int k = cfg.kernel_size;
  const int r = k / 2;
  std::vector<double> w(static_cast<size_t>(k));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    double v = std::exp(-0.5 * (i * i) / (cfg.sigma * cfg.sigma));
    w[static_cast<size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace detail {

// Reflect index into [0, n): ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
// Avoids the dark halo a zero border would imprint (which would leak sigma
// to the networks through edge intensity).
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace detail

inline GrayImage gaussian_blur(const GrayImage& img, const BlurConfig& cfg) {
  cfg.validate();
  if (cfg.kernel_size > 2 * std::min(img.width(), img.height()))
    throw ConfigError("gaussian_blur: kernel larger than 2*min(dims)");

  const std::vector<double> w = gaussian_kernel_1d(cfg);
  const int r = cfg.kernel_size / 2;
  const int W = img.width(), H = img.height();

  // Horizontal then vertical pass.
  std::vector<double> tmp(static_cast<size_t>(W) * H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t)
        acc += w[static_cast<size_t>(t + r)] * img.at(detail::reflect_index(x + t, W), y);
      tmp[static_cast<size_t>(y) * W + x] = acc;
    }

  GrayImage out(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t)
        acc += w[static_cast<size_t>(t + r)] * tmp[static_cast<size_t>(detail::reflect_index(y + t, H)) * W + x];
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  return out;
}

}  // namespace fpd
