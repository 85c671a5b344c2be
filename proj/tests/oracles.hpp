#pragma once

// Test-side oracles, kept independent of the library implementation paths
// they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "fpd/core/image.hpp"

namespace oracle {

// Dense 2-D convolution with an explicit normalized Gaussian kernel and
// reflect padding. Checks the separable implementation.
inline fpd::GrayImage dense_gaussian_blur(const fpd::GrayImage& img, double sigma, int k) {
  const int r = k / 2;
  std::vector<double> kern(static_cast<size_t>(k) * k);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      double v = std::exp(-0.5 * (x * x + y * y) / (sigma * sigma));
      kern[static_cast<size_t>(y + r) * k + (x + r)] = v;
      sum += v;
    }
  for (double& v : kern) v /= sum;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - i - 1;
    }
    return i;
  };

  const int W = img.width(), H = img.height();
  fpd::GrayImage out(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          acc += kern[static_cast<size_t>(dy + r) * k + (dx + r)] *
                 img.at(reflect(x + dx, W), reflect(y + dy, H));
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  return out;
}

inline double max_abs_difference(const fpd::GrayImage& a, const fpd::GrayImage& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Brute-force EER/AUC from raw genuine and impostor score arrays.
// AUC by pairwise comparison counting: P(genuine > impostor) + 0.5 P(tie).
// EER by exhaustive sweep over every unique threshold plus linear
// interpolation where TAR + FAR crosses 1.
struct BruteRoc {
  double eer;
  double auc;
};

inline BruteRoc brute_force_roc(const std::vector<double>& genuine,
                                const std::vector<double>& impostor) {
  double wins = 0.0;
  for (double g : genuine)
    for (double i : impostor) {
      if (g > i)
        wins += 1.0;
      else if (g == i)
        wins += 0.5;
    }
  double auc = wins / (static_cast<double>(genuine.size()) * impostor.size());

  // Sweep all unique scores as thresholds (accept when score >= t), from
  // high to low, recording the ROC polyline.
  std::vector<double> uniq;
  uniq.reserve(genuine.size() + impostor.size());
  uniq.insert(uniq.end(), genuine.begin(), genuine.end());
  uniq.insert(uniq.end(), impostor.begin(), impostor.end());
  std::sort(uniq.begin(), uniq.end(), std::greater<>());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  auto frac_ge = [](const std::vector<double>& v, double t) {
    int c = 0;
    for (double x : v)
      if (x >= t) ++c;
    return static_cast<double>(c) / static_cast<double>(v.size());
  };

  std::vector<double> tar{0.0}, far{0.0};
  for (double t : uniq) {
    tar.push_back(frac_ge(genuine, t));
    far.push_back(frac_ge(impostor, t));
  }
  tar.push_back(1.0);
  far.push_back(1.0);

  double eer = 0.5;
  for (size_t i = 0; i + 1 < tar.size(); ++i) {
    double f0 = tar[i] + far[i] - 1.0;
    double f1 = tar[i + 1] + far[i + 1] - 1.0;
    if (f0 <= 0.0 && f1 >= 0.0) {
      if (f1 == f0) {
        eer = (far[i] + (1.0 - tar[i])) / 2.0;
      } else {
        double s = -f0 / (f1 - f0);
        eer = far[i] + s * (far[i + 1] - far[i]);
      }
      break;
    }
  }
  return {eer, auc};
}

}  // namespace oracle
