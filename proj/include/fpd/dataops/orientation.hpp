#pragma once

#include <cmath>
#include <vector>

#include "fpd/core/errors.hpp"
#include "fpd/core/image.hpp"

namespace fpd {

// Block-wise ridge orientation field. Angles are ridge flow directions in
// [0, pi) measured from the x axis; a vertical ridge pattern (gradient along
// x) therefore reports pi/2. Coherence is the gradient anisotropy in [0,1].
struct OrientationField {
  int block_size = 16;
  int cols = 0;  // ceil(width / block)
  int rows = 0;  // ceil(height / block)
  int image_width = 0;
  int image_height = 0;
  std::vector<double> angles;     // rows*cols, [0, pi)
  std::vector<double> coherence;  // rows*cols, [0, 1]

  double angle_at(int bx, int by) const { return angles[static_cast<size_t>(by) * cols + bx]; }
  double coherence_at(int bx, int by) const {
    return coherence[static_cast<size_t>(by) * cols + bx];
  }
};

inline double wrap_pi(double a) {
  a = std::fmod(a, M_PI);
  if (a < 0) a += M_PI;
  return a;
}

// Gradient least-squares orientation per block. The dominant gradient
// direction is theta_g = 0.5*atan2(2*Gxy, Gxx - Gyy); ridge flow is its
// perpendicular.
inline OrientationField estimate_orientation(const GrayImage& img, int block_size = 16) {
  if (block_size < 2) throw ConfigError("estimate_orientation: block_size too small");
  if (img.width() <= block_size && img.height() <= block_size)
    throw DataError("estimate_orientation: image not larger than one block");

  const int W = img.width(), H = img.height();
  OrientationField field;
  field.block_size = block_size;
  field.cols = (W + block_size - 1) / block_size;
  field.rows = (H + block_size - 1) / block_size;
  field.image_width = W;
  field.image_height = H;
  field.angles.assign(static_cast<size_t>(field.cols) * field.rows, 0.0);
  field.coherence.assign(static_cast<size_t>(field.cols) * field.rows, 0.0);

  // Central-difference gradients, clamped at borders.
  std::vector<double> gx(static_cast<size_t>(W) * H), gy(gx.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int xm = std::max(x - 1, 0), xp = std::min(x + 1, W - 1);
      int ym = std::max(y - 1, 0), yp = std::min(y + 1, H - 1);
      gx[static_cast<size_t>(y) * W + x] = 0.5 * (img.at(xp, y) - img.at(xm, y));
      gy[static_cast<size_t>(y) * W + x] = 0.5 * (img.at(x, yp) - img.at(x, ym));
    }

  for (int by = 0; by < field.rows; ++by)
    for (int bx = 0; bx < field.cols; ++bx) {
      double gxx = 0.0, gyy = 0.0, gxy = 0.0;
      const int x0 = bx * block_size, y0 = by * block_size;
      for (int y = y0; y < std::min(y0 + block_size, H); ++y)
        for (int x = x0; x < std::min(x0 + block_size, W); ++x) {
          double dx = gx[static_cast<size_t>(y) * W + x];
          double dy = gy[static_cast<size_t>(y) * W + x];
          gxx += dx * dx;
          gyy += dy * dy;
          gxy += dx * dy;
        }
      double denom = gxx + gyy;
      size_t idx = static_cast<size_t>(by) * field.cols + bx;
      if (denom < 1e-12) {
        // Flat block: angle 0 / coherence 0 by convention.
        continue;
      }
      double theta_g = 0.5 * std::atan2(2.0 * gxy, gxx - gyy);
      field.angles[idx] = wrap_pi(theta_g + M_PI / 2.0);
      field.coherence[idx] =
          std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy) / denom;
    }
  return field;
}

// Smallest signed rotation taking orientation a to b, in (-pi/2, pi/2].
inline double orientation_delta(double a, double b) {
  double d = b - a;
  while (d <= -M_PI / 2.0) d += M_PI;
  while (d > M_PI / 2.0) d -= M_PI;
  return d;
}

}  // namespace fpd
