#pragma once

#include <cmath>
#include <vector>

#include "fpd/core/errors.hpp"
#include "fpd/dataops/orientation.hpp"

namespace fpd {

struct CoreLocation {
  int x = 0;
  int y = 0;
  double confidence = 0.0;
};

namespace detail {

// Poincare index of the orientation field around block (bx, by): sum of
// wrapped orientation deltas along the ring of 8 neighbours. Loops give
// ~pi, whorls ~2*pi, smooth field ~0.
inline double poincare_index(const OrientationField& f, int bx, int by) {
  static const int ring[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0},
                                 {1, 1},   {0, 1},  {-1, 1}, {-1, 0}};
  double total = 0.0;
  for (int k = 0; k < 8; ++k) {
    double a = f.angle_at(bx + ring[k][0], by + ring[k][1]);
    double b = f.angle_at(bx + ring[(k + 1) % 8][0], by + ring[(k + 1) % 8][1]);
    total += orientation_delta(a, b);
  }
  return total;
}

// Pixel-level Poincare refinement inside a window: orientation comes from a
// box-smoothed structure tensor, the index is summed around a small ring of
// sample points. Returns the response-weighted centroid of the strongest
// response and its 8-neighbourhood.
inline void refine_core(const GrayImage& img, int cx, int cy, int radius, int& out_x,
                        int& out_y) {
  const int W = img.width(), H = img.height();
  const int x0 = std::max(2, cx - radius), x1 = std::min(W - 3, cx + radius);
  const int y0 = std::max(2, cy - radius), y1 = std::min(H - 3, cy + radius);
  const int smooth_r = 3;
  const int ring_r = 4;

  // Structure tensor smoothed over (2*smooth_r+1)^2 boxes, evaluated lazily
  // per ring sample. Coherence gates the response so unoriented patches
  // (noise, flat background) cannot fake a singularity.
  auto tensor_at = [&](int px, int py, double& angle, double& coh) {
    double gxx = 0.0, gyy = 0.0, gxy = 0.0;
    for (int y = py - smooth_r; y <= py + smooth_r; ++y)
      for (int x = px - smooth_r; x <= px + smooth_r; ++x) {
        int xc = std::clamp(x, 1, W - 2), yc = std::clamp(y, 1, H - 2);
        double dx = 0.5 * (img.at(xc + 1, yc) - img.at(xc - 1, yc));
        double dy = 0.5 * (img.at(xc, yc + 1) - img.at(xc, yc - 1));
        gxx += dx * dx;
        gyy += dy * dy;
        gxy += dx * dy;
      }
    angle = wrap_pi(0.5 * std::atan2(2.0 * gxy, gxx - gyy) + M_PI / 2.0);
    double denom = gxx + gyy;
    coh = denom > 1e-12 ? std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy) / denom : 0.0;
  };

  static const int ring[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0},
                                 {1, 1},   {0, 1},  {-1, 1}, {-1, 0}};
  const int rw = x1 - x0 + 1, rh = y1 - y0 + 1;
  if (rw <= 0 || rh <= 0) {
    out_x = cx;
    out_y = cy;
    return;
  }
  // Centers whose ring winds around the singularity form a disk centred on
  // it; the centroid of that disk localizes the core far better than the
  // (coherence-skewed) response peak.
  double best = -1.0;
  int bx = cx, by = cy;
  double wsum = 0.0, xs = 0.0, ys = 0.0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double total = 0.0, coh_sum = 0.0;
      double angles[8], cohs[8];
      for (int k = 0; k < 8; ++k) {
        tensor_at(x + ring[k][0] * ring_r, y + ring[k][1] * ring_r, angles[k], cohs[k]);
        coh_sum += cohs[k];
      }
      for (int k = 0; k < 8; ++k) total += orientation_delta(angles[k], angles[(k + 1) % 8]);
      double mean_coh = coh_sum / 8.0;
      double r = std::abs(total) * mean_coh * mean_coh;
      if (r > best) {
        best = r;
        bx = x;
        by = y;
      }
      if (std::abs(total) > M_PI && mean_coh > 0.3) {
        wsum += 1.0;
        xs += x;
        ys += y;
      }
    }
  if (wsum > 0) {
    out_x = static_cast<int>(std::lround(xs / wsum));
    out_y = static_cast<int>(std::lround(ys / wsum));
  } else {
    out_x = bx;
    out_y = by;
  }
}

}  // namespace detail

// Singular-point detection: coarse scan of the block orientation field for
// the highest coherence-weighted |Poincare index|, then pixel-level
// refinement of the winning block when the source image is supplied.
// Fields without a clear singularity fall back to the image centre with
// confidence 0.
inline CoreLocation locate_core(const OrientationField& field, const GrayImage* img = nullptr) {
  if (field.cols < 4 || field.rows < 4)
    throw DataError("locate_core: field must be at least 4x4 blocks");

  const int bs = field.block_size;
  double best = 0.0;
  int best_bx = -1, best_by = -1;

  for (int by = 1; by < field.rows - 1; ++by)
    for (int bx = 1; bx < field.cols - 1; ++bx) {
      double idx = std::abs(detail::poincare_index(field, bx, by));
      if (idx < M_PI / 2.0) continue;
      double coh = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) coh += field.coherence_at(bx + dx, by + dy);
      double r = idx * (coh / 9.0);
      // Ties break toward the top-left-most block (scan order keeps the first).
      if (r > best + 1e-12) {
        best = r;
        best_bx = bx;
        best_by = by;
      }
    }

  if (best_bx < 0) {
    return CoreLocation{field.image_width / 2, field.image_height / 2, 0.0};
  }

  CoreLocation core;
  core.x = best_bx * bs + bs / 2;
  core.y = best_by * bs + bs / 2;
  if (img != nullptr) detail::refine_core(*img, core.x, core.y, bs + bs / 2, core.x, core.y);
  core.x = std::clamp(core.x, 0, field.image_width - 1);
  core.y = std::clamp(core.y, 0, field.image_height - 1);
  core.confidence =
      std::min(1.0, std::abs(detail::poincare_index(field, best_bx, best_by)) / (2.0 * M_PI));
  return core;
}

}  // namespace fpd
