#pragma once

#include <cmath>
#include <utility>

#include "fpd/core/image.hpp"
#include "fpd/core/rng.hpp"
#include "fpd/dataops/corepoint.hpp"

namespace fpd {

// Seeded synthetic fingerprint generator. One seed is one identity: a whorl
// pattern (concentric ridges around a singular point) with subject-specific
// ridge period, low-frequency intensity field, and smooth warp. The
// low-frequency component matters: it carries identity that survives heavy
// Gaussian blur, the way overall finger shape and ridge-flow layout do on
// real prints, so verification on deblurred prints has signal to recover.
namespace detail {

struct SubjectTraits {
  double cx, cy;          // core position (fraction of size)
  double period;          // ridge period in px, 6..10
  double phase;
  double warp_amp;        // smooth geometric distortion
  double warp_fx1, warp_fy1, warp_ph1;
  double warp_fx2, warp_fy2, warp_ph2;
  // Three broad intensity blobs (the blur-surviving identity cue).
  double blob_x[3], blob_y[3], blob_s[3], blob_a[3];
  double radius;          // foreground radius (fraction of size)
};

inline SubjectTraits subject_traits(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0xf1d0);
  SubjectTraits t{};
  t.cx = rng.uniform(0.38, 0.62);
  t.cy = rng.uniform(0.38, 0.62);
  t.period = rng.uniform(6.0, 10.0);
  t.phase = rng.uniform(0.0, 2.0 * M_PI);
  t.warp_amp = rng.uniform(1.0, 3.0);
  t.warp_fx1 = rng.uniform(0.015, 0.035);
  t.warp_fy1 = rng.uniform(0.015, 0.035);
  t.warp_ph1 = rng.uniform(0.0, 2.0 * M_PI);
  t.warp_fx2 = rng.uniform(0.015, 0.035);
  t.warp_fy2 = rng.uniform(0.015, 0.035);
  t.warp_ph2 = rng.uniform(0.0, 2.0 * M_PI);
  for (int i = 0; i < 3; ++i) {
    t.blob_x[i] = rng.uniform(0.2, 0.8);
    t.blob_y[i] = rng.uniform(0.2, 0.8);
    t.blob_s[i] = rng.uniform(0.12, 0.30);
    t.blob_a[i] = rng.uniform(-0.16, 0.16);
  }
  t.radius = rng.uniform(0.40, 0.46);
  return t;
}

// Smooth warp so ridges are not perfect circles.
inline void warp_point(const SubjectTraits& t, double x, double y, double& wx, double& wy) {
  wx = x + t.warp_amp * std::sin(2.0 * M_PI * (t.warp_fx1 * x + t.warp_fy1 * y) + t.warp_ph1);
  wy = y + t.warp_amp * std::sin(2.0 * M_PI * (t.warp_fx2 * x + t.warp_fy2 * y) + t.warp_ph2);
}

// The ridge singularity sits where the warped coordinates hit the ridge
// centre; invert the warp by fixed-point iteration (it is a small smooth
// displacement, so a few rounds converge to sub-pixel accuracy).
inline void singularity_position(const SubjectTraits& t, double size, double& sx, double& sy) {
  double cx = t.cx * size, cy = t.cy * size;
  sx = cx;
  sy = cy;
  for (int it = 0; it < 8; ++it) {
    double wx, wy;
    warp_point(t, sx, sy, wx, wy);
    sx += cx - wx;
    sy += cy - wy;
  }
}

// Analytic print intensity at continuous coordinates (in pixels).
inline double print_intensity(const SubjectTraits& t, double size, double x, double y) {
  double cx = t.cx * size, cy = t.cy * size;
  double wx, wy;
  warp_point(t, x, y, wx, wy);
  double r = std::hypot(wx - cx, wy - cy);

  double ridges = std::cos(2.0 * M_PI * r / t.period + t.phase);

  double bias = 0.0;
  for (int i = 0; i < 3; ++i) {
    double dx = (x - t.blob_x[i] * size) / (t.blob_s[i] * size);
    double dy = (y - t.blob_y[i] * size) / (t.blob_s[i] * size);
    bias += t.blob_a[i] * std::exp(-0.5 * (dx * dx + dy * dy));
  }

  // Soft circular aperture down to plain background.
  double rr = std::hypot(x - size / 2.0, y - size / 2.0) / (t.radius * size);
  double aperture = 1.0 / (1.0 + std::exp((rr - 1.0) * 12.0));

  double fg = 0.52 - 0.34 * ridges + bias;  // ridges dark, valleys bright
  double bg = 0.92;
  return bg + aperture * (fg - bg);
}

}  // namespace detail

// Renders one impression of a subject. Impression 0 is the canonical view;
// higher indices apply a small rigid transform plus fresh sensor noise, the
// same identity function sampled under a slightly different capture.
inline std::pair<GrayImage, CoreLocation> synth_impression(std::uint64_t subject_seed,
                                                           int impression, int size) {
  if (size < 64) throw ConfigError("synth_impression: size must be >= 64");
  detail::SubjectTraits traits = detail::subject_traits(subject_seed);

  Rng imp_rng = Rng::derive(subject_seed, 0xa11ce000ULL + static_cast<std::uint64_t>(impression));
  double shift_x = impression == 0 ? 0.0 : imp_rng.uniform(-3.0, 3.0);
  double shift_y = impression == 0 ? 0.0 : imp_rng.uniform(-3.0, 3.0);
  double rot = impression == 0 ? 0.0 : imp_rng.uniform(-0.05, 0.05);
  double cr = std::cos(rot), sr = std::sin(rot);
  double half = size / 2.0;

  GrayImage img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      // Rotate about the image centre, then translate.
      double dx = x - half, dy = y - half;
      double sx = half + cr * dx - sr * dy + shift_x;
      double sy = half + sr * dx + cr * dy + shift_y;
      double v = detail::print_intensity(traits, size, sx, sy);
      v += imp_rng.normal(0.0, 0.015);
      img.at(x, y) = std::clamp(v, 0.0, 1.0);
    }

  // Core position under the inverse of the sampling transform.
  double sing_x, sing_y;
  detail::singularity_position(traits, size, sing_x, sing_y);
  double ccx = sing_x - shift_x, ccy = sing_y - shift_y;
  double dx = ccx - half, dy = ccy - half;
  CoreLocation core;
  core.x = static_cast<int>(std::lround(half + cr * dx + sr * dy));
  core.y = static_cast<int>(std::lround(half - sr * dx + cr * dy));
  core.x = std::clamp(core.x, 0, size - 1);
  core.y = std::clamp(core.y, 0, size - 1);
  core.confidence = 1.0;
  return {std::move(img), core};
}

inline std::pair<GrayImage, CoreLocation> synth_fingerprint(std::uint64_t seed, int size) {
  return synth_impression(seed, 0, size);
}

}  // namespace fpd
