#pragma once

#include <algorithm>

#include "fpd/core/errors.hpp"
#include "fpd/core/image.hpp"
#include "fpd/dataops/corepoint.hpp"
#include "fpd/dataops/orientation.hpp"
#include "fpd/dataops/segmentation.hpp"

namespace fpd {

// Half-open crop window [x0, x0+crop) x [y0, y0+crop) centred on the core.
struct CropWindow {
  int x0, y0, size;
};

inline CropWindow crop_window(const CoreLocation& core, int crop_size) {
  return CropWindow{core.x - crop_size / 2, core.y - crop_size / 2, crop_size};
}

// Extracts the window, zero-padding any part that overruns the image.
inline GrayImage crop_around(const GrayImage& img, const CoreLocation& core, int crop_size) {
  CropWindow w = crop_window(core, crop_size);
  GrayImage out(crop_size, crop_size, 0.0);
  for (int y = 0; y < crop_size; ++y) {
    int sy = w.y0 + y;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < crop_size; ++x) {
      int sx = w.x0 + x;
      if (sx < 0 || sx >= img.width()) continue;
      out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

// Core-detection block size. Finer than the generic orientation default so
// the refined core lands within the 5 px registration budget.
constexpr int kCoreBlockSize = 8;

// Segmentation -> orientation -> core -> fixed-size crop around the core.
// Throws SampleRejected when segmentation finds no foreground.
inline GrayImage preprocess_sample(const GrayImage& img, int crop_size,
                                   const GaborParams& gabor = {}) {
  if (crop_size < 8) throw ConfigError("preprocess_sample: crop_size too small");

  GrayImage mask = segment_foreground(img, gabor);
  double coverage = mask.mean();
  if (coverage <= 0.0) throw SampleRejected("empty segmentation mask");

  OrientationField field = estimate_orientation(img, kCoreBlockSize);

  // Suppress background blocks so spurious singularities outside the print
  // cannot win.
  for (int by = 0; by < field.rows; ++by)
    for (int bx = 0; bx < field.cols; ++bx) {
      int cnt = 0, tot = 0;
      for (int y = by * kCoreBlockSize; y < std::min((by + 1) * kCoreBlockSize, img.height()); ++y)
        for (int x = bx * kCoreBlockSize; x < std::min((bx + 1) * kCoreBlockSize, img.width());
             ++x) {
          ++tot;
          if (mask.at(x, y) > 0.5) ++cnt;
        }
      if (cnt * 2 < tot) field.coherence[static_cast<size_t>(by) * field.cols + bx] = 0.0;
    }

  CoreLocation core = locate_core(field, &img);
  return crop_around(img, core, crop_size);
}

}  // namespace fpd
