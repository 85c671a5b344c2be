#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fpd/core/errors.hpp"
#include "fpd/core/tensor.hpp"

namespace fpd {

// Row-major grayscale raster with values in [0,1]. The universal currency
// between the data pipeline and the networks.
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
    if (width < 8 || height < 8) throw DataError("GrayImage: dimensions must be >= 8");
  }

  GrayImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 8 || height < 8) throw DataError("GrayImage: dimensions must be >= 8");
    if (data_.size() != static_cast<size_t>(width) * height)
      throw DataError("GrayImage: data size mismatch");
    validate();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }

  double& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  void validate() const {
    for (double v : data_)
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw DataError("GrayImage: value outside [0,1]");
  }

  void clamp01() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  }

  // Snaps values onto the 8-bit grid the PNG files use.
  GrayImage quantized() const {
    GrayImage q(width_, height_);
    for (size_t i = 0; i < data_.size(); ++i)
      q.data_[i] = std::round(std::clamp(data_[i], 0.0, 1.0) * 255.0) / 255.0;
    return q;
  }

  double mean() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return data_.empty() ? 0.0 : s / static_cast<double>(data_.size());
  }

  bool operator==(const GrayImage& o) const {
    return width_ == o.width_ && height_ == o.height_ && data_ == o.data_;
  }

  // (1,1,H,W) tensor for the networks.
  Tensor to_tensor() const {
    Tensor t({1, 1, height_, width_});
    std::copy(data_.begin(), data_.end(), t.data());
    return t;
  }

  static GrayImage from_tensor(const Tensor& t) {
    const auto& s = t.shape();
    if (s.size() != 4 || s[0] != 1 || s[1] != 1) throw DataError("from_tensor: expected (1,1,H,W)");
    GrayImage img(s[3], s[2]);
    for (std::int64_t i = 0; i < t.numel(); ++i)
      img.data_[static_cast<size_t>(i)] = std::clamp(t[i], 0.0, 1.0);
    return img;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

inline double mean_abs_difference(const GrayImage& a, const GrayImage& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace fpd
