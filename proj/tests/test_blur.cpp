#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "fpd/core/rng.hpp"
#include "fpd/dataops/blur.hpp"
#include "oracles.hpp"

using fpd::BlurConfig;
using fpd::GrayImage;
using fpd::Rng;

namespace {

GrayImage random_image(int w, int h, Rng& rng) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("kernel size follows k = 6*sigma - 1", "[blur]") {
  CHECK(BlurConfig::from_sigma(3.0).kernel_size == 17);
  CHECK(BlurConfig::from_sigma(5.0).kernel_size == 29);
  CHECK(BlurConfig::from_sigma(7.0).kernel_size == 41);
  // Non-integer sigma rounds to the nearest odd size.
  CHECK(BlurConfig::from_sigma(3.5).kernel_size % 2 == 1);
  CHECK(BlurConfig::from_sigma(0.5).kernel_size >= 1);
}

TEST_CASE("kernel weights are normalized", "[blur]") {
  for (double sigma : {0.8, 3.0, 5.0, 7.0, 11.3}) {
    auto w = fpd::gaussian_kernel_1d(BlurConfig::from_sigma(sigma));
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("constant image stays constant under blur", "[blur]") {
  for (double c : {0.0, 0.37, 1.0}) {
    GrayImage img(32, 32, c);
    GrayImage out = fpd::gaussian_blur(img, BlurConfig::from_sigma(5.0));
    for (double v : out.data()) CHECK(std::abs(v - c) <= 1e-12);
  }
}

TEST_CASE("separable blur equals dense 2-D convolution on an impulse", "[blur]") {
  GrayImage img(33, 33, 0.0);
  img.at(16, 16) = 1.0;
  BlurConfig cfg = BlurConfig::from_sigma(3.0);
  REQUIRE(cfg.kernel_size == 17);
  GrayImage fast = fpd::gaussian_blur(img, cfg);
  GrayImage dense = oracle::dense_gaussian_blur(img, cfg.sigma, cfg.kernel_size);
  CHECK(oracle::max_abs_difference(fast, dense) <= 1e-10);
}

TEST_CASE("separable blur equals dense 2-D convolution on random images", "[blur][slow]") {
  Rng rng(101);
  for (int i = 0; i < 10; ++i) {
    GrayImage img = random_image(64, 64, rng);
    double sigma = 1.0 + 4.0 * rng.uniform();
    BlurConfig cfg = BlurConfig::from_sigma(sigma);
    GrayImage fast = fpd::gaussian_blur(img, cfg);
    GrayImage dense = oracle::dense_gaussian_blur(img, cfg.sigma, cfg.kernel_size);
    CHECK(oracle::max_abs_difference(fast, dense) <= 1e-10);
  }
}

TEST_CASE("oversized kernel is rejected", "[blur]") {
  GrayImage img(16, 16, 0.5);
  BlurConfig cfg{6.0, 35};  // 35 > 2*16
  CHECK_THROWS_AS(fpd::gaussian_blur(img, cfg), fpd::ConfigError);
}

TEST_CASE("invalid blur configs are rejected", "[blur]") {
  CHECK_THROWS_AS(BlurConfig::from_sigma(0.0), fpd::ConfigError);
  CHECK_THROWS_AS(BlurConfig::from_sigma(-2.0), fpd::ConfigError);
  BlurConfig even{3.0, 16};
  GrayImage img(32, 32, 0.5);
  CHECK_THROWS_AS(fpd::gaussian_blur(img, even), fpd::ConfigError);
}
