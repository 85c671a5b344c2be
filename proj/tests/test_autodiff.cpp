#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "fpd/core/autodiff.hpp"
#include "fpd/core/rng.hpp"
#include "fpd/core/tensor.hpp"

using fpd::Rng;
using fpd::Tensor;
namespace ad = fpd::ad;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

// Central finite differences on every element of every input against the
// analytic gradient produced by backward(). `build` must construct a scalar
// graph from the given leaves.
void check_gradients(std::vector<ad::Value> leaves,
                     const std::function<ad::Value(const std::vector<ad::Value>&)>& build,
                     double h = 1e-6, double tol = 1e-6) {
  auto root = build(leaves);
  ad::backward(root);
  for (auto& leaf : leaves) {
    REQUIRE(leaf->requires_grad);
    Tensor analytic = leaf->grad.empty() ? Tensor(leaf->val.shape()) : leaf->grad;
    for (std::int64_t i = 0; i < leaf->val.numel(); ++i) {
      double orig = leaf->val[i];
      leaf->val[i] = orig + h;
      double fp = build(leaves)->val[0];
      leaf->val[i] = orig - h;
      double fm = build(leaves)->val[0];
      leaf->val[i] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1.0});
      INFO("leaf element " << i << " analytic=" << analytic[i] << " numeric=" << numeric);
      CHECK(std::abs(analytic[i] - numeric) / denom < tol);
    }
  }
}

}  // namespace

TEST_CASE("elementwise ops match finite differences", "[autodiff]") {
  Rng rng(11);
  auto a = ad::leaf(random_tensor({2, 3, 4, 4}, rng), true);
  auto b = ad::leaf(random_tensor({2, 3, 4, 4}, rng), true);

  SECTION("add/sub/scale chain") {
    check_gradients({a, b}, [](const std::vector<ad::Value>& v) {
      return ad::mean_sq_diff(ad::scale(ad::add(v[0], v[1]), 0.7), ad::sub(v[0], v[1]));
    });
  }
  SECTION("leaky relu") {
    check_gradients({a}, [&b](const std::vector<ad::Value>& v) {
      return ad::mean_abs_diff(ad::leaky_relu(v[0], 0.2), ad::detach(b));
    });
  }
  SECTION("relu") {
    check_gradients({a}, [&b](const std::vector<ad::Value>& v) {
      return ad::mean_sq_diff(ad::relu(v[0]), ad::detach(b));
    });
  }
  SECTION("sigmoid") {
    check_gradients({a}, [&b](const std::vector<ad::Value>& v) {
      return ad::mean_sq_diff(ad::sigmoid(v[0]), ad::detach(b));
    });
  }
  SECTION("concat") {
    check_gradients({a, b}, [](const std::vector<ad::Value>& v) {
      auto c = ad::concat_channels(v[0], v[1]);
      return ad::mean_sq_diff(c, ad::constant(Tensor(c->val.shape(), 0.1)));
    });
  }
}

TEST_CASE("spatial ops match finite differences", "[autodiff]") {
  Rng rng(12);
  auto x = ad::leaf(random_tensor({2, 2, 4, 4}, rng), true);

  SECTION("upsample nearest") {
    check_gradients({x}, [](const std::vector<ad::Value>& v) {
      auto u = ad::upsample_nearest2(v[0]);
      return ad::mean_sq_diff(u, ad::constant(Tensor(u->val.shape(), 0.25)));
    });
  }
  SECTION("avg pool") {
    check_gradients({x}, [](const std::vector<ad::Value>& v) {
      auto p = ad::avg_pool(v[0], 2);
      return ad::mean_sq_diff(p, ad::constant(Tensor(p->val.shape(), -0.5)));
    });
  }
  SECTION("instance norm") {
    auto gamma = ad::leaf(random_tensor({2}, rng, 0.5), true);
    auto beta = ad::leaf(random_tensor({2}, rng, 0.5), true);
    check_gradients(
        {x, gamma, beta},
        [](const std::vector<ad::Value>& v) {
          auto y = ad::instance_norm(v[0], v[1], v[2]);
          return ad::mean_sq_diff(y, ad::constant(Tensor(y->val.shape(), 0.3)));
        },
        1e-6, 5e-5);
  }
}

TEST_CASE("conv2d matches finite differences", "[autodiff]") {
  Rng rng(13);
  SECTION("stride 2 pad 1 k4") {
    auto x = ad::leaf(random_tensor({2, 2, 6, 6}, rng), true);
    auto w = ad::leaf(random_tensor({3, 2, 4, 4}, rng, 0.3), true);
    auto b = ad::leaf(random_tensor({3}, rng, 0.1), true);
    check_gradients({x, w, b}, [](const std::vector<ad::Value>& v) {
      auto y = ad::conv2d(v[0], v[1], v[2], 2, 1);
      return ad::mean_sq_diff(y, ad::constant(Tensor(y->val.shape(), 0.2)));
    });
  }
  SECTION("stride 1 pad 1 k3") {
    auto x = ad::leaf(random_tensor({1, 3, 5, 5}, rng), true);
    auto w = ad::leaf(random_tensor({2, 3, 3, 3}, rng, 0.3), true);
    auto b = ad::leaf(random_tensor({2}, rng, 0.1), true);
    check_gradients({x, w, b}, [](const std::vector<ad::Value>& v) {
      auto y = ad::conv2d(v[0], v[1], v[2], 1, 1);
      return ad::mean_abs_diff(y, ad::constant(Tensor(y->val.shape(), 0.0)));
    });
  }
  SECTION("1x1 conv") {
    auto x = ad::leaf(random_tensor({2, 4, 3, 3}, rng), true);
    auto w = ad::leaf(random_tensor({1, 4, 1, 1}, rng, 0.3), true);
    auto b = ad::leaf(random_tensor({1}, rng, 0.1), true);
    check_gradients({x, w, b}, [](const std::vector<ad::Value>& v) {
      auto y = ad::conv2d(v[0], v[1], v[2], 1, 0);
      return ad::mean_sq_diff(y, ad::constant(Tensor(y->val.shape(), 0.0)));
    });
  }
}

TEST_CASE("dense and embedding ops match finite differences", "[autodiff]") {
  Rng rng(14);
  SECTION("linear") {
    auto x = ad::leaf(random_tensor({3, 5}, rng), true);
    auto w = ad::leaf(random_tensor({4, 5}, rng, 0.4), true);
    auto b = ad::leaf(random_tensor({4}, rng, 0.1), true);
    check_gradients({x, w, b}, [](const std::vector<ad::Value>& v) {
      auto y = ad::linear(v[0], v[1], v[2]);
      return ad::mean_sq_diff(y, ad::constant(Tensor(y->val.shape(), 0.1)));
    });
  }
  SECTION("global avg pool") {
    auto x = ad::leaf(random_tensor({2, 3, 4, 4}, rng), true);
    check_gradients({x}, [](const std::vector<ad::Value>& v) {
      auto y = ad::global_avg_pool(v[0]);
      return ad::mean_sq_diff(y, ad::constant(Tensor(y->val.shape(), 0.0)));
    });
  }
  SECTION("l2 normalize") {
    auto x = ad::leaf(random_tensor({3, 6}, rng), true);
    check_gradients({x}, [](const std::vector<ad::Value>& v) {
      auto y = ad::l2_normalize_rows(v[0]);
      return ad::mean_sq_diff(y, ad::constant(Tensor(y->val.shape(), 0.2)));
    });
  }
  SECTION("row distance and contrastive") {
    auto a = ad::leaf(random_tensor({4, 6}, rng), true);
    auto b = ad::leaf(random_tensor({4, 6}, rng), true);
    std::vector<bool> genuine{true, false, true, false};
    check_gradients({a, b}, [genuine](const std::vector<ad::Value>& v) {
      auto d = ad::row_distance(v[0], v[1]);
      return ad::contrastive_mean(d, genuine, 1.0);
    });
  }
}

TEST_CASE("loss reductions match finite differences", "[autodiff]") {
  Rng rng(15);
  SECTION("bce with logits") {
    auto z = ad::leaf(random_tensor({2, 1, 3, 3}, rng, 2.0), true);
    check_gradients({z}, [](const std::vector<ad::Value>& v) {
      return ad::weighted_sum({ad::bce_logits_mean(v[0], 1.0), ad::bce_logits_mean(v[0], 0.0)},
                              {1.0, 0.5});
    });
  }
  SECTION("weighted sum of scalar terms") {
    auto a = ad::leaf(random_tensor({2, 2}, rng), true);
    auto b = ad::leaf(random_tensor({2, 2}, rng), true);
    Tensor target = random_tensor({2, 2}, rng);
    check_gradients({a, b}, [target](const std::vector<ad::Value>& v) {
      auto t1 = ad::mean_sq_diff(v[0], ad::constant(target));
      auto t2 = ad::mean_abs_diff(v[0], v[1]);
      return ad::weighted_sum({t1, t2}, {100.0, 0.01});
    });
  }
}

TEST_CASE("no-grad graphs carry no parents", "[autodiff]") {
  Rng rng(16);
  auto x = ad::constant(random_tensor({1, 2, 4, 4}, rng));
  auto w = ad::constant(random_tensor({2, 2, 3, 3}, rng));
  auto b = ad::constant(random_tensor({2}, rng));
  auto y = ad::conv2d(x, w, b, 1, 1);
  CHECK_FALSE(y->requires_grad);
  CHECK(y->parents.empty());
  CHECK_FALSE(static_cast<bool>(y->backprop));
}

TEST_CASE("detach blocks gradient flow", "[autodiff]") {
  Rng rng(17);
  auto x = ad::leaf(random_tensor({2, 3}, rng), true);
  auto d = ad::detach(x);
  auto loss = ad::mean_sq_diff(d, ad::constant(Tensor({2, 3}, 0.0)));
  CHECK_FALSE(loss->requires_grad);
  auto loss2 = ad::mean_sq_diff(x, d);
  ad::backward(loss2);
  REQUIRE_FALSE(x->grad.empty());
}
