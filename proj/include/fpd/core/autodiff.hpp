#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "fpd/core/tensor.hpp"

// Reverse-mode autodiff over Tensor. The graph is built dynamically; a node
// keeps its parents and a backprop closure only when some input requires a
// gradient, so pure inference passes carry no graph and free intermediates
// as soon as their shared_ptr count drops.
namespace fpd::ad {

struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<Value> parents;
  std::function<void(Node&)> backprop;

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor(val.shape());
    return grad;
  }
};

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

inline Value constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->id = next_node_id();
  return n;
}

inline Value leaf(Tensor t, bool requires_grad) {
  auto n = constant(std::move(t));
  n->requires_grad = requires_grad;
  return n;
}

inline Value detach(const Value& v) { return constant(v->val); }

inline Value make_node(Tensor val, std::vector<Value> parents) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->id = next_node_id();
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) n->parents = std::move(parents);
  return n;
}

// Backprop from a scalar root. Nodes run in reverse creation order, which is
// a valid topological order for a dynamically built graph.
inline void backward(const Value& root) {
  if (root->val.numel() != 1)
    throw std::logic_error("backward() root must be scalar");
  if (!root->requires_grad) return;

  std::vector<Node*> reachable;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    reachable.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(reachable.begin(), reachable.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });

  root->ensure_grad()[0] = 1.0;
  for (Node* n : reachable) {
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops

inline Value add(const Value& a, const Value& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(a->val.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] + b->val[i];
  auto n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      for (int k = 0; k < 2; ++k) {
        Node& p = *self.parents[k];
        if (!p.requires_grad) continue;
        Tensor& g = p.ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return n;
}

inline Value sub(const Value& a, const Value& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out(a->val.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] - b->val[i];
  auto n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        Tensor& g = pa.ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        Tensor& g = pb.ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
      }
    };
  }
  return n;
}

inline Value scale(const Value& a, double c) {
  Tensor out(a->val.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = c * a->val[i];
  auto n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [c](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += c * self.grad[i];
    };
  }
  return n;
}

inline Value relu(const Value& x) {
  Tensor out(x->val.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = x->val[i] > 0 ? x->val[i] : 0.0;
  auto n = make_node(std::move(out), {x});
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i)
        if (p.val[i] > 0) g[i] += self.grad[i];
    };
  }
  return n;
}

inline Value leaky_relu(const Value& x, double slope = 0.2) {
  Tensor out(x->val.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = x->val[i] > 0 ? x->val[i] : slope * x->val[i];
  auto n = make_node(std::move(out), {x});
  if (n->requires_grad) {
    n->backprop = [slope](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i)
        g[i] += self.grad[i] * (p.val[i] > 0 ? 1.0 : slope);
    };
  }
  return n;
}

inline Value sigmoid(const Value& x) {
  Tensor out(x->val.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    double z = x->val[i];
    out[i] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  auto n = make_node(std::move(out), {x});
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        double s = self.val[i];
        g[i] += self.grad[i] * s * (1.0 - s);
      }
    };
  }
  return n;
}

inline Value concat_channels(const Value& a, const Value& b) {
  const auto& sa = a->val.shape();
  const auto& sb = b->val.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
    throw std::invalid_argument("concat_channels: incompatible shapes");
  int N = sa[0], Ca = sa[1], Cb = sb[1], H = sa[2], W = sa[3];
  Tensor out({N, Ca + Cb, H, W});
  std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    std::copy_n(a->val.data() + n * Ca * plane, Ca * plane, out.data() + n * (Ca + Cb) * plane);
    std::copy_n(b->val.data() + n * Cb * plane, Cb * plane,
                out.data() + (n * (Ca + Cb) + Ca) * plane);
  }
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backprop = [N, Ca, Cb, plane](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        Tensor& g = pa.ensure_grad();
        for (int n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < Ca * plane; ++i)
            g[n * Ca * plane + i] += self.grad[n * (Ca + Cb) * plane + i];
      }
      if (pb.requires_grad) {
        Tensor& g = pb.ensure_grad();
        for (int n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < Cb * plane; ++i)
            g[n * Cb * plane + i] += self.grad[(n * (Ca + Cb) + Ca) * plane + i];
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// Spatial ops

inline Value upsample_nearest2(const Value& x) {
  const auto& s = x->val.shape();
  int N = s[0], C = s[1], H = s[2], W = s[3];
  Tensor out({N, C, 2 * H, 2 * W});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          double v = x->val.at(n, c, h, w);
          out.at(n, c, 2 * h, 2 * w) = v;
          out.at(n, c, 2 * h, 2 * w + 1) = v;
          out.at(n, c, 2 * h + 1, 2 * w) = v;
          out.at(n, c, 2 * h + 1, 2 * w + 1) = v;
        }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [N, C, H, W](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
              g.at(n, c, h, w) += self.grad.at(n, c, 2 * h, 2 * w) +
                                  self.grad.at(n, c, 2 * h, 2 * w + 1) +
                                  self.grad.at(n, c, 2 * h + 1, 2 * w) +
                                  self.grad.at(n, c, 2 * h + 1, 2 * w + 1);
    };
  }
  return node;
}

inline Value avg_pool(const Value& x, int f) {
  const auto& s = x->val.shape();
  int N = s[0], C = s[1], H = s[2], W = s[3];
  if (H % f != 0 || W % f != 0)
    throw std::invalid_argument("avg_pool: dims not divisible by factor");
  int OH = H / f, OW = W / f;
  Tensor out({N, C, OH, OW});
  double inv = 1.0 / (f * f);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (int dy = 0; dy < f; ++dy)
            for (int dx = 0; dx < f; ++dx) acc += x->val.at(n, c, oh * f + dy, ow * f + dx);
          out.at(n, c, oh, ow) = acc * inv;
        }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [N, C, OH, OW, f, inv](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
              double gv = self.grad.at(n, c, oh, ow) * inv;
              for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) g.at(n, c, oh * f + dy, ow * f + dx) += gv;
            }
    };
  }
  return node;
}

namespace detail {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unpacks one sample into (C*k*k, OH*OW) patch columns, zero padding.
inline void im2col(const Tensor& x, int n, int k, int stride, int pad, int OH, int OW,
                   MatRM& cols) {
  int C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  cols.resize(static_cast<std::int64_t>(C) * k * k, static_cast<std::int64_t>(OH) * OW);
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        std::int64_t row = (static_cast<std::int64_t>(c) * k + ky) * k + kx;
        for (int oh = 0; oh < OH; ++oh) {
          int ih = oh * stride - pad + ky;
          for (int ow = 0; ow < OW; ++ow) {
            int iw = ow * stride - pad + kx;
            cols(row, static_cast<std::int64_t>(oh) * OW + ow) =
                (ih >= 0 && ih < H && iw >= 0 && iw < W) ? x.at(n, c, ih, iw) : 0.0;
          }
        }
      }
}

inline void col2im_add(const MatRM& cols, Tensor& x, int n, int k, int stride, int pad, int OH,
                       int OW) {
  int C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        std::int64_t row = (static_cast<std::int64_t>(c) * k + ky) * k + kx;
        for (int oh = 0; oh < OH; ++oh) {
          int ih = oh * stride - pad + ky;
          if (ih < 0 || ih >= H) continue;
          for (int ow = 0; ow < OW; ++ow) {
            int iw = ow * stride - pad + kx;
            if (iw < 0 || iw >= W) continue;
            x.at(n, c, ih, iw) += cols(row, static_cast<std::int64_t>(oh) * OW + ow);
          }
        }
      }
}

}  // namespace detail

// conv2d: x (N,Ci,H,W), w (O,Ci,k,k), b (O). im2col + GEMM per sample; the
// backward pass recomputes patch columns from the saved input instead of
// keeping them alive, which bounds memory to the activations themselves.
inline Value conv2d(const Value& x, const Value& w, const Value& b, int stride, int pad) {
  const auto& xs = x->val.shape();
  const auto& ws = w->val.shape();
  if (xs.size() != 4 || ws.size() != 4) throw std::invalid_argument("conv2d: rank");
  int N = xs[0], Ci = xs[1], H = xs[2], W = xs[3];
  int O = ws[0], k = ws[2];
  if (ws[1] != Ci) throw std::invalid_argument("conv2d: channel mismatch");
  int OH = (H + 2 * pad - k) / stride + 1;
  int OW = (W + 2 * pad - k) / stride + 1;
  if (OH < 1 || OW < 1) throw std::invalid_argument("conv2d: output collapses to zero");

  Tensor out({N, O, OH, OW});
  {
    Eigen::Map<const detail::MatRM> Wm(w->val.data(), O, static_cast<std::int64_t>(Ci) * k * k);
    detail::MatRM cols;
    for (int n = 0; n < N; ++n) {
      detail::im2col(x->val, n, k, stride, pad, OH, OW, cols);
      Eigen::Map<detail::MatRM> Y(out.data() + static_cast<std::int64_t>(n) * O * OH * OW, O,
                                  static_cast<std::int64_t>(OH) * OW);
      Y.noalias() = Wm * cols;
      for (int o = 0; o < O; ++o) Y.row(o).array() += b->val[o];
    }
  }

  auto node = make_node(std::move(out), {x, w, b});
  if (node->requires_grad) {
    node->backprop = [N, Ci, O, k, stride, pad, OH, OW](Node& self) {
      Node& px = *self.parents[0];
      Node& pw = *self.parents[1];
      Node& pb = *self.parents[2];
      std::int64_t cols_n = static_cast<std::int64_t>(OH) * OW;
      detail::MatRM cols;
      if (pb.requires_grad) {
        Tensor& gb = pb.ensure_grad();
        for (int n = 0; n < N; ++n) {
          Eigen::Map<const detail::MatRM> dY(
              self.grad.data() + static_cast<std::int64_t>(n) * O * cols_n, O, cols_n);
          for (int o = 0; o < O; ++o) gb[o] += dY.row(o).sum();
        }
      }
      if (pw.requires_grad) {
        Tensor& gw = pw.ensure_grad();
        Eigen::Map<detail::MatRM> dW(gw.data(), O, static_cast<std::int64_t>(Ci) * k * k);
        for (int n = 0; n < N; ++n) {
          detail::im2col(px.val, n, k, stride, pad, OH, OW, cols);
          Eigen::Map<const detail::MatRM> dY(
              self.grad.data() + static_cast<std::int64_t>(n) * O * cols_n, O, cols_n);
          dW.noalias() += dY * cols.transpose();
        }
      }
      if (px.requires_grad) {
        Tensor& gx = px.ensure_grad();
        Eigen::Map<const detail::MatRM> Wm(pw.val.data(), O,
                                           static_cast<std::int64_t>(Ci) * k * k);
        detail::MatRM dcols;
        for (int n = 0; n < N; ++n) {
          Eigen::Map<const detail::MatRM> dY(
              self.grad.data() + static_cast<std::int64_t>(n) * O * cols_n, O, cols_n);
          dcols.noalias() = Wm.transpose() * dY;
          detail::col2im_add(dcols, gx, n, k, stride, pad, OH, OW);
        }
      }
    };
  }
  return node;
}

// Per-(sample, channel) normalization over H*W with affine parameters.
// Spatial 1x1 maps degenerate to the bias, so builders skip the norm there.
inline Value instance_norm(const Value& x, const Value& gamma, const Value& beta,
                           double eps = 1e-5) {
  const auto& s = x->val.shape();
  int N = s[0], C = s[1], H = s[2], W = s[3];
  std::int64_t m = static_cast<std::int64_t>(H) * W;
  Tensor out({N, C, H, W});
  auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * C * 2);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xp = x->val.data() + (static_cast<std::int64_t>(n) * C + c) * m;
      double mu = 0.0;
      for (std::int64_t i = 0; i < m; ++i) mu += xp[i];
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (std::int64_t i = 0; i < m; ++i) var += (xp[i] - mu) * (xp[i] - mu);
      var /= static_cast<double>(m);
      double inv = 1.0 / std::sqrt(var + eps);
      (*stats)[(static_cast<size_t>(n) * C + c) * 2] = mu;
      (*stats)[(static_cast<size_t>(n) * C + c) * 2 + 1] = inv;
      double* op = out.data() + (static_cast<std::int64_t>(n) * C + c) * m;
      double g = gamma->val[c], bv = beta->val[c];
      for (std::int64_t i = 0; i < m; ++i) op[i] = (xp[i] - mu) * inv * g + bv;
    }
  auto node = make_node(std::move(out), {x, gamma, beta});
  if (node->requires_grad) {
    node->backprop = [N, C, m, stats](Node& self) {
      Node& px = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * m;
          double mu = (*stats)[(static_cast<size_t>(n) * C + c) * 2];
          double inv = (*stats)[(static_cast<size_t>(n) * C + c) * 2 + 1];
          const double* xp = px.val.data() + off;
          const double* dy = self.grad.data() + off;
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::int64_t i = 0; i < m; ++i) {
            double xhat = (xp[i] - mu) * inv;
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * xhat;
          }
          if (pb.requires_grad) pb.ensure_grad()[c] += sum_dy;
          if (pg.requires_grad) pg.ensure_grad()[c] += sum_dy_xhat;
          if (px.requires_grad) {
            double g = pg.val[c];
            double* gx = px.ensure_grad().data() + off;
            double inv_m = 1.0 / static_cast<double>(m);
            for (std::int64_t i = 0; i < m; ++i) {
              double xhat = (xp[i] - mu) * inv;
              gx[i] += g * inv * (dy[i] - sum_dy * inv_m - xhat * sum_dy_xhat * inv_m);
            }
          }
        }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// Dense / embedding ops

// x (N,D) @ w (E,D)^T + b (E) -> (N,E)
inline Value linear(const Value& x, const Value& w, const Value& b) {
  int N = x->val.shape()[0], D = x->val.shape()[1];
  int E = w->val.shape()[0];
  if (w->val.shape()[1] != D) throw std::invalid_argument("linear: shape mismatch");
  Tensor out({N, E});
  {
    Eigen::Map<const detail::MatRM> X(x->val.data(), N, D);
    Eigen::Map<const detail::MatRM> Wm(w->val.data(), E, D);
    Eigen::Map<detail::MatRM> Y(out.data(), N, E);
    Y.noalias() = X * Wm.transpose();
    for (int n = 0; n < N; ++n)
      for (int e = 0; e < E; ++e) Y(n, e) += b->val[e];
  }
  auto node = make_node(std::move(out), {x, w, b});
  if (node->requires_grad) {
    node->backprop = [N, D, E](Node& self) {
      Node& px = *self.parents[0];
      Node& pw = *self.parents[1];
      Node& pb = *self.parents[2];
      Eigen::Map<const detail::MatRM> dY(self.grad.data(), N, E);
      if (pb.requires_grad) {
        Tensor& gb = pb.ensure_grad();
        for (int e = 0; e < E; ++e) gb[e] += dY.col(e).sum();
      }
      if (pw.requires_grad) {
        Eigen::Map<detail::MatRM> gW(pw.ensure_grad().data(), E, D);
        Eigen::Map<const detail::MatRM> X(px.val.data(), N, D);
        gW.noalias() += dY.transpose() * X;
      }
      if (px.requires_grad) {
        Eigen::Map<detail::MatRM> gX(px.ensure_grad().data(), N, D);
        Eigen::Map<const detail::MatRM> Wm(pw.val.data(), E, D);
        gX.noalias() += dY * Wm;
      }
    };
  }
  return node;
}

inline Value global_avg_pool(const Value& x) {
  const auto& s = x->val.shape();
  int N = s[0], C = s[1];
  std::int64_t m = static_cast<std::int64_t>(s[2]) * s[3];
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xp = x->val.data() + (static_cast<std::int64_t>(n) * C + c) * m;
      double acc = 0.0;
      for (std::int64_t i = 0; i < m; ++i) acc += xp[i];
      out[static_cast<std::int64_t>(n) * C + c] = acc / static_cast<double>(m);
    }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [N, C, m](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double gv = self.grad[static_cast<std::int64_t>(n) * C + c] / static_cast<double>(m);
          double* gp = g.data() + (static_cast<std::int64_t>(n) * C + c) * m;
          for (std::int64_t i = 0; i < m; ++i) gp[i] += gv;
        }
    };
  }
  return node;
}

// Row-wise x / ||x||, used for the unit-norm embedding.
inline Value l2_normalize_rows(const Value& x, double eps = 1e-12) {
  int N = x->val.shape()[0], D = x->val.shape()[1];
  Tensor out({N, D});
  auto norms = std::make_shared<std::vector<double>>(N);
  for (int n = 0; n < N; ++n) {
    const double* xp = x->val.data() + static_cast<std::int64_t>(n) * D;
    double ss = 0.0;
    for (int i = 0; i < D; ++i) ss += xp[i] * xp[i];
    double nm = std::sqrt(ss) + eps;
    (*norms)[n] = nm;
    for (int i = 0; i < D; ++i) out[static_cast<std::int64_t>(n) * D + i] = xp[i] / nm;
  }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [N, D, norms](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (int n = 0; n < N; ++n) {
        const double* y = self.val.data() + static_cast<std::int64_t>(n) * D;
        const double* dy = self.grad.data() + static_cast<std::int64_t>(n) * D;
        double dot = 0.0;
        for (int i = 0; i < D; ++i) dot += y[i] * dy[i];
        double inv = 1.0 / (*norms)[n];
        double* gp = g.data() + static_cast<std::int64_t>(n) * D;
        for (int i = 0; i < D; ++i) gp[i] += (dy[i] - y[i] * dot) * inv;
      }
    };
  }
  return node;
}

// Row-wise Euclidean distance between (N,D) embeddings -> (N).
inline Value row_distance(const Value& a, const Value& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("row_distance: shape mismatch");
  int N = a->val.shape()[0], D = a->val.shape()[1];
  Tensor out({N});
  for (int n = 0; n < N; ++n) {
    double ss = 0.0;
    for (int i = 0; i < D; ++i) {
      double d = a->val[static_cast<std::int64_t>(n) * D + i] -
                 b->val[static_cast<std::int64_t>(n) * D + i];
      ss += d * d;
    }
    out[n] = std::sqrt(ss);
  }
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backprop = [N, D](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      for (int n = 0; n < N; ++n) {
        double d = std::max(self.val[n], 1e-12);
        double gd = self.grad[n] / d;
        for (int i = 0; i < D; ++i) {
          double diff = pa.val[static_cast<std::int64_t>(n) * D + i] -
                        pb.val[static_cast<std::int64_t>(n) * D + i];
          if (pa.requires_grad) pa.ensure_grad()[static_cast<std::int64_t>(n) * D + i] += gd * diff;
          if (pb.requires_grad) pb.ensure_grad()[static_cast<std::int64_t>(n) * D + i] -= gd * diff;
        }
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// Reductions to scalar

inline Value mean_abs_diff(const Value& a, const Value& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("mean_abs_diff: shape mismatch");
  std::int64_t M = a->val.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < M; ++i) acc += std::abs(a->val[i] - b->val[i]);
  auto node = make_node(Tensor::scalar(acc / static_cast<double>(M)), {a, b});
  if (node->requires_grad) {
    node->backprop = [M](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      double g = self.grad[0] / static_cast<double>(M);
      for (std::int64_t i = 0; i < M; ++i) {
        double d = pa.val[i] - pb.val[i];
        double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        if (pa.requires_grad) pa.ensure_grad()[i] += g * s;
        if (pb.requires_grad) pb.ensure_grad()[i] -= g * s;
      }
    };
  }
  return node;
}

inline Value mean_sq_diff(const Value& a, const Value& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("mean_sq_diff: shape mismatch");
  std::int64_t M = a->val.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < M; ++i) {
    double d = a->val[i] - b->val[i];
    acc += d * d;
  }
  auto node = make_node(Tensor::scalar(acc / static_cast<double>(M)), {a, b});
  if (node->requires_grad) {
    node->backprop = [M](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      double g = 2.0 * self.grad[0] / static_cast<double>(M);
      for (std::int64_t i = 0; i < M; ++i) {
        double d = pa.val[i] - pb.val[i];
        if (pa.requires_grad) pa.ensure_grad()[i] += g * d;
        if (pb.requires_grad) pb.ensure_grad()[i] -= g * d;
      }
    };
  }
  return node;
}

inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// Mean binary cross entropy against a constant 0/1 target, taking raw
// logits. BCE(sigmoid(z), t) == softplus(z) - t*z, stable for large |z|.
inline Value bce_logits_mean(const Value& z, double target) {
  std::int64_t M = z->val.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < M; ++i) acc += softplus(z->val[i]) - target * z->val[i];
  auto node = make_node(Tensor::scalar(acc / static_cast<double>(M)), {z});
  if (node->requires_grad) {
    node->backprop = [M, target](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      double gv = self.grad[0] / static_cast<double>(M);
      for (std::int64_t i = 0; i < M; ++i) {
        double zi = p.val[i];
        double s = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
        g[i] += gv * (s - target);
      }
    };
  }
  return node;
}

// total = sum_i coeff_i * scalar_i
inline Value weighted_sum(const std::vector<Value>& terms, const std::vector<double>& coeffs) {
  if (terms.size() != coeffs.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    if (terms[i]->val.numel() != 1) throw std::invalid_argument("weighted_sum: non-scalar term");
    acc += coeffs[i] * terms[i]->val[0];
  }
  auto node = make_node(Tensor::scalar(acc), std::vector<Value>(terms));
  if (node->requires_grad) {
    auto cs = coeffs;
    node->backprop = [cs](Node& self) {
      for (size_t i = 0; i < self.parents.size(); ++i) {
        Node& p = *self.parents[i];
        if (p.requires_grad) p.ensure_grad()[0] += cs[i] * self.grad[0];
      }
    };
  }
  return node;
}

// Contrastive objective over a batch of distances: d^2 for genuine pairs,
// max(0, margin - d)^2 for impostors, averaged.
inline Value contrastive_mean(const Value& dist, const std::vector<bool>& genuine, double margin) {
  int N = dist->val.shape()[0];
  if (static_cast<size_t>(N) != genuine.size())
    throw std::invalid_argument("contrastive_mean: flag count mismatch");
  double acc = 0.0;
  for (int n = 0; n < N; ++n) {
    double d = dist->val[n];
    if (genuine[n]) {
      acc += d * d;
    } else {
      double h = std::max(0.0, margin - d);
      acc += h * h;
    }
  }
  auto node = make_node(Tensor::scalar(acc / N), {dist});
  if (node->requires_grad) {
    auto flags = genuine;
    node->backprop = [flags, margin, N](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      double gv = self.grad[0] / N;
      for (int n = 0; n < N; ++n) {
        double d = p.val[n];
        if (flags[n]) {
          g[n] += gv * 2.0 * d;
        } else {
          double h = margin - d;
          if (h > 0) g[n] -= gv * 2.0 * h;
        }
      }
    };
  }
  return node;
}

}  // namespace fpd::ad
