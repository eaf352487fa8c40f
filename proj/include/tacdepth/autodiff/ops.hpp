#pragma once

// Differentiable primitives. No broadcasting: every binary op requires
// identical shapes. Convolution is cross-correlation (no kernel flip).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tacdepth/autodiff/tape.hpp"
#include "tacdepth/autodiff/tensor.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth::ad {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

inline Tape& same_tape(Var a, Var b) {
  if (!a.defined() || !b.defined() || a.tape != b.tape)
    throw DomainError("operands must live on the same tape");
  return *a.tape;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ConvGeometry {
  int channels, height, width, kh, kw, stride, pad, out_h, out_w;
  int rows() const { return channels * kh * kw; }
  int cols() const { return out_h * out_w; }
};

/// Unfolds one CHW image into a (C*kh*kw) x (out_h*out_w) matrix.
inline void im2col(const double* x, const ConvGeometry& g, double* col) {
  const int P = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        double* row = col + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * P;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters column gradients back into the image.
inline void col2im_add(const double* col, const ConvGeometry& g, double* dx) {
  const int P = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const double* row = col + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * P;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.out_w;
          double* dst = dx + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ------------------------------------------------------------ elementwise

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  detail::require_same_shape(va, vb, "add");
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    for (int in : {ia, ib}) {
      if (!tp.requires_grad(in)) continue;
      Tensor& gi = tp.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  detail::require_same_shape(va, vb, "mul");
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    if (tp.requires_grad(ia)) {
      const Tensor& vb = tp.value(ib);
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (tp.requires_grad(ib)) {
      const Tensor& va = tp.value(ia);
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

inline Var scale(Var a, double s) {
  const Tensor& va = a.value();
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * va[i];
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, s](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

/// max(x, 0); NaN inputs stay NaN so divergence reaches the loss.
inline Var relu(Var a) {
  const Tensor& va = a.value();
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > 0.0 || std::isnan(va[i]) ? va[i] : 0.0;
  return a.tape->record(std::move(out), {a.id}, [ia = a.id](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& x = tp.value(ia);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

inline Var sigmoid(Var a) {
  const Tensor& va = a.value();
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::stable_sigmoid(va[i]);
  return a.tape->record(std::move(out), {a.id}, [ia = a.id](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

/// Sum of all elements, as a scalar.
inline Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return a.tape->record(Tensor::scalar(s), {a.id}, [ia = a.id](Tape& tp, int self) {
    const double g = tp.grad_buffer(self)[0];
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

// ------------------------------------------------------------ convolution

/// 2-D cross-correlation. input N x C x H x W, weight O x C x kh x kw,
/// bias O elements (any shape) or undefined for none.
inline Var conv2d(Var input, Var weight, Var bias, int stride, int padding) {
  Tape& t = detail::same_tape(input, weight);
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  if (x.c() != w.c())
    throw ShapeError("conv2d: input has " + std::to_string(x.c()) + " channels, kernel expects " +
                     std::to_string(w.c()));
  if (x.h() + 2 * padding < w.h() || x.w() + 2 * padding < w.w())
    throw ShapeError("conv2d: kernel larger than padded input");
  if (bias.defined()) {
    if (bias.tape != input.tape) throw DomainError("conv2d: bias on another tape");
    if (static_cast<int>(bias.value().size()) != w.n()) throw ShapeError("conv2d: bias size mismatch");
  }
  detail::ConvGeometry g{x.c(), x.h(), x.w(), w.h(), w.w(), stride, padding,
                         (x.h() + 2 * padding - w.h()) / stride + 1,
                         (x.w() + 2 * padding - w.w()) / stride + 1};
  const int O = w.n(), K = g.rows(), P = g.cols();
  Tensor out({x.n(), O, g.out_h, g.out_w});
  Storage col(static_cast<std::size_t>(K) * P);
  detail::MapRowC wm(w.data(), O, K);
  for (int n = 0; n < x.n(); ++n) {
    detail::im2col(x.data() + x.offset(n, 0, 0, 0), g, col.data());
    detail::MapRow om(out.data() + out.offset(n, 0, 0, 0), O, P);
    om.noalias() = wm * detail::MapRowC(col.data(), K, P);
    if (bias.defined()) {
      const Tensor& b = bias.value();
      for (int o = 0; o < O; ++o) om.row(o).array() += b[static_cast<std::size_t>(o)];
    }
  }
  std::vector<int> inputs{input.id, weight.id};
  if (bias.defined()) inputs.push_back(bias.id);
  return t.record(std::move(out), std::move(inputs),
                  [ix = input.id, iw = weight.id, ib = bias.defined() ? bias.id : -1, g](Tape& tp, int self) {
                    const Tensor& gout = tp.grad_buffer(self);
                    const Tensor& x = tp.value(ix);
                    const Tensor& w = tp.value(iw);
                    const int O = w.n(), K = g.rows(), P = g.cols();
                    const bool want_x = tp.requires_grad(ix), want_w = tp.requires_grad(iw);
                    const bool want_b = ib >= 0 && tp.requires_grad(ib);
                    Storage col(static_cast<std::size_t>(K) * P);
                    detail::MapRowC wm(w.data(), O, K);
                    for (int n = 0; n < x.n(); ++n) {
                      detail::MapRowC gm(gout.data() + gout.offset(n, 0, 0, 0), O, P);
                      if (want_w) {
                        detail::im2col(x.data() + x.offset(n, 0, 0, 0), g, col.data());
                        Tensor& gw = tp.grad_buffer(iw);
                        detail::MapRow(gw.data(), O, K).noalias() +=
                            gm * detail::MapRowC(col.data(), K, P).transpose();
                      }
                      if (want_b) {
                        Tensor& gb = tp.grad_buffer(ib);
                        for (int o = 0; o < O; ++o) gb[static_cast<std::size_t>(o)] += gm.row(o).sum();
                      }
                      if (want_x) {
                        detail::MapRow cm(col.data(), K, P);
                        cm.noalias() = wm.transpose() * gm;
                        Tensor& gx = tp.grad_buffer(ix);
                        detail::col2im_add(col.data(), g, gx.data() + gx.offset(n, 0, 0, 0));
                      }
                    }
                  });
}

// ------------------------------------------------------------ rearrangement

/// out[n][c*b*b + dy*b + dx][y][x] = in[n][c][y*b + dy][x*b + dx]
inline Var space_to_depth(Var a, int block) {
  const Tensor& x = a.value();
  if (block < 1 || x.h() % block != 0 || x.w() % block != 0)
    throw ShapeError("space_to_depth: spatial dims " + to_string(x.shape()) +
                     " not divisible by block " + std::to_string(block));
  const int b = block, H = x.h() / b, W = x.w() / b;
  Tensor out({x.n(), x.c() * b * b, H, W});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int dy = 0; dy < b; ++dy)
        for (int dx = 0; dx < b; ++dx)
          for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx)
              out.at(n, (c * b + dy) * b + dx, y, xx) = x.at(n, c, y * b + dy, xx * b + dx);
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, b](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    Tensor& gi = tp.grad_buffer(ia);
    for (int n = 0; n < gi.n(); ++n)
      for (int c = 0; c < gi.c(); ++c)
        for (int dy = 0; dy < b; ++dy)
          for (int dx = 0; dx < b; ++dx)
            for (int y = 0; y < g.h(); ++y)
              for (int xx = 0; xx < g.w(); ++xx)
                gi.at(n, c, y * b + dy, xx * b + dx) += g.at(n, (c * b + dy) * b + dx, y, xx);
  });
}

/// Inverse of space_to_depth.
inline Var depth_to_space(Var a, int block) {
  const Tensor& x = a.value();
  if (block < 1 || x.c() % (block * block) != 0)
    throw ShapeError("depth_to_space: channels " + std::to_string(x.c()) +
                     " not divisible by block^2 = " + std::to_string(block * block));
  const int b = block, C = x.c() / (b * b);
  Tensor out({x.n(), C, x.h() * b, x.w() * b});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < b; ++dy)
        for (int dx = 0; dx < b; ++dx)
          for (int y = 0; y < x.h(); ++y)
            for (int xx = 0; xx < x.w(); ++xx)
              out.at(n, c, y * b + dy, xx * b + dx) = x.at(n, (c * b + dy) * b + dx, y, xx);
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, b](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    Tensor& gi = tp.grad_buffer(ia);
    const int C = g.c();
    for (int n = 0; n < gi.n(); ++n)
      for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < b; ++dy)
          for (int dx = 0; dx < b; ++dx)
            for (int y = 0; y < gi.h(); ++y)
              for (int xx = 0; xx < gi.w(); ++xx)
                gi.at(n, (c * b + dy) * b + dx, y, xx) += g.at(n, c, y * b + dy, xx * b + dx);
  });
}

inline Var upsample_nearest(Var a, int factor) {
  const Tensor& x = a.value();
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const int f = factor;
  Tensor out({x.n(), x.c(), x.h() * f, x.w() * f});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < out.h(); ++y) {
        const double* src = x.data() + x.offset(n, c, y / f, 0);
        double* dst = out.data() + out.offset(n, c, y, 0);
        for (int xx = 0; xx < out.w(); ++xx) dst[xx] = src[xx / f];
      }
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, f](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    Tensor& gi = tp.grad_buffer(ia);
    for (int n = 0; n < g.n(); ++n)
      for (int c = 0; c < g.c(); ++c)
        for (int y = 0; y < g.h(); ++y) {
          const double* src = g.data() + g.offset(n, c, y, 0);
          double* dst = gi.data() + gi.offset(n, c, y / f, 0);
          for (int xx = 0; xx < g.w(); ++xx) dst[xx / f] += src[xx];
        }
  });
}

inline Var concat_channels(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.n() != vb.n() || va.h() != vb.h() || va.w() != vb.w())
    throw ShapeError("concat_channels: " + to_string(va.shape()) + " vs " + to_string(vb.shape()));
  const std::size_t plane = static_cast<std::size_t>(va.h()) * va.w();
  const std::size_t ca = va.c() * plane, cb = vb.c() * plane;
  Tensor out({va.n(), va.c() + vb.c(), va.h(), va.w()});
  for (int n = 0; n < va.n(); ++n) {
    std::copy_n(va.data() + n * ca, ca, out.data() + n * (ca + cb));
    std::copy_n(vb.data() + n * cb, cb, out.data() + n * (ca + cb) + ca);
  }
  return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id, ca, cb](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const int N = g.n();
    if (tp.requires_grad(ia)) {
      Tensor& gi = tp.grad_buffer(ia);
      for (int n = 0; n < N; ++n)
        for (std::size_t k = 0; k < ca; ++k) gi[n * ca + k] += g[n * (ca + cb) + k];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gi = tp.grad_buffer(ib);
      for (int n = 0; n < N; ++n)
        for (std::size_t k = 0; k < cb; ++k) gi[n * cb + k] += g[n * (ca + cb) + ca + k];
    }
  });
}

// ------------------------------------------------------------ depth head & loss

/// depth = 1 / (1/d_max + sigmoid(x) * (1/d_min - 1/d_max)), clamped to
/// [d_min, d_max] against rounding at saturation.
inline Var inverse_depth_squash(Var a, double d_min, double d_max) {
  if (!(d_min > 0.0 && d_min < d_max)) throw DomainError("inverse_depth_squash: need 0 < d_min < d_max");
  const double lo = 1.0 / d_max, span = 1.0 / d_min - 1.0 / d_max;
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(1.0 / (lo + detail::stable_sigmoid(x[i]) * span), d_min, d_max);
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, lo, span](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& x = tp.value(ia);
    Tensor& gi = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = detail::stable_sigmoid(x[i]);
      const double inv = lo + s * span;
      // d/dx 1/inv = -span * s(1-s) / inv^2
      gi[i] += g[i] * (-span * s * (1.0 - s) / (inv * inv));
    }
  });
}

/// Mean absolute error over pixels with mask != 0. `target` and `mask`
/// must match the prediction's shape; values at masked-out pixels are
/// never read.
inline Var masked_l1(Var pred, const Tensor& target, const std::vector<std::uint8_t>& mask) {
  const Tensor& p = pred.value();
  detail::require_same_shape(p, target, "masked_l1");
  if (mask.size() != p.size()) throw ShapeError("masked_l1: mask size mismatch");
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    total += std::abs(p[i] - target[i]);
    ++count;
  }
  if (count == 0) throw DomainError("masked_l1: no valid pixels");
  std::vector<double> sign(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    const double d = p[i] - target[i];
    sign[i] = (d > 0.0) - (d < 0.0);
  }
  const double inv = 1.0 / static_cast<double>(count);
  return pred.tape->record(Tensor::scalar(total * inv), {pred.id},
                           [ip = pred.id, sign = std::move(sign), inv](Tape& tp, int self) {
                             const double g = tp.grad_buffer(self)[0] * inv;
                             Tensor& gi = tp.grad_buffer(ip);
                             for (std::size_t i = 0; i < sign.size(); ++i) gi[i] += g * sign[i];
                           });
}

}  // namespace tacdepth::ad
