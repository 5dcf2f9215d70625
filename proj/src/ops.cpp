// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pathroute/error.hpp"

namespace pathroute::nn {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

struct ConvGeometry {
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int k;
  Conv2dOptions opts;

  int patch_rows() const { return in_c * k * k; }
  int out_pixels() const { return out_h * out_w; }
};

// cols[(ci*k + ky)*k + kx][oy*out_w + ox] = x[ci][oy*s - p + ky*d][ox*s - p + kx*d]
void im2col(const float* x, const ConvGeometry& g, float* cols) {
  const int s = g.opts.stride, p = g.opts.padding, d = g.opts.dilation;
  for (int ci = 0; ci < g.in_c; ++ci) {
    const float* plane = x + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* row = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.out_pixels();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * s - p + ky * d;
          float* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          if (s == 1) {
            const int off = kx * d - p;
            const int lo = std::clamp(-off, 0, g.out_w);
            const int hi = std::clamp(g.in_w - off, 0, g.out_w);
            std::fill(dst, dst + lo, 0.0f);
            if (hi > lo) std::copy(src + lo + off, src + hi + off, dst + lo);
            std::fill(dst + std::max(hi, lo), dst + g.out_w, 0.0f);
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * s - p + kx * d;
              dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvGeometry& g, float* dx) {
  const int s = g.opts.stride, p = g.opts.padding, d = g.opts.dilation;
  for (int ci = 0; ci < g.in_c; ++ci) {
    float* plane = dx + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* row =
            cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.out_pixels();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * s - p + ky * d;
          if (iy < 0 || iy >= g.in_h) continue;
          const float* src = row + static_cast<std::size_t>(oy) * g.out_w;
          float* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * s - p + kx * d;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

int conv_output_extent(int in, int k, Conv2dOptions opts) {
  const int span = opts.dilation * (k - 1) + 1;
  return (in + 2 * opts.padding - span) / opts.stride + 1;
}

namespace {

using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Stride-1 convolution as k*k GEMMs over shifted windows of the zero-padded
// input. Outputs are computed on the padded row pitch; the trailing
// (k-1)*d columns of each row are discarded.
struct ShiftedConv {
  ConvGeometry g;
  int pad_h, pad_w;   // padded plane extents
  std::size_t plane;  // pad_h * pad_w
  std::size_t span;   // out_h * pad_w
  std::size_t slack;

  explicit ShiftedConv(const ConvGeometry& geom)
      : g(geom),
        pad_h(geom.in_h + 2 * geom.opts.padding),
        pad_w(geom.in_w + 2 * geom.opts.padding),
        plane(static_cast<std::size_t>(pad_h) * pad_w),
        span(static_cast<std::size_t>(geom.out_h) * pad_w),
        slack(static_cast<std::size_t>((geom.k - 1) * geom.opts.dilation)) {}

  std::size_t padded_size() const { return g.in_c * plane + slack; }

  std::size_t offset(int ky, int kx) const {
    return static_cast<std::size_t>(ky * g.opts.dilation) * pad_w + static_cast<std::size_t>(kx * g.opts.dilation);
  }

  void pad(const float* x, float* xp) const {
    std::fill(xp, xp + padded_size(), 0.0f);
    const int p = g.opts.padding;
    for (int c = 0; c < g.in_c; ++c)
      for (int y = 0; y < g.in_h; ++y) {
        const float* src = x + (static_cast<std::size_t>(c) * g.in_h + y) * g.in_w;
        std::copy(src, src + g.in_w, xp + c * plane + static_cast<std::size_t>(y + p) * pad_w + p);
      }
  }

  // Kernel taps regrouped as k*k matrices of (out_c, in_c).
  std::vector<float> taps(const float* w) const {
    const int kk = g.k * g.k;
    std::vector<float> out(static_cast<std::size_t>(kk) * g.out_c * g.in_c);
    for (int t = 0; t < kk; ++t)
      for (int co = 0; co < g.out_c; ++co)
        for (int ci = 0; ci < g.in_c; ++ci)
          out[(static_cast<std::size_t>(t) * g.out_c + co) * g.in_c + ci] =
              w[(static_cast<std::size_t>(co) * g.in_c + ci) * kk + t];
    return out;
  }

  void forward(const float* xp, const std::vector<float>& tap, float* out) const {
    std::vector<float> wide(static_cast<std::size_t>(g.out_c) * span, 0.0f);
    StridedMap om(wide.data(), g.out_c, static_cast<Eigen::Index>(span), Eigen::OuterStride<>(span));
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const ConstStridedMap xm(xp + offset(ky, kx), g.in_c, static_cast<Eigen::Index>(span),
                                 Eigen::OuterStride<>(plane));
        const ConstMatMap wm(tap.data() + static_cast<std::size_t>(ky * g.k + kx) * g.out_c * g.in_c, g.out_c,
                             g.in_c);
        om.noalias() += wm * xm;
      }
    for (int c = 0; c < g.out_c; ++c)
      for (int y = 0; y < g.out_h; ++y) {
        const float* src = wide.data() + c * span + static_cast<std::size_t>(y) * pad_w;
        std::copy(src, src + g.out_w, out + (static_cast<std::size_t>(c) * g.out_h + y) * g.out_w);
      }
  }

  // dout on the padded pitch with zeros in the discarded columns.
  std::vector<float> widen(const float* dout) const {
    std::vector<float> wide(static_cast<std::size_t>(g.out_c) * span, 0.0f);
    for (int c = 0; c < g.out_c; ++c)
      for (int y = 0; y < g.out_h; ++y) {
        const float* src = dout + (static_cast<std::size_t>(c) * g.out_h + y) * g.out_w;
        std::copy(src, src + g.out_w, wide.data() + c * span + static_cast<std::size_t>(y) * pad_w);
      }
    return wide;
  }

  void backward_weight(const float* xp, const std::vector<float>& wide, float* dw) const {
    const ConstStridedMap dm(wide.data(), g.out_c, static_cast<Eigen::Index>(span), Eigen::OuterStride<>(span));
    const int kk = g.k * g.k;
    RowMat dtap(g.out_c, g.in_c);
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const ConstStridedMap xm(xp + offset(ky, kx), g.in_c, static_cast<Eigen::Index>(span),
                                 Eigen::OuterStride<>(plane));
        dtap.noalias() = dm * xm.transpose();
        const int t = ky * g.k + kx;
        for (int co = 0; co < g.out_c; ++co)
          for (int ci = 0; ci < g.in_c; ++ci)
            dw[(static_cast<std::size_t>(co) * g.in_c + ci) * kk + t] += dtap(co, ci);
      }
  }

  void backward_input(const std::vector<float>& tap, const std::vector<float>& wide, float* dx) const {
    std::vector<float> dxp(padded_size(), 0.0f);
    const ConstStridedMap dm(wide.data(), g.out_c, static_cast<Eigen::Index>(span), Eigen::OuterStride<>(span));
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        StridedMap xm(dxp.data() + offset(ky, kx), g.in_c, static_cast<Eigen::Index>(span),
                      Eigen::OuterStride<>(plane));
        const ConstMatMap wm(tap.data() + static_cast<std::size_t>(ky * g.k + kx) * g.out_c * g.in_c, g.out_c,
                             g.in_c);
        xm.noalias() += wm.transpose() * dm;
      }
    const int p = g.opts.padding;
    for (int c = 0; c < g.in_c; ++c)
      for (int y = 0; y < g.in_h; ++y) {
        const float* src = dxp.data() + c * plane + static_cast<std::size_t>(y + p) * pad_w + p;
        float* dst = dx + (static_cast<std::size_t>(c) * g.in_h + y) * g.in_w;
        for (int x = 0; x < g.in_w; ++x) dst[x] += src[x];
      }
  }
};

void add_bias(float* out, const float* b, int channels, std::size_t pixels) {
  for (int c = 0; c < channels; ++c) {
    float* row = out + static_cast<std::size_t>(c) * pixels;
    for (std::size_t i = 0; i < pixels; ++i) row[i] += b[c];
  }
}

Var conv2d_shifted(Tape& tape, Var x, Var weight, Var bias, const ConvGeometry& g) {
  const ShiftedConv sc(g);
  const int batch = tape.value(x).shape().n;
  const std::size_t in_size = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
  const std::size_t out_size = static_cast<std::size_t>(g.out_c) * g.out_pixels();
  const bool keep = tape.requires_grad(weight);
  std::vector<float> padded(sc.padded_size() * batch);
  const std::vector<float> tap = sc.taps(tape.value(weight).ptr());
  Tensor out({batch, g.out_c, g.out_h, g.out_w});
  for (int n = 0; n < batch; ++n) {
    float* xp = padded.data() + sc.padded_size() * n;
    sc.pad(tape.value(x).ptr() + in_size * n, xp);
    sc.forward(xp, tap, out.ptr() + out_size * n);
    if (bias.valid()) add_bias(out.ptr() + out_size * n, tape.value(bias).ptr(), g.out_c, g.out_pixels());
  }
  if (!keep) padded.clear();
  return tape.record(
      std::move(out), {x, weight, bias.valid() ? bias : x},
      [x, weight, bias, sc, tap, in_size, out_size, padded = std::move(padded)](Tape& t, std::span<const float> up) {
        const int batch = t.value(x).shape().n;
        const bool want_w = t.requires_grad(weight);
        const bool want_b = bias.valid() && t.requires_grad(bias);
        const bool want_x = t.requires_grad(x);
        for (int n = 0; n < batch; ++n) {
          const float* dout = up.data() + out_size * n;
          if (want_b) {
            float* db = t.grad(bias).data();
            for (int c = 0; c < sc.g.out_c; ++c) {
              double acc = 0.0;
              for (int i = 0; i < sc.g.out_pixels(); ++i) acc += dout[static_cast<std::size_t>(c) * sc.g.out_pixels() + i];
              db[c] += static_cast<float>(acc);
            }
          }
          if (!want_w && !want_x) continue;
          const std::vector<float> wide = sc.widen(dout);
          if (want_w) sc.backward_weight(padded.data() + sc.padded_size() * n, wide, t.grad(weight).data());
          if (want_x) sc.backward_input(tap, wide, t.grad(x).data() + in_size * n);
        }
      });
}

}  // namespace


Var conv2d(Tape& tape, Var x, Var weight, Var bias, Conv2dOptions opts) {
  const Shape xs = tape.value(x).shape();
  const Shape ws = tape.value(weight).shape();
  require(ws.h == ws.w && ws.h % 2 == 1, "conv2d kernel must be square with odd extent, got " + ws.str());
  require(ws.c == xs.c, "conv2d input has " + std::to_string(xs.c) + " channels, kernel expects " +
                            std::to_string(ws.c));
  require(opts.stride >= 1 && opts.dilation >= 1 && opts.padding >= 0, "conv2d invalid options");
  const bool has_bias = bias.valid();
  if (has_bias) {
    require(tape.value(bias).numel() == static_cast<std::size_t>(ws.n), "conv2d bias extent mismatch");
  }
  ConvGeometry g{xs.c, xs.h, xs.w, ws.n, 0, 0, ws.h, opts};
  g.out_h = conv_output_extent(xs.h, g.k, opts);
  g.out_w = conv_output_extent(xs.w, g.k, opts);
  require(g.out_h >= 1 && g.out_w >= 1, "conv2d input " + xs.str() + " too small for kernel");
  if (opts.stride == 1) return conv2d_shifted(tape, x, weight, bias, g);

  const std::size_t col_size = static_cast<std::size_t>(g.patch_rows()) * g.out_pixels();
  const bool keep_cols = tape.requires_grad(weight);
  std::vector<float> all_cols(keep_cols ? col_size * xs.n : 0);
  std::vector<float> scratch(keep_cols ? 0 : col_size);

  Tensor out({xs.n, g.out_c, g.out_h, g.out_w});
  const ConstMatMap w_mat(tape.value(weight).ptr(), g.out_c, g.patch_rows());
  for (int n = 0; n < xs.n; ++n) {
    float* cols = keep_cols ? all_cols.data() + col_size * n : scratch.data();
    im2col(tape.value(x).ptr() + static_cast<std::size_t>(n) * xs.c * xs.h * xs.w, g, cols);
    const ConstMatMap col_mat(cols, g.patch_rows(), g.out_pixels());
    MatMap o(out.ptr() + static_cast<std::size_t>(n) * g.out_c * g.out_pixels(), g.out_c,
             g.out_pixels());
    o.noalias() = w_mat * col_mat;
    if (has_bias) add_bias(o.data(), tape.value(bias).ptr(), g.out_c, static_cast<std::size_t>(g.out_pixels()));
  }

  return tape.record(
      std::move(out), {x, weight, bias.valid() ? bias : x},
      [x, weight, bias, g, col_size, cols = std::move(all_cols)](Tape& t, std::span<const float> up) {
        const int batch = t.value(x).shape().n;
        const std::size_t in_size = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
        const ConstMatMap w_mat(t.value(weight).ptr(), g.out_c, g.patch_rows());
        const bool want_w = t.requires_grad(weight);
        const bool want_b = bias.valid() && t.requires_grad(bias);
        const bool want_x = t.requires_grad(x);
        std::vector<float> dcols(want_x ? col_size : 0);
        for (int n = 0; n < batch; ++n) {
          const ConstMatMap dout(up.data() + static_cast<std::size_t>(n) * g.out_c * g.out_pixels(),
                                 g.out_c, g.out_pixels());
          if (want_w) {
            const ConstMatMap col_mat(cols.data() + col_size * n, g.patch_rows(), g.out_pixels());
            MatMap dw(t.grad(weight).data(), g.out_c, g.patch_rows());
            dw.noalias() += dout * col_mat.transpose();
          }
          if (want_b) {
            float* db = t.grad(bias).data();
            // Fixed summation order: Eigen's vectorised sum depends on pointer alignment.
            for (int co = 0; co < g.out_c; ++co) {
              double acc = 0.0;
              for (int i = 0; i < g.out_pixels(); ++i) acc += dout(co, i);
              db[co] += static_cast<float>(acc);
            }
          }
          if (want_x) {
            MatMap dc(dcols.data(), g.patch_rows(), g.out_pixels());
            dc.noalias() = w_mat.transpose() * dout;
            col2im_add(dcols.data(), g, t.grad(x).data() + in_size * n);
          }
        }
      });
}

Var relu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return tape.record(std::move(out), {x}, [x](Tape& t, std::span<const float> up) {
    const auto in = t.value(x).data();
    auto dx = t.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (in[i] > 0.0f) dx[i] += up[i];
    }
  });
}

Var sigmoid(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) v = 1.0f / (1.0f + std::exp(-v));
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), {x}, [x, self](Tape& t, std::span<const float> up) {
    const auto y = t.value(Var{self}).data();
    auto dx = t.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i] * y[i] * (1.0f - y[i]);
  });
}

Var tanh(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) v = std::tanh(v);
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), {x}, [x, self](Tape& t, std::span<const float> up) {
    const auto y = t.value(Var{self}).data();
    auto dx = t.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i] * (1.0f - y[i] * y[i]);
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  require(va.shape() == vb.shape(),
          "add shape mismatch " + va.shape().str() + " vs " + vb.shape().str());
  Tensor out = va;
  const auto bd = vb.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const float> up) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      auto d = t.grad(v);
      for (std::size_t i = 0; i < up.size(); ++i) d[i] += up[i];
    }
  });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  require(va.shape() == vb.shape(),
          "mul shape mismatch " + va.shape().str() + " vs " + vb.shape().str());
  Tensor out = va;
  const auto bd = vb.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const float> up) {
    if (t.requires_grad(a)) {
      const auto other = t.value(b).data();
      auto d = t.grad(a);
      for (std::size_t i = 0; i < up.size(); ++i) d[i] += up[i] * other[i];
    }
    if (t.requires_grad(b)) {
      const auto other = t.value(a).data();
      auto d = t.grad(b);
      for (std::size_t i = 0; i < up.size(); ++i) d[i] += up[i] * other[i];
    }
  });
}

Var scale(Tape& tape, Var x, float s) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) v *= s;
  return tape.record(std::move(out), {x}, [x, s](Tape& t, std::span<const float> up) {
    auto dx = t.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i] * s;
  });
}

Var sum(Tape& tape, Var x) {
  const Tensor& v = tape.value(x);
  double acc = 0.0;
  for (float e : v.data()) acc += e;
  return tape.record(Tensor::scalar(static_cast<float>(acc)), {x}, [x](Tape& t, std::span<const float> up) {
    for (float& g : t.grad(x)) g += up[0];
  });
}

Var mse(Tape& tape, Var a, Var b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  require(va.shape() == vb.shape(),
          "mse shape mismatch " + va.shape().str() + " vs " + vb.shape().str());
  require(va.numel() > 0, "mse of empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < va.numel(); ++i) {
    const double d = static_cast<double>(va[i]) - vb[i];
    acc += d * d;
  }
  const auto n = static_cast<double>(va.numel());
  return tape.record(Tensor::scalar(static_cast<float>(acc / n)), {a, b},
                     [a, b, n](Tape& t, std::span<const float> up) {
                       const auto av = t.value(a).data();
                       const auto bv = t.value(b).data();
                       const float k = static_cast<float>(2.0 / n) * up[0];
                       if (t.requires_grad(a)) {
                         auto d = t.grad(a);
                         for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * (av[i] - bv[i]);
                       }
                       if (t.requires_grad(b)) {
                         auto d = t.grad(b);
                         for (std::size_t i = 0; i < d.size(); ++i) d[i] -= k * (av[i] - bv[i]);
                       }
                     });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Shape xs = tape.value(x).shape();
  const Shape ws = tape.value(weight).shape();
  const int in = xs.c * xs.h * xs.w;
  require(ws.c * ws.h * ws.w == in,
          "linear weight " + ws.str() + " does not match input features " + std::to_string(in));
  const int out_f = ws.n;
  if (bias.valid()) {
    require(tape.value(bias).numel() == static_cast<std::size_t>(out_f), "linear bias extent mismatch");
  }
  Tensor out({xs.n, out_f, 1, 1});
  const ConstMatMap xm(tape.value(x).ptr(), xs.n, in);
  const ConstMatMap wm(tape.value(weight).ptr(), out_f, in);
  MatMap om(out.ptr(), xs.n, out_f);
  om.noalias() = xm * wm.transpose();
  if (bias.valid()) {
    const float* b = tape.value(bias).ptr();
    for (int r = 0; r < xs.n; ++r)
      for (int o = 0; o < out_f; ++o) om(r, o) += b[o];
  }
  return tape.record(
      std::move(out), {x, weight, bias.valid() ? bias : x},
      [x, weight, bias, in, out_f](Tape& t, std::span<const float> up) {
        const int batch = t.value(x).shape().n;
        const ConstMatMap dout(up.data(), batch, out_f);
        if (t.requires_grad(weight)) {
          const ConstMatMap xm(t.value(x).ptr(), batch, in);
          MatMap dw(t.grad(weight).data(), out_f, in);
          dw.noalias() += dout.transpose() * xm;
        }
        if (bias.valid() && t.requires_grad(bias)) {
          auto db = t.grad(bias);
          for (int r = 0; r < batch; ++r)
            for (int o = 0; o < out_f; ++o) db[o] += dout(r, o);
        }
        if (t.requires_grad(x)) {
          const ConstMatMap wm(t.value(weight).ptr(), out_f, in);
          MatMap dx(t.grad(x).data(), batch, in);
          dx.noalias() += dout * wm;
        }
      });
}

Var global_avg_pool(Tape& tape, Var x) {
  const Shape s = tape.value(x).shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  require(plane > 0, "global_avg_pool of empty spatial extent");
  Tensor out({s.n, s.c, 1, 1});
  const float* in = tape.value(x).ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j) acc += in[i * plane + j];
    out[i] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return tape.record(std::move(out), {x}, [x, plane](Tape& t, std::span<const float> up) {
    auto dx = t.grad(x);
    const float inv = 1.0f / static_cast<float>(plane);
    for (std::size_t i = 0; i < up.size(); ++i) {
      const float g = up[i] * inv;
      for (std::size_t j = 0; j < plane; ++j) dx[i * plane + j] += g;
    }
  });
}

Var avg_pool2(Tape& tape, Var x) {
  const Shape s = tape.value(x).shape();
  const int oh = s.h / 2, ow = s.w / 2;
  require(oh >= 1 && ow >= 1, "avg_pool2 input " + s.str() + " too small");
  Tensor out({s.n, s.c, oh, ow});
  const Tensor& in = tape.value(x);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          out.at(n, c, y, xx) = 0.25f * (in.at(n, c, 2 * y, 2 * xx) + in.at(n, c, 2 * y, 2 * xx + 1) +
                                         in.at(n, c, 2 * y + 1, 2 * xx) +
                                         in.at(n, c, 2 * y + 1, 2 * xx + 1));
        }
  return tape.record(std::move(out), {x}, [x, s, oh, ow](Tape& t, std::span<const float> up) {
    auto dx = t.grad(x);
    auto idx = [&](int n, int c, int y, int xx) {
      return ((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + xx;
    };
    std::size_t k = 0;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx, ++k) {
            const float g = 0.25f * up[k];
            dx[idx(n, c, 2 * y, 2 * xx)] += g;
            dx[idx(n, c, 2 * y, 2 * xx + 1)] += g;
            dx[idx(n, c, 2 * y + 1, 2 * xx)] += g;
            dx[idx(n, c, 2 * y + 1, 2 * xx + 1)] += g;
          }
  });
}

namespace {

void check_vector_batch(const Shape& s, const char* op) {
  require(s.h == 1 && s.w == 1 && s.c >= 1,
          std::string(op) + " expects (n, m, 1, 1) logits, got " + s.str());
}

}  // namespace

Var softmax(Tape& tape, Var logits) {
  const Shape s = tape.value(logits).shape();
  check_vector_batch(s, "softmax");
  Tensor out(s);
  const float* in = tape.value(logits).ptr();
  for (int n = 0; n < s.n; ++n) {
    const float* row = in + static_cast<std::size_t>(n) * s.c;
    float* o = out.ptr() + static_cast<std::size_t>(n) * s.c;
    const float mx = *std::max_element(row, row + s.c);
    double total = 0.0;
    for (int c = 0; c < s.c; ++c) total += std::exp(static_cast<double>(row[c]) - mx);
    for (int c = 0; c < s.c; ++c)
      o[c] = static_cast<float>(std::exp(static_cast<double>(row[c]) - mx) / total);
  }
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), {logits}, [logits, self, s](Tape& t, std::span<const float> up) {
    const float* y = t.value(Var{self}).ptr();
    auto dx = t.grad(logits);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = static_cast<std::size_t>(n) * s.c;
      double dot = 0.0;
      for (int c = 0; c < s.c; ++c) dot += static_cast<double>(up[off + c]) * y[off + c];
      for (int c = 0; c < s.c; ++c)
        dx[off + c] += y[off + c] * (up[off + c] - static_cast<float>(dot));
    }
  });
}

Var log_softmax(Tape& tape, Var logits) {
  const Shape s = tape.value(logits).shape();
  check_vector_batch(s, "log_softmax");
  Tensor out(s);
  const float* in = tape.value(logits).ptr();
  for (int n = 0; n < s.n; ++n) {
    const float* row = in + static_cast<std::size_t>(n) * s.c;
    float* o = out.ptr() + static_cast<std::size_t>(n) * s.c;
    const float mx = *std::max_element(row, row + s.c);
    double total = 0.0;
    for (int c = 0; c < s.c; ++c) total += std::exp(static_cast<double>(row[c]) - mx);
    const double lse = mx + std::log(total);
    for (int c = 0; c < s.c; ++c) o[c] = static_cast<float>(row[c] - lse);
  }
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), {logits}, [logits, self, s](Tape& t, std::span<const float> up) {
    const float* y = t.value(Var{self}).ptr();
    auto dx = t.grad(logits);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = static_cast<std::size_t>(n) * s.c;
      double total = 0.0;
      for (int c = 0; c < s.c; ++c) total += up[off + c];
      for (int c = 0; c < s.c; ++c)
        dx[off + c] += up[off + c] - std::exp(y[off + c]) * static_cast<float>(total);
    }
  });
}

Var slice_channels(Tape& tape, Var x, int start, int count) {
  const Shape s = tape.value(x).shape();
  require(start >= 0 && count >= 1 && start + count <= s.c,
          "slice_channels [" + std::to_string(start) + ", +" + std::to_string(count) +
              ") out of range for " + s.str());
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor out({s.n, count, s.h, s.w});
  const float* in = tape.value(x).ptr();
  for (int n = 0; n < s.n; ++n) {
    const float* src = in + (static_cast<std::size_t>(n) * s.c + start) * plane;
    std::copy(src, src + count * plane, out.ptr() + static_cast<std::size_t>(n) * count * plane);
  }
  return tape.record(std::move(out), {x}, [x, s, start, count, plane](Tape& t, std::span<const float> up) {
    auto dx = t.grad(x);
    for (int n = 0; n < s.n; ++n) {
      float* dst = dx.data() + (static_cast<std::size_t>(n) * s.c + start) * plane;
      const float* src = up.data() + static_cast<std::size_t>(n) * count * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

Var pick(Tape& tape, Var x, int n, int c) {
  const Tensor& v = tape.value(x);
  const Shape s = v.shape();
  require(n >= 0 && n < s.n && c >= 0 && c < s.c, "pick index out of range for " + s.str());
  const std::size_t idx = (static_cast<std::size_t>(n) * s.c + c) * s.h * s.w;
  return tape.record(Tensor::scalar(v[idx]), {x}, [x, idx](Tape& t, std::span<const float> up) {
    t.grad(x)[idx] += up[0];
  });
}

LstmState lstm_step(Tape& tape, Var x, LstmState state, const LstmWeights& weights) {
  const Shape hs = tape.value(state.h).shape();
  const int hidden = hs.c;
  require(tape.value(state.c).shape() == hs, "lstm_step cell/hidden shape mismatch");
  require(tape.value(weights.w_ih).shape().n == 4 * hidden &&
              tape.value(weights.w_hh).shape().n == 4 * hidden,
          "lstm_step gate weights must produce 4*hidden outputs");
  const Var gates = add(tape, linear(tape, x, weights.w_ih, weights.bias),
                        linear(tape, state.h, weights.w_hh, Var{}));
  const Var in_gate = sigmoid(tape, slice_channels(tape, gates, 0, hidden));
  const Var forget_gate = sigmoid(tape, slice_channels(tape, gates, hidden, hidden));
  const Var candidate = tanh(tape, slice_channels(tape, gates, 2 * hidden, hidden));
  const Var out_gate = sigmoid(tape, slice_channels(tape, gates, 3 * hidden, hidden));
  const Var c_next = add(tape, mul(tape, forget_gate, state.c), mul(tape, in_gate, candidate));
  const Var h_next = mul(tape, out_gate, tanh(tape, c_next));
  return {h_next, c_next};
}

}  // namespace pathroute::nn
