// dfsign/ops.hpp

// Copyright 2026 The dfsign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Layer kernels with explicit backward passes. Every function is a pure
// function of its arguments.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dfsign/tensor.hpp"

namespace dfsign {

struct Pair {
  std::size_t y = 1, x = 1;
  friend bool operator==(const Pair&, const Pair&) = default;
};

template <std::floating_point Real>
struct Conv2DParams {
  BasicTensor<Real> weights;  // [C_out, C_in, kH, kW]
  BasicTensor<Real> bias;     // [C_out]
  Pair stride{1, 1};
  Pair padding{0, 0};

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel_h() const { return weights.dim(2); }
  std::size_t kernel_w() const { return weights.dim(3); }

  /// Output spatial size for an H x W input; throws if not strictly positive.
  Pair output_size(std::size_t h, std::size_t w) const {
    const auto kh = kernel_h(), kw = kernel_w();
    if (h + 2 * padding.y < kh || w + 2 * padding.x < kw || stride.y == 0 || stride.x == 0)
      throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                       " does not fit input " + std::to_string(h) + "x" + std::to_string(w) +
                       " with padding " + std::to_string(padding.y) + "x" +
                       std::to_string(padding.x));
    return {(h + 2 * padding.y - kh) / stride.y + 1, (w + 2 * padding.x - kw) / stride.x + 1};
  }

  void validate() const {
    weights.require_rank(4, "conv2d weights");
    bias.require_shape({out_channels()}, "conv2d bias");
  }
};

template <std::floating_point Real>
struct Conv2DGrads {
  BasicTensor<Real> input;  // empty when not requested
  BasicTensor<Real> weights;
  BasicTensor<Real> bias;
};

namespace detail {

template <std::floating_point Real>
void check_conv2d_input(const BasicTensor<Real>& input, const Conv2DParams<Real>& p) {
  p.validate();
  if (input.rank() != 3 || input.dim(0) != p.in_channels())
    throw ShapeError("conv2d: expected input [" + std::to_string(p.in_channels()) +
                     ",H,W], got " + shape_str(input.shape()));
}

}  // namespace detail

namespace detail {

/// Output columns [ox0, ox1) whose tap kx lands inside a row of width w.
inline std::pair<long, long> valid_columns(std::size_t kx, long px, long sx, std::size_t w, std::size_t ow) {
  long ox0 = 0, ox1 = long(ow);
  while (ox0 < ox1 && ox0 * sx + long(kx) - px < 0) ++ox0;
  while (ox1 > ox0 && (ox1 - 1) * sx + long(kx) - px >= long(w)) --ox1;
  return {ox0, ox1};
}

/// Patch matrix [C_in*kh*kw, oh*ow]; rows follow (c_in, ky, kx) row-major
/// order and out-of-range taps are zero.
template <std::floating_point Real>
std::vector<Real> im2col(const BasicTensor<Real>& input, const Conv2DParams<Real>& p, std::size_t oh,
                         std::size_t ow) {
  const std::size_t ci_n = p.in_channels(), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = p.kernel_h(), kw = p.kernel_w(), n = oh * ow;
  const long py = long(p.padding.y), px = long(p.padding.x);
  const long sy = long(p.stride.y), sx = long(p.stride.x);
  std::vector<Real> col(ci_n * kh * kw * n, Real(0));
  const Real* in = input.storage().data();
  for (std::size_t ci = 0; ci < ci_n; ++ci)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const auto [ox0, ox1] = valid_columns(kx, px, sx, w, ow);
        Real* row = col.data() + ((ci * kh + ky) * kw + kx) * n;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = long(oy) * sy + long(ky) - py;
          if (iy < 0 || iy >= long(h)) continue;
          const Real* irow = in + (ci * h + std::size_t(iy)) * w;
          Real* dst = row + oy * ow;
          if (sx == 1)
            std::copy(irow + (ox0 + long(kx) - px), irow + (ox1 + long(kx) - px), dst + ox0);
          else
            for (long ox = ox0; ox < ox1; ++ox) dst[ox] = irow[ox * sx + long(kx) - px];
        }
      }
  return col;
}

/// Adjoint of im2col: scatters a patch-matrix gradient back onto the map.
template <std::floating_point Real>
void col2im(const std::vector<Real>& col, const Conv2DParams<Real>& p, std::size_t oh, std::size_t ow,
            BasicTensor<Real>& grad) {
  const std::size_t ci_n = p.in_channels(), h = grad.dim(1), w = grad.dim(2);
  const std::size_t kh = p.kernel_h(), kw = p.kernel_w(), n = oh * ow;
  const long py = long(p.padding.y), px = long(p.padding.x);
  const long sy = long(p.stride.y), sx = long(p.stride.x);
  Real* g = grad.storage().data();
  for (std::size_t ci = 0; ci < ci_n; ++ci)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const auto [ox0, ox1] = valid_columns(kx, px, sx, w, ow);
        const Real* row = col.data() + ((ci * kh + ky) * kw + kx) * n;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = long(oy) * sy + long(ky) - py;
          if (iy < 0 || iy >= long(h)) continue;
          Real* grow = g + (ci * h + std::size_t(iy)) * w;
          const Real* src = row + oy * ow;
          for (long ox = ox0; ox < ox1; ++ox) grow[ox * sx + long(kx) - px] += src[ox];
        }
      }
}

}  // namespace detail

/// Cross-correlation of a [C_in, H, W] map. The accumulation order for every
/// output element is bias, then (c_in, ky, kx) in row-major order.
template <std::floating_point Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& input, const Conv2DParams<Real>& p) {
  detail::check_conv2d_input(input, p);
  const std::size_t co_n = p.out_channels();
  const std::size_t k_n = p.in_channels() * p.kernel_h() * p.kernel_w();
  const auto [oh, ow] = p.output_size(input.dim(1), input.dim(2));
  const std::size_t n = oh * ow;
  const auto col = detail::im2col(input, p, oh, ow);
  BasicTensor<Real> out({co_n, oh, ow});
  const Real* wt = p.weights.storage().data();
  Real* o = out.storage().data();
  for (std::size_t co = 0; co < co_n; ++co) {
    Real* oc = o + co * n;
    std::fill_n(oc, n, p.bias[co]);
    const Real* wr = wt + co * k_n;
    std::size_t k = 0;
    for (; k + 4 <= k_n; k += 4) {
      const Real w0 = wr[k], w1 = wr[k + 1], w2 = wr[k + 2], w3 = wr[k + 3];
      const Real *c0 = col.data() + k * n, *c1 = c0 + n, *c2 = c1 + n, *c3 = c2 + n;
      for (std::size_t i = 0; i < n; ++i) oc[i] = (((oc[i] + w0 * c0[i]) + w1 * c1[i]) + w2 * c2[i]) + w3 * c3[i];
    }
    for (; k < k_n; ++k) {
      const Real wv = wr[k];
      const Real* c = col.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) oc[i] += wv * c[i];
    }
  }
  return out;
}

/// Gradients of conv2d. The input gradient is skipped when `need_input` is
/// false (first layer of a network).
template <std::floating_point Real>
Conv2DGrads<Real> conv2d_backward(const BasicTensor<Real>& input, const Conv2DParams<Real>& p,
                                  const BasicTensor<Real>& grad_out, bool need_input = true) {
  detail::check_conv2d_input(input, p);
  const std::size_t co_n = p.out_channels();
  const std::size_t k_n = p.in_channels() * p.kernel_h() * p.kernel_w();
  const auto [oh, ow] = p.output_size(input.dim(1), input.dim(2));
  const std::size_t n = oh * ow;
  grad_out.require_shape({co_n, oh, ow}, "conv2d_backward grad_out");

  Conv2DGrads<Real> g;
  g.weights = BasicTensor<Real>(p.weights.shape());
  g.bias = BasicTensor<Real>(p.bias.shape());
  const auto col = detail::im2col(input, p, oh, ow);
  const Real* wt = p.weights.storage().data();
  const Real* go = grad_out.storage().data();
  Real* gw = g.weights.storage().data();
  std::vector<Real> gcol(need_input ? k_n * n : 0, Real(0));

  for (std::size_t co = 0; co < co_n; ++co) {
    const Real* gc = go + co * n;
    Real bsum = 0;
#pragma omp simd reduction(+ : bsum)
    for (std::size_t i = 0; i < n; ++i) bsum += gc[i];
    g.bias[co] = bsum;
    for (std::size_t k = 0; k < k_n; ++k) {
      const Real* c = col.data() + k * n;
      Real acc = 0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < n; ++i) acc += gc[i] * c[i];
      gw[co * k_n + k] = acc;
    }
  }
  if (need_input) {
    for (std::size_t k = 0; k < k_n; ++k) {
      Real* d = gcol.data() + k * n;
      std::size_t co = 0;
      for (; co + 4 <= co_n; co += 4) {
        const Real w0 = wt[co * k_n + k], w1 = wt[(co + 1) * k_n + k], w2 = wt[(co + 2) * k_n + k],
                   w3 = wt[(co + 3) * k_n + k];
        const Real *g0 = go + co * n, *g1 = g0 + n, *g2 = g1 + n, *g3 = g2 + n;
        for (std::size_t i = 0; i < n; ++i) d[i] = (((d[i] + w0 * g0[i]) + w1 * g1[i]) + w2 * g2[i]) + w3 * g3[i];
      }
      for (; co < co_n; ++co) {
        const Real wv = wt[co * k_n + k];
        const Real* g0 = go + co * n;
        for (std::size_t i = 0; i < n; ++i) d[i] += wv * g0[i];
      }
    }
    g.input = BasicTensor<Real>(input.shape());
    detail::col2im(gcol, p, oh, ow, g.input);
  }
  return g;
}

template <std::floating_point Real>
struct Conv1DParams {
  BasicTensor<Real> weights;  // [C_out, C_in, k]
  BasicTensor<Real> bias;     // [C_out]
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel() const { return weights.dim(2); }

  std::size_t output_length(std::size_t t) const {
    if (t + 2 * padding < kernel() || stride == 0)
      throw ShapeError("conv1d: kernel " + std::to_string(kernel()) + " does not fit length " +
                       std::to_string(t) + " with padding " + std::to_string(padding));
    return (t + 2 * padding - kernel()) / stride + 1;
  }
};

template <std::floating_point Real>
struct Conv1DGrads {
  BasicTensor<Real> input;
  BasicTensor<Real> weights;
  BasicTensor<Real> bias;
};

namespace detail {

// conv1d is conv2d over a height-1 map.
template <std::floating_point Real>
Conv2DParams<Real> as_conv2d(const Conv1DParams<Real>& p) {
  p.weights.require_rank(3, "conv1d weights");
  p.bias.require_shape({p.out_channels()}, "conv1d bias");
  return {p.weights.reshaped({p.out_channels(), p.in_channels(), 1, p.kernel()}), p.bias,
          {1, p.stride}, {0, p.padding}};
}

template <std::floating_point Real>
void check_conv1d_input(const BasicTensor<Real>& input, const Conv1DParams<Real>& p) {
  if (input.rank() != 2 || input.dim(0) != p.in_channels())
    throw ShapeError("conv1d: expected input [" + std::to_string(p.in_channels()) +
                     ",T], got " + shape_str(input.shape()));
}

}  // namespace detail

/// Temporal convolution of a [C_in, T] sequence.
template <std::floating_point Real>
BasicTensor<Real> conv1d(const BasicTensor<Real>& input, const Conv1DParams<Real>& p) {
  auto p2 = detail::as_conv2d(p);
  detail::check_conv1d_input(input, p);
  const std::size_t t = input.dim(1);
  auto out = conv2d(input.reshaped({input.dim(0), 1, t}), p2);
  return out.reshaped({out.dim(0), out.dim(2)});
}

template <std::floating_point Real>
Conv1DGrads<Real> conv1d_backward(const BasicTensor<Real>& input, const Conv1DParams<Real>& p,
                                  const BasicTensor<Real>& grad_out, bool need_input = true) {
  auto p2 = detail::as_conv2d(p);
  detail::check_conv1d_input(input, p);
  grad_out.require_rank(2, "conv1d_backward grad_out");
  auto g = conv2d_backward(input.reshaped({input.dim(0), 1, input.dim(1)}), p2,
                           grad_out.reshaped({grad_out.dim(0), 1, grad_out.dim(1)}), need_input);
  Conv1DGrads<Real> r;
  if (need_input) r.input = g.input.reshaped(input.shape());
  r.weights = g.weights.reshaped(p.weights.shape());
  r.bias = std::move(g.bias);
  return r;
}

template <std::floating_point Real>
struct PoolResult {
  BasicTensor<Real> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Non-overlapping k x k max pooling of a [C, H, W] map; trailing rows and
/// columns that do not fill a window are dropped. Ties go to the first
/// element of the window in row-major order.
template <std::floating_point Real>
PoolResult<Real> maxpool2d(const BasicTensor<Real>& input, std::size_t k = 2) {
  input.require_rank(3, "maxpool2d");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (k == 0 || h < k || w < k)
    throw ShapeError("maxpool2d: input " + shape_str(input.shape()) + " smaller than kernel " +
                     std::to_string(k) + "x" + std::to_string(k));
  const std::size_t oh = h / k, ow = w / k;
  PoolResult<Real> r{BasicTensor<Real>({c, oh, ow}), std::vector<std::size_t>(c * oh * ow)};
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (ch * h + oy * k) * w + ox * k;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t idx = (ch * h + oy * k + dy) * w + ox * k + dx;
            if (input[idx] > input[best]) best = idx;
          }
        const std::size_t o = (ch * oh + oy) * ow + ox;
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
  return r;
}

template <std::floating_point Real>
BasicTensor<Real> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                     const BasicTensor<Real>& grad_out) {
  if (grad_out.size() != argmax.size())
    throw ShapeError("maxpool2d_backward: grad_out " + shape_str(grad_out.shape()) +
                     " does not match pooled size " + std::to_string(argmax.size()));
  BasicTensor<Real> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

/// Per-channel mean of a [C, H, W] map.
template <std::floating_point Real>
BasicTensor<Real> global_avgpool(const BasicTensor<Real>& input) {
  input.require_rank(3, "global_avgpool");
  const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
  BasicTensor<Real> out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += input[ch * hw + i];
    out[ch] = s / Real(hw);
  }
  return out;
}

template <std::floating_point Real>
BasicTensor<Real> global_avgpool_backward(const Shape& input_shape, const BasicTensor<Real>& grad_out) {
  if (input_shape.size() != 3) throw ShapeError("global_avgpool_backward: rank-3 input expected");
  grad_out.require_shape({input_shape[0]}, "global_avgpool_backward grad_out");
  const std::size_t hw = input_shape[1] * input_shape[2];
  BasicTensor<Real> g(input_shape);
  for (std::size_t ch = 0; ch < input_shape[0]; ++ch)
    std::fill_n(&g.storage()[ch * hw], hw, grad_out[ch] / Real(hw));
  return g;
}

template <std::floating_point Real>
struct AffineParams {
  BasicTensor<Real> weights;  // [D_out, D_in]
  BasicTensor<Real> bias;     // [D_out]

  std::size_t out_dim() const { return weights.dim(0); }
  std::size_t in_dim() const { return weights.dim(1); }
};

template <std::floating_point Real>
struct AffineGrads {
  BasicTensor<Real> input;
  BasicTensor<Real> weights;
  BasicTensor<Real> bias;
};

/// Row-wise affine map: [N, D_in] -> [N, D_out]. A rank-1 input is a single row.
template <std::floating_point Real>
BasicTensor<Real> affine(const BasicTensor<Real>& input, const AffineParams<Real>& p) {
  p.weights.require_rank(2, "affine weights");
  p.bias.require_shape({p.out_dim()}, "affine bias");
  const bool vec = input.rank() == 1;
  const std::size_t n = vec ? 1 : input.dim(0);
  const std::size_t din = p.in_dim(), dout = p.out_dim();
  if ((input.rank() != 1 && input.rank() != 2) || input.shape().back() != din)
    throw ShapeError("affine: expected input [..," + std::to_string(din) + "], got " +
                     shape_str(input.shape()));
  BasicTensor<Real> out(vec ? Shape{dout} : Shape{n, dout});
  for (std::size_t r = 0; r < n; ++r) {
    const Real* x = &input.storage()[r * din];
    for (std::size_t o = 0; o < dout; ++o) {
      const Real* wr = &p.weights.storage()[o * din];
      Real s = p.bias[o];
      for (std::size_t i = 0; i < din; ++i) s += wr[i] * x[i];
      out[r * dout + o] = s;
    }
  }
  return out;
}

template <std::floating_point Real>
AffineGrads<Real> affine_backward(const BasicTensor<Real>& input, const AffineParams<Real>& p,
                                  const BasicTensor<Real>& grad_out) {
  const bool vec = input.rank() == 1;
  const std::size_t n = vec ? 1 : input.dim(0);
  const std::size_t din = p.in_dim(), dout = p.out_dim();
  grad_out.require_shape(vec ? Shape{dout} : Shape{n, dout}, "affine_backward grad_out");
  AffineGrads<Real> g{BasicTensor<Real>(input.shape()), BasicTensor<Real>(p.weights.shape()),
                      BasicTensor<Real>(p.bias.shape())};
  for (std::size_t r = 0; r < n; ++r) {
    const Real* x = &input.storage()[r * din];
    Real* gx = &g.input.storage()[r * din];
    for (std::size_t o = 0; o < dout; ++o) {
      const Real go = grad_out[r * dout + o];
      g.bias[o] += go;
      const Real* wr = &p.weights.storage()[o * din];
      Real* gw = &g.weights.storage()[o * din];
      for (std::size_t i = 0; i < din; ++i) {
        gw[i] += go * x[i];
        gx[i] += go * wr[i];
      }
    }
  }
  return g;
}

template <std::floating_point Real>
BasicTensor<Real> relu(BasicTensor<Real> x) {
  for (auto& v : x.storage()) v = v > Real(0) ? v : Real(0);
  return x;
}

/// Gradient of relu given its input.
template <std::floating_point Real>
BasicTensor<Real> relu_backward(const BasicTensor<Real>& input, BasicTensor<Real> grad_out) {
  grad_out.require_shape(input.shape(), "relu_backward");
  for (std::size_t i = 0; i < input.size(); ++i)
    if (!(input[i] > Real(0))) grad_out[i] = 0;
  return grad_out;
}

template <std::floating_point Real>
BasicTensor<Real> sigmoid(BasicTensor<Real> x) {
  for (auto& v : x.storage())
    v = v >= 0 ? Real(1) / (Real(1) + std::exp(-v)) : std::exp(v) / (Real(1) + std::exp(v));
  return x;
}

/// Gradient of sigmoid given its output.
template <std::floating_point Real>
BasicTensor<Real> sigmoid_backward(const BasicTensor<Real>& output, BasicTensor<Real> grad_out) {
  grad_out.require_shape(output.shape(), "sigmoid_backward");
  for (std::size_t i = 0; i < output.size(); ++i)
    grad_out[i] *= output[i] * (Real(1) - output[i]);
  return grad_out;
}

template <std::floating_point Real>
BasicTensor<Real> tanh(BasicTensor<Real> x) {
  for (auto& v : x.storage()) v = std::tanh(v);
  return x;
}

/// Gradient of tanh given its output.
template <std::floating_point Real>
BasicTensor<Real> tanh_backward(const BasicTensor<Real>& output, BasicTensor<Real> grad_out) {
  grad_out.require_shape(output.shape(), "tanh_backward");
  for (std::size_t i = 0; i < output.size(); ++i) grad_out[i] *= Real(1) - output[i] * output[i];
  return grad_out;
}

/// Log-softmax over the last axis of a [K] or [N, K] tensor, stabilised by
/// subtracting the row maximum. Accumulates in double.
template <std::floating_point Real>
BasicTensor<Real> log_softmax(const BasicTensor<Real>& logits) {
  if (logits.rank() != 1 && logits.rank() != 2)
    throw ShapeError("log_softmax: expected [K] or [N,K], got " + shape_str(logits.shape()));
  const std::size_t k = logits.shape().back(), n = logits.size() / k;
  BasicTensor<Real> out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const Real* x = &logits.storage()[r * k];
    const double m = *std::max_element(x, x + k);
    double s = 0;
    for (std::size_t i = 0; i < k; ++i) s += std::exp(double(x[i]) - m);
    const double lse = m + std::log(s);
    for (std::size_t i = 0; i < k; ++i) out[r * k + i] = Real(double(x[i]) - lse);
  }
  return out;
}

/// Gradient of log_softmax given its output: g - softmax * sum(g) per row.
template <std::floating_point Real>
BasicTensor<Real> log_softmax_backward(const BasicTensor<Real>& output, const BasicTensor<Real>& grad_out) {
  grad_out.require_shape(output.shape(), "log_softmax_backward");
  const std::size_t k = output.shape().back(), n = output.size() / k;
  BasicTensor<Real> g(output.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (std::size_t i = 0; i < k; ++i) s += grad_out[r * k + i];
    for (std::size_t i = 0; i < k; ++i)
      g[r * k + i] = Real(double(grad_out[r * k + i]) - std::exp(double(output[r * k + i])) * s);
  }
  return g;
}

}  // namespace dfsign
