// dfsign/dfconv.hpp

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

// Divide-and-focus convolution: a feature map is cut horizontally into an
// upper (non-manual) region and a lower (manual) region. The two regions have
// their own weights; the lower region is further cut into N_m bands that all
// share the lower weights. Every region and band is padded on its own, so no
// window ever crosses a seam.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dfsign/ops.hpp"
#include "dfsign/tensor.hpp"

namespace dfsign {

struct DivisionSpec {
  double ratio = 0.35;     // h_u / h
  std::size_t groups = 2;  // N_m
  /// Clamp h_u into the feasible range instead of failing. Used when the
  /// ratio is moved at inference time.
  bool clamp = false;

  /// h_u = floor(ratio * h), checked (or clamped) so that the upper region has
  /// at least `min_upper` rows and the lower region at least `min_lower`.
  std::size_t upper_rows(std::size_t h, std::size_t min_upper = 1, std::size_t min_lower = 1) const {
    min_upper = std::max<std::size_t>(min_upper, 1);
    min_lower = std::max<std::size_t>(min_lower, 1);
    const double raw = std::floor(ratio * double(h) + 1e-9);
    long hu = long(raw);
    if (clamp && h >= min_upper + min_lower)
      hu = std::clamp<long>(hu, long(min_upper), long(h - min_lower));
    if (hu < long(min_upper) || long(h) - hu < long(min_lower))
      throw DivisionError("division ratio " + std::to_string(ratio) + " on height " +
                          std::to_string(h) + " gives upper " + std::to_string(hu) + " / lower " +
                          std::to_string(long(h) - hu) + " rows; need at least " +
                          std::to_string(min_upper) + " / " + std::to_string(min_lower));
    return std::size_t(hu);
  }
};

template <std::floating_point Real>
struct RegionSplit {
  BasicTensor<Real> upper;
  BasicTensor<Real> lower;
};

/// Rows [0, h_u) and [h_u, H) of a [C, H, W] map. `min_rows` is the smallest
/// admissible region height (the kernel height for a convolution).
template <std::floating_point Real>
RegionSplit<Real> split_regions(const BasicTensor<Real>& feat, const DivisionSpec& spec,
                                std::size_t min_rows = 1) {
  feat.require_rank(3, "split_regions");
  const std::size_t h = feat.dim(1);
  const std::size_t hu = spec.upper_rows(h, min_rows, min_rows);
  return {slice_rows(feat, 0, hu), slice_rows(feat, hu, h)};
}

/// Band heights for `rows` lower rows in `groups` bands; the first
/// rows % groups bands get one extra row.
inline std::vector<std::size_t> band_heights(std::size_t rows, std::size_t groups,
                                             std::size_t min_rows = 1) {
  if (groups == 0) throw DivisionError("lower-region group count must be positive");
  if (rows < groups * std::max<std::size_t>(min_rows, 1))
    throw DivisionError("cannot cut " + std::to_string(rows) + " rows into " +
                        std::to_string(groups) + " bands of at least " + std::to_string(min_rows) +
                        " rows");
  std::vector<std::size_t> hs(groups, rows / groups);
  for (std::size_t i = 0; i < rows % groups; ++i) ++hs[i];
  return hs;
}

template <std::floating_point Real>
std::vector<BasicTensor<Real>> subdivide_lower(const BasicTensor<Real>& lower, std::size_t groups,
                                               std::size_t min_rows = 1) {
  lower.require_rank(3, "subdivide_lower");
  std::vector<BasicTensor<Real>> bands;
  std::size_t row = 0;
  for (auto h : band_heights(lower.dim(1), groups, min_rows)) {
    bands.push_back(slice_rows(lower, row, row + h));
    row += h;
  }
  return bands;
}

template <std::floating_point Real>
struct DFConvParams {
  Conv2DParams<Real> upper;
  Conv2DParams<Real> lower;  // one weight set shared by every lower band
  DivisionSpec spec;
};

template <std::floating_point Real>
struct DFConvGrads {
  BasicTensor<Real> input;
  Conv2DGrads<Real> upper;  // .input unused
  Conv2DGrads<Real> lower;  // summed over bands
};

namespace detail {

struct DFConvLayout {
  std::size_t upper_rows = 0;
  std::vector<std::size_t> bands;
};

template <std::floating_point Real>
DFConvLayout dfconv_layout(const BasicTensor<Real>& input, const DFConvParams<Real>& p) {
  input.require_rank(3, "dfconv");
  const std::size_t kh = std::max(p.upper.kernel_h(), p.lower.kernel_h());
  const std::size_t g = p.spec.groups;
  if (g == 0) throw DivisionError("lower-region group count must be positive");
  DFConvLayout l;
  l.upper_rows = p.spec.upper_rows(input.dim(1), kh, g * kh);
  l.bands = band_heights(input.dim(1) - l.upper_rows, g, kh);
  return l;
}

}  // namespace detail

template <std::floating_point Real>
BasicTensor<Real> dfconv_forward(const BasicTensor<Real>& input, const DFConvParams<Real>& p) {
  const auto layout = detail::dfconv_layout(input, p);
  std::vector<BasicTensor<Real>> outs;
  outs.reserve(layout.bands.size() + 1);
  outs.push_back(conv2d(slice_rows(input, 0, layout.upper_rows), p.upper));
  std::size_t row = layout.upper_rows;
  for (auto h : layout.bands) {
    outs.push_back(conv2d(slice_rows(input, row, row + h), p.lower));
    row += h;
  }
  return concat_rows<Real>(outs);
}

template <std::floating_point Real>
DFConvGrads<Real> dfconv_backward(const BasicTensor<Real>& input, const DFConvParams<Real>& p,
                                  const BasicTensor<Real>& grad_out, bool need_input = true) {
  const auto layout = detail::dfconv_layout(input, p);
  const std::size_t w = input.dim(2);
  grad_out.require_rank(3, "dfconv_backward grad_out");

  DFConvGrads<Real> g;
  if (need_input) g.input = BasicTensor<Real>(input.shape());
  std::size_t in_row = 0, out_row = 0;
  auto region = [&](std::size_t rows, const Conv2DParams<Real>& cp) {
    auto x = slice_rows(input, in_row, in_row + rows);
    const auto oh = cp.output_size(rows, w).y;
    if (out_row + oh > grad_out.dim(1))
      throw ShapeError("dfconv_backward: grad_out " + shape_str(grad_out.shape()) +
                       " shorter than the layer output");
    auto rg = conv2d_backward(x, cp, slice_rows(grad_out, out_row, out_row + oh), need_input);
    if (need_input) add_rows(g.input, rg.input, in_row);
    in_row += rows;
    out_row += oh;
    return rg;
  };
  g.upper = region(layout.upper_rows, p.upper);
  g.upper.input = {};
  for (std::size_t b = 0; b < layout.bands.size(); ++b) {
    auto rg = region(layout.bands[b], p.lower);
    if (b == 0) {
      g.lower.weights = std::move(rg.weights);
      g.lower.bias = std::move(rg.bias);
    } else {
      g.lower.weights += rg.weights;
      g.lower.bias += rg.bias;
    }
  }
  if (out_row != grad_out.dim(1))
    throw ShapeError("dfconv_backward: grad_out " + shape_str(grad_out.shape()) +
                     " does not match the layer output height " + std::to_string(out_row));
  return g;
}

// ---------------------------------------------------------------------------
// Multi-cue embedding

template <std::floating_point Real>
struct MultiCueVectors {
  BasicTensor<Real> full;
  BasicTensor<Real> nonmanual;
  BasicTensor<Real> manual;
};

/// Full map plus its upper and lower regions.
template <std::floating_point Real>
struct CueMaps {
  BasicTensor<Real> full;
  BasicTensor<Real> nonmanual;
  BasicTensor<Real> manual;
};

/// Splits a stage-3 map into the three cue maps. Regions need two rows for
/// the 2x2 max pool of the embedding.
template <std::floating_point Real>
CueMaps<Real> cue_maps(const BasicTensor<Real>& stage3, const DivisionSpec& spec) {
  auto s = split_regions(stage3, spec, 2);
  return {stage3, std::move(s.upper), std::move(s.lower)};
}

/// Undivided maps for a plain backbone: every cue path sees the whole map.
template <std::floating_point Real>
CueMaps<Real> whole_cue_maps(const BasicTensor<Real>& stage3) {
  return {stage3, stage3, stage3};
}

template <std::floating_point Real>
struct MultiCueParams {
  Conv2DParams<Real> full1;
  Conv2DParams<Real> full2;
  Conv2DParams<Real> nonmanual;
  Conv2DParams<Real> manual;
};

/// Intermediates of one embedding path: conv(+relu) chain, 2x2 max pool,
/// global average pool.
template <std::floating_point Real>
struct CuePathTrace {
  std::vector<BasicTensor<Real>> conv_in;   // input of each conv
  std::vector<BasicTensor<Real>> conv_out;  // pre-activation output of each conv
  PoolResult<Real> pooled;
  BasicTensor<Real> vec;
};

template <std::floating_point Real>
struct MultiCueTrace {
  CuePathTrace<Real> full, nonmanual, manual;
  MultiCueVectors<Real> vectors() const { return {full.vec, nonmanual.vec, manual.vec}; }
};

namespace detail {

template <std::floating_point Real>
CuePathTrace<Real> cue_path(BasicTensor<Real> x, std::initializer_list<const Conv2DParams<Real>*> convs) {
  CuePathTrace<Real> t;
  for (const auto* c : convs) {
    t.conv_in.push_back(x);
    t.conv_out.push_back(conv2d(x, *c));
    x = relu(t.conv_out.back());
  }
  t.pooled = maxpool2d(x, 2);
  t.vec = global_avgpool(t.pooled.output);
  return t;
}

template <std::floating_point Real>
BasicTensor<Real> cue_path_backward(const CuePathTrace<Real>& t,
                                    std::initializer_list<const Conv2DParams<Real>*> convs,
                                    std::vector<Conv2DGrads<Real>*> pgrads,
                                    const BasicTensor<Real>& grad_vec) {
  auto g = global_avgpool_backward(t.pooled.output.shape(), grad_vec);
  g = maxpool2d_backward(t.conv_out.back().shape(), t.pooled.argmax, g);
  std::vector<const Conv2DParams<Real>*> cs(convs);
  for (std::size_t i = cs.size(); i-- > 0;) {
    g = relu_backward(t.conv_out[i], std::move(g));
    auto cg = conv2d_backward(t.conv_in[i], *cs[i], g);
    g = std::move(cg.input);
    cg.input = {};
    *pgrads[i] = std::move(cg);
  }
  return g;
}

}  // namespace detail

/// full: conv-relu-conv-relu-maxpool-avgpool; non-manual and manual:
/// conv-relu-maxpool-avgpool.
template <std::floating_point Real>
MultiCueTrace<Real> multi_cue_trace(const CueMaps<Real>& maps, const MultiCueParams<Real>& p) {
  if (p.full2.out_channels() != p.nonmanual.out_channels() ||
      p.full2.out_channels() != p.manual.out_channels())
    throw ShapeError("multi-cue embedding: cue dimensions differ");
  return {detail::cue_path(maps.full, {&p.full1, &p.full2}),
          detail::cue_path(maps.nonmanual, {&p.nonmanual}),
          detail::cue_path(maps.manual, {&p.manual})};
}

template <std::floating_point Real>
MultiCueVectors<Real> multi_cue_embed(const CueMaps<Real>& maps, const MultiCueParams<Real>& p) {
  return multi_cue_trace(maps, p).vectors();
}

template <std::floating_point Real>
struct MultiCueGrads {
  CueMaps<Real> maps;  // gradients of the three input maps
  Conv2DGrads<Real> full1, full2, nonmanual, manual;
};

template <std::floating_point Real>
MultiCueGrads<Real> multi_cue_backward(const MultiCueTrace<Real>& t, const MultiCueParams<Real>& p,
                                       const MultiCueVectors<Real>& grad) {
  MultiCueGrads<Real> g;
  g.maps.full = detail::cue_path_backward(t.full, {&p.full1, &p.full2}, {&g.full1, &g.full2}, grad.full);
  g.maps.nonmanual = detail::cue_path_backward(t.nonmanual, {&p.nonmanual}, {&g.nonmanual}, grad.nonmanual);
  g.maps.manual = detail::cue_path_backward(t.manual, {&p.manual}, {&g.manual}, grad.manual);
  return g;
}

/// Folds cue-map gradients back onto the stage-3 map they were cut from.
template <std::floating_point Real>
BasicTensor<Real> merge_cue_grads(const CueMaps<Real>& g) {
  BasicTensor<Real> out = g.full;
  add_rows(out, g.nonmanual, 0);
  add_rows(out, g.manual, g.nonmanual.dim(1));
  return out;
}

/// Adjoint of whole_cue_maps.
template <std::floating_point Real>
BasicTensor<Real> merge_whole_cue_grads(const CueMaps<Real>& g) {
  BasicTensor<Real> out = g.full;
  out += g.nonmanual;
  out += g.manual;
  return out;
}

}  // namespace dfsign
