// dfsign/temporal.hpp

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

// Temporal layers. Sequences are [T, C] (frame-major); conv1d works on the
// transposed [C, T] layout internally.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dfsign/ops.hpp"
#include "dfsign/tensor.hpp"

namespace dfsign {

/// Length after one temporal pooling step.
inline constexpr std::size_t pooled_length(std::size_t t) { return (t + 1) / 2; }

template <std::floating_point Real>
struct TemporalPool {
  BasicTensor<Real> out;        // [ceil(T/2), C]
  std::vector<std::size_t> src;  // source frame per output element
};

/// Max over frame pairs (2t, 2t+1); an odd final frame is paired with
/// itself. Ties go to the earlier frame.
template <std::floating_point Real>
TemporalPool<Real> temporal_maxpool(const BasicTensor<Real>& seq) {
  seq.require_rank(2, "temporal_maxpool");
  const std::size_t T = seq.dim(0), C = seq.dim(1), P = pooled_length(T);
  TemporalPool<Real> r{BasicTensor<Real>({P, C}), std::vector<std::size_t>(P * C)};
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t a = 2 * p, b = std::min(2 * p + 1, T - 1);
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t s = seq.at(b, c) > seq.at(a, c) ? b : a;
      r.out.at(p, c) = seq.at(s, c);
      r.src[p * C + c] = s;
    }
  }
  return r;
}

template <std::floating_point Real>
BasicTensor<Real> temporal_maxpool_backward(const Shape& in_shape, const TemporalPool<Real>& pool,
                                            const BasicTensor<Real>& grad_out) {
  grad_out.require_shape(pool.out.shape(), "temporal_maxpool_backward");
  const std::size_t C = in_shape[1];
  BasicTensor<Real> g(in_shape);
  for (std::size_t i = 0; i < pool.src.size(); ++i) g.at(pool.src[i], i % C) += grad_out[i];
  return g;
}

// ---------------------------------------------------------------------------
// Bottleneck-based temporal attention

template <std::floating_point Real>
struct BtaParams {
  Conv1DParams<Real> att1;  // C -> A
  Conv1DParams<Real> att2;  // A -> 1
  AffineParams<Real> head;  // C -> V+1, bottleneck classifier
};

template <std::floating_point Real>
struct BtaTrace {
  BasicTensor<Real> input;      // [T, C]
  BasicTensor<Real> input_ct;   // [C, T]
  BasicTensor<Real> hidden;     // att1 pre-activation [A, T]
  BasicTensor<Real> attention;  // [1, T], values in [0, 1]
  BasicTensor<Real> gated;      // [T, C]
  TemporalPool<Real> pool;
  BasicTensor<Real> bottleneck_logits;  // log-probs [ceil(T/2), V+1]

  const BasicTensor<Real>& out() const { return pool.out; }
};

/// Attention a = sigmoid(conv1d(relu(conv1d(x)))) per frame, gated features
/// a * x, temporal max-pool, and a log-softmax head on the pooled features.
template <std::floating_point Real>
BtaTrace<Real> bta(const BasicTensor<Real>& seq, const BtaParams<Real>& p) {
  seq.require_rank(2, "bta");
  if (seq.dim(0) < 2) throw LengthError("bta: sequence of length " + std::to_string(seq.dim(0)) + " < 2");
  BtaTrace<Real> t;
  t.input = seq;
  t.input_ct = transpose2d(seq);
  t.hidden = conv1d(t.input_ct, p.att1);
  t.attention = sigmoid(conv1d(relu(t.hidden), p.att2));
  t.attention.require_shape({1, seq.dim(0)}, "bta attention");
  t.gated = seq;
  for (std::size_t f = 0; f < seq.dim(0); ++f)
    for (std::size_t c = 0; c < seq.dim(1); ++c) t.gated.at(f, c) *= t.attention[f];
  t.pool = temporal_maxpool(t.gated);
  t.bottleneck_logits = log_softmax(affine(t.pool.out, p.head));
  return t;
}

template <std::floating_point Real>
struct BtaGrads {
  BasicTensor<Real> input;
  Conv1DGrads<Real> att1, att2;
  AffineGrads<Real> head;
};

/// grad_out: gradient of the pooled features; grad_logits: gradient of the
/// bottleneck log-probs (may be empty).
template <std::floating_point Real>
BtaGrads<Real> bta_backward(const BtaTrace<Real>& t, const BtaParams<Real>& p,
                            BasicTensor<Real> grad_out, const BasicTensor<Real>& grad_logits) {
  BtaGrads<Real> g;
  if (!grad_logits.empty()) {
    auto gz = log_softmax_backward(t.bottleneck_logits, grad_logits);
    g.head = affine_backward(t.pool.out, p.head, gz);
    grad_out += g.head.input;
    g.head.input = {};
  } else {
    g.head = {{}, BasicTensor<Real>(p.head.weights.shape()), BasicTensor<Real>(p.head.bias.shape())};
  }
  auto g_gated = temporal_maxpool_backward(t.gated.shape(), t.pool, grad_out);
  const std::size_t T = t.input.dim(0), C = t.input.dim(1);
  g.input = BasicTensor<Real>({T, C});
  BasicTensor<Real> g_att({1, T});
  for (std::size_t f = 0; f < T; ++f) {
    Real s = 0;
    for (std::size_t c = 0; c < C; ++c) {
      g.input.at(f, c) = g_gated.at(f, c) * t.attention[f];
      s += g_gated.at(f, c) * t.input.at(f, c);
    }
    g_att[f] = s;
  }
  auto g_z2 = sigmoid_backward(t.attention, g_att);
  g.att2 = conv1d_backward(relu(t.hidden), p.att2, g_z2);
  auto g_h = relu_backward(t.hidden, std::move(g.att2.input));
  g.att2.input = {};
  g.att1 = conv1d_backward(t.input_ct, p.att1, g_h);
  g.input += transpose2d(g.att1.input);
  g.att1.input = {};
  return g;
}

// ---------------------------------------------------------------------------
// Temporal multi-cue block

/// [T, K, D] cue sequence -> [D, T] channels of cue k.
template <std::floating_point Real>
BasicTensor<Real> cue_channels(const BasicTensor<Real>& cues, std::size_t k) {
  const std::size_t T = cues.dim(0), D = cues.dim(2);
  BasicTensor<Real> out({D, T});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) out.at(d, t) = cues.at(t, k, d);
  return out;
}

template <std::floating_point Real>
struct TmcParams {
  std::vector<Conv1DParams<Real>> intra;  // one per cue, D_in -> D_h
  Conv1DParams<Real> inter;               // K*D_in (+ previous inter width) -> C_h
};

template <std::floating_point Real>
struct TmcTrace {
  std::vector<BasicTensor<Real>> intra_in;   // [D_in, T] per cue
  std::vector<BasicTensor<Real>> intra_pre;  // [D_h, T] per cue, pre-relu
  BasicTensor<Real> inter_in;                // [K*D_in (+C_prev), T]
  BasicTensor<Real> inter_pre;               // [C_h, T]
  BasicTensor<Real> intra;                   // [T, K, D_h]
  BasicTensor<Real> inter;                   // [T, C_h]
};

/// Intra-cue path: a separate conv1d per cue. Inter-cue path: conv1d over
/// all cue channels stacked (cue-major), followed by the previous block's
/// inter-cue output when one is given. Both paths end in relu.
template <std::floating_point Real>
TmcTrace<Real> tmc_block(const BasicTensor<Real>& cues, const TmcParams<Real>& p,
                         const BasicTensor<Real>* prev_inter = nullptr) {
  cues.require_rank(3, "tmc_block cues");
  const std::size_t T = cues.dim(0), K = cues.dim(1);
  if (p.intra.size() != K)
    throw ShapeError("tmc_block: " + std::to_string(p.intra.size()) + " intra convs for " +
                     std::to_string(K) + " cues");
  TmcTrace<Real> tr;
  std::vector<BasicTensor<Real>> stacked;
  for (std::size_t k = 0; k < K; ++k) {
    tr.intra_in.push_back(cue_channels(cues, k));
    tr.intra_pre.push_back(conv1d(tr.intra_in.back(), p.intra[k]));
    stacked.push_back(tr.intra_in.back());
  }
  if (prev_inter) {
    if (prev_inter->rank() != 2 || prev_inter->dim(0) != T)
      throw ShapeError("tmc_block: previous inter output " + shape_str(prev_inter->shape()) +
                       " does not match length " + std::to_string(T));
    stacked.push_back(transpose2d(*prev_inter));
  }
  tr.inter_in = concat0<Real>(stacked);
  tr.inter_pre = conv1d(tr.inter_in, p.inter);
  const std::size_t Dh = tr.intra_pre[0].dim(0);
  const std::size_t To = tr.intra_pre[0].dim(1);
  tr.intra = BasicTensor<Real>({To, K, Dh});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t d = 0; d < Dh; ++d)
      for (std::size_t t = 0; t < To; ++t) tr.intra.at(t, k, d) = std::max(Real(0), tr.intra_pre[k].at(d, t));
  tr.inter = transpose2d(relu(tr.inter_pre));
  return tr;
}

template <std::floating_point Real>
struct TmcGrads {
  BasicTensor<Real> cues;        // [T, K, D_in]
  BasicTensor<Real> prev_inter;  // [T, C_prev], empty without a previous block
  std::vector<Conv1DGrads<Real>> intra;
  Conv1DGrads<Real> inter;
};

template <std::floating_point Real>
TmcGrads<Real> tmc_backward(const TmcTrace<Real>& tr, const TmcParams<Real>& p,
                            const BasicTensor<Real>& grad_intra, const BasicTensor<Real>& grad_inter) {
  const std::size_t K = tr.intra_in.size(), D = tr.intra_in[0].dim(0), T = tr.intra_in[0].dim(1);
  const std::size_t Dh = tr.intra.dim(2), To = tr.intra.dim(0);
  TmcGrads<Real> g;
  g.cues = BasicTensor<Real>({T, K, D});
  for (std::size_t k = 0; k < K; ++k) {
    BasicTensor<Real> gk({Dh, To});
    if (!grad_intra.empty())
      for (std::size_t d = 0; d < Dh; ++d)
        for (std::size_t t = 0; t < To; ++t) gk.at(d, t) = grad_intra.at(t, k, d);
    gk = relu_backward(tr.intra_pre[k], std::move(gk));
    auto cg = conv1d_backward(tr.intra_in[k], p.intra[k], gk);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < T; ++t) g.cues.at(t, k, d) += cg.input.at(d, t);
    cg.input = {};
    g.intra.push_back(std::move(cg));
  }
  BasicTensor<Real> gi(tr.inter_pre.shape());
  if (!grad_inter.empty()) gi = transpose2d(grad_inter);
  gi = relu_backward(tr.inter_pre, std::move(gi));
  g.inter = conv1d_backward(tr.inter_in, p.inter, gi);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < T; ++t) g.cues.at(t, k, d) += g.inter.input.at(k * D + d, t);
  const std::size_t extra = tr.inter_in.dim(0) - K * D;
  if (extra > 0) {
    g.prev_inter = BasicTensor<Real>({T, extra});
    for (std::size_t c = 0; c < extra; ++c)
      for (std::size_t t = 0; t < T; ++t) g.prev_inter.at(t, c) = g.inter.input.at(K * D + c, t);
  }
  g.inter.input = {};
  return g;
}

// ---------------------------------------------------------------------------
// Bidirectional recurrent layer

template <std::floating_point Real>
struct RnnDirection {
  BasicTensor<Real> wx;    // [H, C]
  BasicTensor<Real> wh;    // [H, H]
  BasicTensor<Real> bias;  // [H]
};

template <std::floating_point Real>
struct BiRnnParams {
  RnnDirection<Real> fwd, bwd;
};

template <std::floating_point Real>
struct BiRnnTrace {
  BasicTensor<Real> input;  // [T, C]
  BasicTensor<Real> hf;     // [T, H]
  BasicTensor<Real> hb;     // [T, H]
  BasicTensor<Real> out;    // [T, 2H]
};

namespace detail {

template <std::floating_point Real>
BasicTensor<Real> rnn_pass(const BasicTensor<Real>& x, const RnnDirection<Real>& p, bool reverse) {
  const std::size_t T = x.dim(0), C = x.dim(1), H = p.wx.dim(0);
  p.wx.require_shape({H, C}, "birnn input weights");
  p.wh.require_shape({H, H}, "birnn recurrent weights");
  p.bias.require_shape({H}, "birnn bias");
  BasicTensor<Real> h({T, H});
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    const bool has_prev = step > 0;
    const std::size_t tp = reverse ? t + 1 : t - 1;
    for (std::size_t i = 0; i < H; ++i) {
      Real s = p.bias[i];
      for (std::size_t c = 0; c < C; ++c) s += p.wx.at(i, c) * x.at(t, c);
      if (has_prev)
        for (std::size_t j = 0; j < H; ++j) s += p.wh.at(i, j) * h.at(tp, j);
      h.at(t, i) = std::tanh(s);
    }
  }
  return h;
}

template <std::floating_point Real>
void rnn_pass_backward(const BasicTensor<Real>& x, const RnnDirection<Real>& p, bool reverse,
                       const BasicTensor<Real>& h, const BasicTensor<Real>& grad_h,
                       BasicTensor<Real>& grad_x, RnnDirection<Real>& g) {
  const std::size_t T = x.dim(0), C = x.dim(1), H = h.dim(1);
  g = {BasicTensor<Real>({H, C}), BasicTensor<Real>({H, H}), BasicTensor<Real>({H})};
  std::vector<Real> carry(H, Real(0)), gz(H);
  for (std::size_t step = T; step-- > 0;) {
    const std::size_t t = reverse ? T - 1 - step : step;
    const bool has_prev = step > 0;
    const std::size_t tp = reverse ? t + 1 : t - 1;
    for (std::size_t i = 0; i < H; ++i) {
      const Real gh = grad_h.at(t, i) + carry[i];
      gz[i] = gh * (Real(1) - h.at(t, i) * h.at(t, i));
    }
    std::fill(carry.begin(), carry.end(), Real(0));
    for (std::size_t i = 0; i < H; ++i) {
      g.bias[i] += gz[i];
      for (std::size_t c = 0; c < C; ++c) {
        g.wx.at(i, c) += gz[i] * x.at(t, c);
        grad_x.at(t, c) += gz[i] * p.wx.at(i, c);
      }
      if (has_prev)
        for (std::size_t j = 0; j < H; ++j) {
          g.wh.at(i, j) += gz[i] * h.at(tp, j);
          carry[j] += gz[i] * p.wh.at(i, j);
        }
    }
  }
}

}  // namespace detail

/// Forward and backward tanh recurrences from a zero state; per-frame
/// output is [h_fwd, h_bwd].
template <std::floating_point Real>
BiRnnTrace<Real> birnn(const BasicTensor<Real>& seq, const BiRnnParams<Real>& p) {
  seq.require_rank(2, "birnn");
  BiRnnTrace<Real> tr{seq, detail::rnn_pass(seq, p.fwd, false), detail::rnn_pass(seq, p.bwd, true), {}};
  const std::size_t T = seq.dim(0), H = tr.hf.dim(1);
  tr.out = BasicTensor<Real>({T, 2 * H});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < H; ++i) {
      tr.out.at(t, i) = tr.hf.at(t, i);
      tr.out.at(t, H + i) = tr.hb.at(t, i);
    }
  return tr;
}

template <std::floating_point Real>
struct BiRnnGrads {
  BasicTensor<Real> input;
  BiRnnParams<Real> params;
};

template <std::floating_point Real>
BiRnnGrads<Real> birnn_backward(const BiRnnTrace<Real>& tr, const BiRnnParams<Real>& p,
                                const BasicTensor<Real>& grad_out) {
  const std::size_t T = tr.input.dim(0), H = tr.hf.dim(1);
  grad_out.require_shape({T, 2 * H}, "birnn_backward grad_out");
  BasicTensor<Real> gf({T, H}), gb({T, H});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < H; ++i) {
      gf.at(t, i) = grad_out.at(t, i);
      gb.at(t, i) = grad_out.at(t, H + i);
    }
  BiRnnGrads<Real> g;
  g.input = BasicTensor<Real>(tr.input.shape());
  detail::rnn_pass_backward(tr.input, p.fwd, false, tr.hf, gf, g.input, g.params.fwd);
  detail::rnn_pass_backward(tr.input, p.bwd, true, tr.hb, gb, g.input, g.params.bwd);
  return g;
}

// ---------------------------------------------------------------------------

/// Per-frame affine map followed by log-softmax: [T, D] -> [T, V+1].
template <std::floating_point Real>
BasicTensor<Real> classify(const BasicTensor<Real>& seq, const AffineParams<Real>& p) {
  seq.require_rank(2, "classify");
  return log_softmax(affine(seq, p));
}

/// Gradient of classify given its input, output log-probs and output grad.
template <std::floating_point Real>
AffineGrads<Real> classify_backward(const BasicTensor<Real>& seq, const AffineParams<Real>& p,
                                    const BasicTensor<Real>& logprobs, const BasicTensor<Real>& grad) {
  return affine_backward(seq, p, log_softmax_backward(logprobs, grad));
}

}  // namespace dfsign
