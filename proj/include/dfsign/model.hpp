// dfsign/model.hpp

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

// The recognition network:
//
//   frames [T,3,H,W]
//     -> spatial stages (DFConv or plain conv, relu, 2x2 max pool) per frame
//     -> multi-cue embedding: full / non-manual / manual vectors  [T,3,D]
//        (a plain backbone feeds the whole map to all three)
//     -> BTA (attention gate + temporal max pool) or plain pool   [T',3D]
//     -> TMC blocks: intra-cue [T',3,Dh] and inter-cue [T',Ch] paths
//     -> inter-cue path: bidirectional recurrence -> classifier  (L_inter)
//                        latent head                             (L_refine)
//     -> intra-cue path: one classifier per cue                  (L_intra)
//     -> BTA bottleneck head                                      (L_bta)
//
// with T' = ceil(T/2).

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dfsign/dfconv.hpp"
#include "dfsign/ops.hpp"
#include "dfsign/random.hpp"
#include "dfsign/temporal.hpp"
#include "dfsign/tensor.hpp"

namespace dfsign {

inline constexpr std::size_t kNumCues = 3;  // full, non-manual, manual

struct ModelConfig {
  std::size_t vocab = 10;  // V; the blank is class V
  std::size_t in_channels = 3;
  std::size_t height = 48;
  std::size_t width = 48;
  std::vector<std::size_t> stage_channels{8, 8, 8};
  std::size_t kernel = 3;
  std::size_t cue_dim = 16;
  DivisionSpec division{0.35, 2, false};
  bool dfconv = true;
  bool bta = true;
  std::size_t bta_hidden = 16;
  std::size_t tmc_blocks = 2;
  std::size_t tmc_kernel = 5;
  std::size_t tmc_hidden = 64;  // inter-cue width
  std::size_t cue_hidden = 32;  // intra-cue width per cue
  std::size_t rnn_hidden = 32;

  std::size_t classes() const { return vocab + 1; }
  int blank() const { return int(vocab); }
};

template <std::floating_point Real>
struct ModelParams {
  std::vector<DFConvParams<Real>> stages;  // plain conv lives in .upper when dfconv is off
  MultiCueParams<Real> embed;
  BtaParams<Real> bta;  // empty tensors when BTA is off
  std::vector<TmcParams<Real>> tmc;
  BiRnnParams<Real> rnn;
  AffineParams<Real> classifier;
  AffineParams<Real> latent_head;
  std::vector<AffineParams<Real>> intra_heads;
};

/// Visits every non-empty parameter tensor of `a` with its counterpart in
/// `b` (same structure) in a fixed order: f(name, a_tensor, b_tensor).
template <class PA, class PB, class F>
void for_each_param_pair(PA& a, PB& b, F&& f) {
  auto t = [&](const std::string& name, auto& x, auto& y) {
    if (!x.empty()) f(name, x, y);
  };
  auto conv = [&](const std::string& n, auto& x, auto& y) {
    t(n + ".w", x.weights, y.weights);
    t(n + ".b", x.bias, y.bias);
  };
  for (std::size_t i = 0; i < a.stages.size(); ++i) {
    const std::string s = "stage" + std::to_string(i);
    conv(s + ".upper", a.stages[i].upper, b.stages[i].upper);
    conv(s + ".lower", a.stages[i].lower, b.stages[i].lower);
  }
  conv("embed.full1", a.embed.full1, b.embed.full1);
  conv("embed.full2", a.embed.full2, b.embed.full2);
  conv("embed.nonmanual", a.embed.nonmanual, b.embed.nonmanual);
  conv("embed.manual", a.embed.manual, b.embed.manual);
  conv("bta.att1", a.bta.att1, b.bta.att1);
  conv("bta.att2", a.bta.att2, b.bta.att2);
  conv("bta.head", a.bta.head, b.bta.head);
  for (std::size_t i = 0; i < a.tmc.size(); ++i) {
    const std::string s = "tmc" + std::to_string(i);
    for (std::size_t k = 0; k < a.tmc[i].intra.size(); ++k)
      conv(s + ".intra" + std::to_string(k), a.tmc[i].intra[k], b.tmc[i].intra[k]);
    conv(s + ".inter", a.tmc[i].inter, b.tmc[i].inter);
  }
  auto rnn = [&](const std::string& n, auto& x, auto& y) {
    t(n + ".wx", x.wx, y.wx);
    t(n + ".wh", x.wh, y.wh);
    t(n + ".b", x.bias, y.bias);
  };
  rnn("rnn.fwd", a.rnn.fwd, b.rnn.fwd);
  rnn("rnn.bwd", a.rnn.bwd, b.rnn.bwd);
  conv("classifier", a.classifier, b.classifier);
  conv("latent_head", a.latent_head, b.latent_head);
  for (std::size_t k = 0; k < a.intra_heads.size(); ++k)
    conv("intra_head" + std::to_string(k), a.intra_heads[k], b.intra_heads[k]);
}

template <class P, class F>
void for_each_param(P& p, F&& f) {
  for_each_param_pair(p, p, [&](const std::string& n, auto& x, auto&) { f(n, x); });
}

/// Zero tensors with the structure of `p`; also used as a gradient buffer.
template <std::floating_point Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& p) {
  ModelParams<Real> z = p;
  for_each_param(z, [](const std::string&, BasicTensor<Real>& t) { t.fill(Real(0)); });
  return z;
}

namespace detail {

template <std::floating_point To, std::floating_point From>
Conv2DParams<To> cast(const Conv2DParams<From>& p) {
  return {p.weights.template cast<To>(), p.bias.template cast<To>(), p.stride, p.padding};
}

template <std::floating_point To, std::floating_point From>
Conv1DParams<To> cast(const Conv1DParams<From>& p) {
  return {p.weights.template cast<To>(), p.bias.template cast<To>(), p.stride, p.padding};
}

template <std::floating_point To, std::floating_point From>
AffineParams<To> cast(const AffineParams<From>& p) {
  return {p.weights.template cast<To>(), p.bias.template cast<To>()};
}

template <std::floating_point To, std::floating_point From>
RnnDirection<To> cast(const RnnDirection<From>& p) {
  return {p.wx.template cast<To>(), p.wh.template cast<To>(), p.bias.template cast<To>()};
}

}  // namespace detail

template <std::floating_point To, std::floating_point From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  using detail::cast;
  ModelParams<To> out;
  for (const auto& s : p.stages) out.stages.push_back({cast<To>(s.upper), cast<To>(s.lower), s.spec});
  out.embed = {cast<To>(p.embed.full1), cast<To>(p.embed.full2), cast<To>(p.embed.nonmanual),
               cast<To>(p.embed.manual)};
  out.bta = {cast<To>(p.bta.att1), cast<To>(p.bta.att2), cast<To>(p.bta.head)};
  for (const auto& b : p.tmc) {
    TmcParams<To> t;
    for (const auto& c : b.intra) t.intra.push_back(cast<To>(c));
    t.inter = cast<To>(b.inter);
    out.tmc.push_back(std::move(t));
  }
  out.rnn = {cast<To>(p.rnn.fwd), cast<To>(p.rnn.bwd)};
  out.classifier = cast<To>(p.classifier);
  out.latent_head = cast<To>(p.latent_head);
  for (const auto& h : p.intra_heads) out.intra_heads.push_back(cast<To>(h));
  return out;
}

namespace detail {

template <std::floating_point Real>
BasicTensor<Real> init_uniform(Shape s, double bound, std::mt19937_64& rng) {
  BasicTensor<Real> t(std::move(s));
  for (auto& v : t.storage()) v = Real(uniform(rng, -bound, bound));
  return t;
}

template <std::floating_point Real>
Conv2DParams<Real> init_conv2d(std::size_t cin, std::size_t cout, std::size_t k, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / double(cin * k * k));
  return {init_uniform<Real>({cout, cin, k, k}, bound, rng), BasicTensor<Real>({cout}),
          {1, 1}, {k / 2, k / 2}};
}

template <std::floating_point Real>
Conv1DParams<Real> init_conv1d(std::size_t cin, std::size_t cout, std::size_t k, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / double(cin * k));
  return {init_uniform<Real>({cout, cin, k}, bound, rng), BasicTensor<Real>({cout}), 1, k / 2};
}

template <std::floating_point Real>
AffineParams<Real> init_affine(std::size_t din, std::size_t dout, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / double(din + dout));
  return {init_uniform<Real>({dout, din}, bound, rng), BasicTensor<Real>({dout})};
}

}  // namespace detail

template <std::floating_point Real>
ModelParams<Real> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.tmc_blocks == 0) throw ContractError("model needs at least one TMC block");
  if (cfg.stage_channels.empty()) throw ContractError("model needs at least one spatial stage");
  std::mt19937_64 rng(seed);
  ModelParams<Real> p;
  const std::size_t k = cfg.kernel;
  std::size_t cin = cfg.in_channels;
  for (auto cout : cfg.stage_channels) {
    DFConvParams<Real> s;
    s.spec = cfg.division;
    s.upper = detail::init_conv2d<Real>(cin, cout, k, rng);
    if (cfg.dfconv) s.lower = detail::init_conv2d<Real>(cin, cout, k, rng);
    p.stages.push_back(std::move(s));
    cin = cout;
  }
  const std::size_t D = cfg.cue_dim;
  p.embed.full1 = detail::init_conv2d<Real>(cin, D, k, rng);
  p.embed.full2 = detail::init_conv2d<Real>(D, D, k, rng);
  p.embed.nonmanual = detail::init_conv2d<Real>(cin, D, k, rng);
  p.embed.manual = detail::init_conv2d<Real>(cin, D, k, rng);
  const std::size_t C = kNumCues * D;
  if (cfg.bta) {
    p.bta.att1 = detail::init_conv1d<Real>(C, cfg.bta_hidden, 3, rng);
    p.bta.att2 = detail::init_conv1d<Real>(cfg.bta_hidden, 1, 3, rng);
    p.bta.head = detail::init_affine<Real>(C, cfg.classes(), rng);
  }
  std::size_t din = D, prev_inter = 0;
  for (std::size_t b = 0; b < cfg.tmc_blocks; ++b) {
    TmcParams<Real> t;
    for (std::size_t c = 0; c < kNumCues; ++c)
      t.intra.push_back(detail::init_conv1d<Real>(din, cfg.cue_hidden, cfg.tmc_kernel, rng));
    t.inter = detail::init_conv1d<Real>(kNumCues * din + prev_inter, cfg.tmc_hidden, cfg.tmc_kernel, rng);
    p.tmc.push_back(std::move(t));
    din = cfg.cue_hidden;
    prev_inter = cfg.tmc_hidden;
  }
  const std::size_t H = cfg.rnn_hidden, Ch = cfg.tmc_hidden;
  const double rb = 1.0 / std::sqrt(double(H));
  for (auto* dir : {&p.rnn.fwd, &p.rnn.bwd}) {
    dir->wx = detail::init_uniform<Real>({H, Ch}, rb, rng);
    dir->wh = detail::init_uniform<Real>({H, H}, rb, rng);
    dir->bias = BasicTensor<Real>({H});
  }
  p.classifier = detail::init_affine<Real>(2 * H, cfg.classes(), rng);
  p.latent_head = detail::init_affine<Real>(Ch, cfg.classes(), rng);
  const std::size_t Dh = cfg.cue_hidden;
  for (std::size_t c = 0; c < kNumCues; ++c)
    p.intra_heads.push_back(detail::init_affine<Real>(Dh, cfg.classes(), rng));
  return p;
}

template <std::floating_point Real>
struct Model {
  ModelConfig config;
  ModelParams<Real> params;

  static Model create(const ModelConfig& cfg, std::uint64_t seed) {
    return {cfg, init_params<Real>(cfg, seed)};
  }

  /// Same model with a different division (e.g. a ratio moved at inference).
  Model with_division(const DivisionSpec& d) const {
    Model m = *this;
    m.config.division = d;
    for (auto& s : m.params.stages) s.spec = d;
    return m;
  }
};

// ---------------------------------------------------------------------------
// Forward

template <std::floating_point Real>
struct StageTrace {
  BasicTensor<Real> input;
  BasicTensor<Real> pre;  // conv output before relu
  PoolResult<Real> pool;
};

template <std::floating_point Real>
struct FrameTrace {
  std::vector<StageTrace<Real>> stages;
  MultiCueTrace<Real> embed;
};

template <std::floating_point Real>
struct PipelineTrace {
  std::vector<FrameTrace<Real>> frames;
  BasicTensor<Real> cues;  // [T, 3, D]
  std::optional<BtaTrace<Real>> bta;
  TemporalPool<Real> pool;  // used when BTA is off
  std::vector<TmcTrace<Real>> tmc;
  BiRnnTrace<Real> rnn;
  std::vector<BasicTensor<Real>> intra_features;  // [T', Dh] per cue

  BasicTensor<Real> inter_logprobs;                // [T', V+1]
  std::vector<BasicTensor<Real>> intra_logprobs;  // per cue
  std::vector<BasicTensor<Real>> bta_logprobs;    // one per bottleneck head
  BasicTensor<Real> latent_logprobs;               // Q~, [T', V+1]

  std::size_t pooled_frames() const { return inter_logprobs.dim(0); }
  const BasicTensor<Real>& final_inter() const { return tmc.back().inter; }
};

namespace detail {

template <std::floating_point Real>
BasicTensor<Real> stage_conv(const BasicTensor<Real>& x, const DFConvParams<Real>& p, bool dfconv) {
  return dfconv ? dfconv_forward(x, p) : conv2d(x, p.upper);
}

template <std::floating_point Real>
FrameTrace<Real> frame_forward(const ModelConfig& cfg, const ModelParams<Real>& p, BasicTensor<Real> x) {
  FrameTrace<Real> ft;
  for (const auto& stage : p.stages) {
    StageTrace<Real> st;
    st.input = std::move(x);
    st.pre = stage_conv(st.input, stage, cfg.dfconv);
    st.pool = maxpool2d(relu(st.pre), 2);
    x = st.pool.output;
    ft.stages.push_back(std::move(st));
  }
  // the region split belongs to DFConv; a plain backbone never divides
  ft.embed = multi_cue_trace(cfg.dfconv ? cue_maps(x, cfg.division) : whole_cue_maps(x), p.embed);
  return ft;
}

}  // namespace detail

/// Runs the whole network on one video [T, C, H, W].
template <std::floating_point Real>
PipelineTrace<Real> forward_pipeline(const Model<Real>& model, const BasicTensor<Real>& video) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  video.require_rank(4, "forward_pipeline video");
  if (video.dim(1) != cfg.in_channels || video.dim(2) != cfg.height || video.dim(3) != cfg.width)
    throw ShapeError("forward_pipeline: expected frames [" + std::to_string(cfg.in_channels) + "," +
                     std::to_string(cfg.height) + "," + std::to_string(cfg.width) + "], got " +
                     shape_str(video.shape()));
  const std::size_t T = video.dim(0);
  if (T < 2) throw LengthError("forward_pipeline: video needs at least 2 frames");
  const std::size_t D = cfg.cue_dim;

  PipelineTrace<Real> tr;
  tr.cues = BasicTensor<Real>({T, kNumCues, D});
  const std::size_t frame_size = video.size() / T;
  for (std::size_t f = 0; f < T; ++f) {
    BasicTensor<Real> x({cfg.in_channels, cfg.height, cfg.width},
                        std::vector<Real>(video.storage().begin() + f * frame_size,
                                          video.storage().begin() + (f + 1) * frame_size));
    tr.frames.push_back(detail::frame_forward(cfg, p, std::move(x)));
    const auto& e = tr.frames.back().embed;
    for (std::size_t d = 0; d < D; ++d) {
      tr.cues.at(f, 0, d) = e.full.vec[d];
      tr.cues.at(f, 1, d) = e.nonmanual.vec[d];
      tr.cues.at(f, 2, d) = e.manual.vec[d];
    }
  }

  const auto seq = tr.cues.reshaped({T, kNumCues * D});
  BasicTensor<Real> pooled;
  if (cfg.bta) {
    tr.bta = bta(seq, p.bta);
    pooled = tr.bta->out();
    tr.bta_logprobs.push_back(tr.bta->bottleneck_logits);
  } else {
    tr.pool = temporal_maxpool(seq);
    pooled = tr.pool.out;
  }
  const std::size_t Tp = pooled.dim(0);

  BasicTensor<Real> cues = pooled.reshaped({Tp, kNumCues, D});
  const BasicTensor<Real>* prev = nullptr;
  for (const auto& block : p.tmc) {
    tr.tmc.push_back(tmc_block(cues, block, prev));
    cues = tr.tmc.back().intra;
    prev = &tr.tmc.back().inter;
  }
  const BasicTensor<Real>& inter = tr.tmc.back().inter;
  tr.rnn = birnn(inter, p.rnn);
  tr.inter_logprobs = classify(tr.rnn.out, p.classifier);
  tr.latent_logprobs = classify(inter, p.latent_head);
  for (std::size_t k = 0; k < kNumCues; ++k) {
    tr.intra_features.push_back(transpose2d(cue_channels(cues, k)));
    tr.intra_logprobs.push_back(classify(tr.intra_features.back(), p.intra_heads[k]));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Backward

/// Gradients of the loss with respect to each head's log-probs. Empty
/// tensors mean "no gradient from this head".
template <std::floating_point Real>
struct HeadGrads {
  BasicTensor<Real> inter;
  BasicTensor<Real> latent;
  std::vector<BasicTensor<Real>> intra;  // per cue, or empty
  std::vector<BasicTensor<Real>> bta;    // per bottleneck head, or empty
};

namespace detail {

template <std::floating_point Real>
void accumulate(Conv2DParams<Real>& g, const Conv2DGrads<Real>& d) {
  g.weights += d.weights;
  g.bias += d.bias;
}

template <std::floating_point Real>
void accumulate(Conv1DParams<Real>& g, const Conv1DGrads<Real>& d) {
  g.weights += d.weights;
  g.bias += d.bias;
}

template <std::floating_point Real>
void accumulate(AffineParams<Real>& g, const AffineGrads<Real>& d) {
  g.weights += d.weights;
  g.bias += d.bias;
}

template <std::floating_point Real>
void accumulate(RnnDirection<Real>& g, const RnnDirection<Real>& d) {
  g.wx += d.wx;
  g.wh += d.wh;
  g.bias += d.bias;
}

}  // namespace detail

/// Back-propagates head gradients through the trace; parameter gradients
/// are added into `grads` (a buffer from zeros_like).
template <std::floating_point Real>
void backward_pipeline(const Model<Real>& model, const PipelineTrace<Real>& tr,
                       const HeadGrads<Real>& hg, ModelParams<Real>& grads) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  const std::size_t Tp = tr.pooled_frames(), D = cfg.cue_dim, T = tr.frames.size();
  const BasicTensor<Real>& inter = tr.final_inter();

  // inter-cue output: classifier through the recurrence, plus the latent head
  BasicTensor<Real> g_inter(inter.shape());
  if (!hg.inter.empty()) {
    auto cg = classify_backward(tr.rnn.out, p.classifier, tr.inter_logprobs, hg.inter);
    detail::accumulate(grads.classifier, cg);
    auto rg = birnn_backward(tr.rnn, p.rnn, cg.input);
    detail::accumulate(grads.rnn.fwd, rg.params.fwd);
    detail::accumulate(grads.rnn.bwd, rg.params.bwd);
    g_inter += rg.input;
  }
  if (!hg.latent.empty()) {
    auto lg = classify_backward(inter, p.latent_head, tr.latent_logprobs, hg.latent);
    detail::accumulate(grads.latent_head, lg);
    g_inter += lg.input;
  }

  // intra-cue heads
  const std::size_t Dh = tr.intra_features[0].dim(1);
  BasicTensor<Real> g_intra({Tp, kNumCues, Dh});
  for (std::size_t k = 0; k < hg.intra.size(); ++k) {
    if (hg.intra[k].empty()) continue;
    auto ig = classify_backward(tr.intra_features[k], p.intra_heads[k], tr.intra_logprobs[k], hg.intra[k]);
    detail::accumulate(grads.intra_heads[k], ig);
    for (std::size_t t = 0; t < Tp; ++t)
      for (std::size_t d = 0; d < Dh; ++d) g_intra.at(t, k, d) += ig.input.at(t, d);
  }

  // TMC blocks, last to first
  for (std::size_t b = tr.tmc.size(); b-- > 0;) {
    auto tg = tmc_backward(tr.tmc[b], p.tmc[b], g_intra, g_inter);
    for (std::size_t k = 0; k < kNumCues; ++k) detail::accumulate(grads.tmc[b].intra[k], tg.intra[k]);
    detail::accumulate(grads.tmc[b].inter, tg.inter);
    g_intra = std::move(tg.cues);
    g_inter = std::move(tg.prev_inter);
  }
  const BasicTensor<Real> g_pooled = g_intra.reshaped({Tp, kNumCues * D});

  // temporal pooling
  BasicTensor<Real> g_seq;
  if (cfg.bta) {
    BasicTensor<Real> g_logits = hg.bta.empty() ? BasicTensor<Real>{} : hg.bta[0];
    auto bg = bta_backward(*tr.bta, p.bta, g_pooled, g_logits);
    detail::accumulate(grads.bta.att1, bg.att1);
    detail::accumulate(grads.bta.att2, bg.att2);
    if (!g_logits.empty()) detail::accumulate(grads.bta.head, bg.head);
    g_seq = std::move(bg.input);
  } else {
    g_seq = temporal_maxpool_backward({T, kNumCues * D}, tr.pool, g_pooled);
  }

  // per-frame spatial path
  for (std::size_t f = 0; f < T; ++f) {
    const auto& ft = tr.frames[f];
    MultiCueVectors<Real> gv{BasicTensor<Real>({D}), BasicTensor<Real>({D}), BasicTensor<Real>({D})};
    for (std::size_t d = 0; d < D; ++d) {
      gv.full[d] = g_seq.at(f, 0 * D + d);
      gv.nonmanual[d] = g_seq.at(f, 1 * D + d);
      gv.manual[d] = g_seq.at(f, 2 * D + d);
    }
    auto eg = multi_cue_backward(ft.embed, p.embed, gv);
    detail::accumulate(grads.embed.full1, eg.full1);
    detail::accumulate(grads.embed.full2, eg.full2);
    detail::accumulate(grads.embed.nonmanual, eg.nonmanual);
    detail::accumulate(grads.embed.manual, eg.manual);
    BasicTensor<Real> g = cfg.dfconv ? merge_cue_grads(eg.maps) : merge_whole_cue_grads(eg.maps);
    for (std::size_t s = ft.stages.size(); s-- > 0;) {
      const auto& st = ft.stages[s];
      g = maxpool2d_backward(st.pre.shape(), st.pool.argmax, g);
      g = relu_backward(st.pre, std::move(g));
      const bool need_input = s > 0;
      if (cfg.dfconv) {
        auto dg = dfconv_backward(st.input, p.stages[s], g, need_input);
        detail::accumulate(grads.stages[s].upper, dg.upper);
        detail::accumulate(grads.stages[s].lower, dg.lower);
        g = std::move(dg.input);
      } else {
        auto cg = conv2d_backward(st.input, p.stages[s].upper, g, need_input);
        detail::accumulate(grads.stages[s].upper, cg);
        g = std::move(cg.input);
      }
    }
  }
}

}  // namespace dfsign
