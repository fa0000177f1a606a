// dfsign/dplr.hpp

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

// Dense pseudo-label refinement.
//
// A greedy CTC decode is compared with the ground truth by length:
//   equal length       -> Case1: wrong glosses are swapped for the true ones,
//                         then blanks are filled with the nearest gloss;
//   length off by one  -> Case2: blanks are filled, labels are kept;
//   anything else      -> Skip: no refinement target.
// The resulting per-frame labels supervise the latent (inter-cue) head with a
// cross-entropy loss.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dfsign/ctc.hpp"
#include "dfsign/tensor.hpp"

namespace dfsign {

/// One gloss id per frame, no blanks.
using DensePseudoLabel = std::vector<int>;

enum class DplrCase { Case1, Case2, Skip };

inline std::string_view to_string(DplrCase c) {
  switch (c) {
    case DplrCase::Case1: return "case1";
    case DplrCase::Case2: return "case2";
    case DplrCase::Skip: return "skip";
  }
  return "?";
}

inline DplrCase classify_case(const GlossSequence& pred, const GlossSequence& gt) {
  const auto gap = std::abs(long(pred.size()) - long(gt.size()));
  if (gap == 0) return DplrCase::Case1;
  if (gap == 1) return DplrCase::Case2;
  return DplrCase::Skip;
}

/// Relabels the k-th non-blank run of `framewise` with gt[k] wherever
/// pred[k] != gt[k]. Blank frames are left alone.
inline FramewiseLabels swap_wrong_glosses(FramewiseLabels framewise, const GlossSequence& pred,
                                          const GlossSequence& gt, int blank) {
  if (pred.size() != gt.size())
    throw ContractError("swap_wrong_glosses: predicted length " + std::to_string(pred.size()) +
                        " differs from ground-truth length " + std::to_string(gt.size()));
  if (collapse(framewise, blank) != pred)
    throw ContractError("swap_wrong_glosses: framewise labels do not collapse to the prediction");
  std::size_t run = 0;
  for (std::size_t t = 0; t < framewise.size();) {
    const int l = framewise[t];
    std::size_t end = t;
    while (end < framewise.size() && framewise[end] == l) ++end;
    if (l != blank) {
      if (pred[run] != gt[run])
        for (std::size_t i = t; i < end; ++i) framewise[i] = gt[run];
      ++run;
    }
    t = end;
  }
  return framewise;
}

/// Fills every blank frame with the label of the nearest non-blank frame;
/// equidistant frames take the earlier one.
inline DensePseudoLabel densify(const FramewiseLabels& framewise, int blank) {
  const std::size_t n = framewise.size();
  constexpr std::size_t kNone = std::size_t(-1);
  std::vector<std::size_t> left(n, kNone), right(n, kNone);
  for (std::size_t t = 0, last = kNone; t < n; ++t) {
    if (framewise[t] != blank) last = t;
    left[t] = last;
  }
  for (std::size_t t = n, next = kNone; t-- > 0;) {
    if (framewise[t] != blank) next = t;
    right[t] = next;
  }
  if (n == 0 || left[n - 1] == kNone)
    throw DensifyError("densify: no non-blank frame to propagate");
  DensePseudoLabel out(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (left[t] == kNone) {
      out[t] = framewise[right[t]];
    } else if (right[t] == kNone || t - left[t] <= right[t] - t) {
      out[t] = framewise[left[t]];
    } else {
      out[t] = framewise[right[t]];
    }
  }
  return out;
}

/// Which of the two pseudo-label steps are applied (design-choice ablation).
struct PseudoLabelOptions {
  bool densify = true;
  bool swap = true;
};

struct PseudoLabel {
  DplrCase kind = DplrCase::Skip;
  std::vector<int> labels;  // empty for Skip; may contain blanks when densify is off
};

/// Classifies the decode and builds its pseudo-label. Returns a Skip result
/// (no labels) for length gaps of two or more and for all-blank decodes.
inline PseudoLabel generate_pseudo_label(const FramewiseLabels& framewise, const GlossSequence& gt,
                                         int blank, const PseudoLabelOptions& opt = {}) {
  const auto pred = collapse(framewise, blank);
  PseudoLabel r{classify_case(pred, gt), {}};
  if (r.kind == DplrCase::Skip || pred.empty()) return r;
  FramewiseLabels labels = framewise;
  if (r.kind == DplrCase::Case1 && opt.swap) labels = swap_wrong_glosses(std::move(labels), pred, gt, blank);
  r.labels = opt.densify ? densify(labels, blank) : std::move(labels);
  return r;
}

/// Dense pseudo-label with both correction and densification, or nothing
/// when the sample is skipped.
inline std::optional<DensePseudoLabel> generate_dpl(const FramewiseLabels& framewise,
                                                    const GlossSequence& gt, int blank) {
  auto r = generate_pseudo_label(framewise, gt, blank);
  if (r.labels.empty()) return std::nullopt;
  return std::move(r.labels);
}

template <std::floating_point Real>
struct RefineResult {
  double loss = 0;
  BasicTensor<Real> grad;  // d loss / d latent logprobs
};

/// Mean over frames of -log q(label_t) for latent log-probs [T, V+1].
template <std::floating_point Real>
RefineResult<Real> refine_loss(const BasicTensor<Real>& latent_logprobs, const std::vector<int>& labels) {
  latent_logprobs.require_rank(2, "refine_loss");
  const std::size_t T = latent_logprobs.dim(0), K = latent_logprobs.dim(1);
  if (labels.size() != T)
    throw ContractError("refine_loss: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(T) + " frames");
  RefineResult<Real> r{0, BasicTensor<Real>({T, K})};
  for (std::size_t t = 0; t < T; ++t) {
    if (labels[t] < 0 || std::size_t(labels[t]) >= K)
      throw ContractError("refine_loss: label " + std::to_string(labels[t]) + " out of range");
    r.loss -= double(latent_logprobs.at(t, std::size_t(labels[t])));
    r.grad.at(t, std::size_t(labels[t])) = Real(-1.0 / double(T));
  }
  r.loss /= double(T);
  return r;
}

struct LossBundle {
  double l_inter = 0, l_intra = 0, l_refine = 0, l_bta = 0;
  double lambda1 = 1, lambda2 = 1, lambda3 = 1;
};

inline double total_loss(const LossBundle& b) {
  return b.l_inter + b.lambda1 * b.l_intra + b.lambda2 * b.l_refine + b.lambda3 * b.l_bta;
}

/// One TSV line of the pseudo-label dump: id, case, space-joined labels.
inline void write_dpl_line(std::ostream& os, std::string_view video_id, const PseudoLabel& p) {
  os << video_id << '\t' << to_string(p.kind) << '\t';
  for (std::size_t i = 0; i < p.labels.size(); ++i) os << (i ? " " : "") << p.labels[i];
  os << '\n';
}

}  // namespace dfsign
