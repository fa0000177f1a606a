// dfsign/objective.hpp

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

#pragma once

#include <cstddef>

#include "dfsign/ctc.hpp"
#include "dfsign/dplr.hpp"
#include "dfsign/model.hpp"

namespace dfsign {

struct ObjectiveOptions {
  double lambda1 = 1, lambda2 = 1, lambda3 = 1;
  /// Whether the refinement term is active for this sample (DPLR on and
  /// past warm-up).
  bool refine = false;
  PseudoLabelOptions pseudo_label;
};

template <std::floating_point Real>
struct SampleObjective {
  LossBundle losses;
  double total = 0;
  HeadGrads<Real> grads;
  FramewiseLabels decode;  // greedy decode of the inter-cue head
  PseudoLabel pseudo_label;  // computed even when refinement is off
};

/// Weighted loss of one video and its gradients with respect to every head.
/// Throws InfeasibleTargetError when the pooled length cannot emit `target`.
template <std::floating_point Real>
SampleObjective<Real> sample_objective(const PipelineTrace<Real>& tr, const GlossSequence& target,
                                       const ObjectiveOptions& opt) {
  SampleObjective<Real> s;
  s.losses.lambda1 = opt.lambda1;
  s.losses.lambda2 = opt.lambda2;
  s.losses.lambda3 = opt.lambda3;

  auto inter = ctc_loss(tr.inter_logprobs, target);
  s.losses.l_inter = inter.loss;
  s.grads.inter = std::move(inter.grad);

  const double n_intra = double(tr.intra_logprobs.size());
  for (const auto& lp : tr.intra_logprobs) {
    auto r = ctc_loss(lp, target);
    s.losses.l_intra += r.loss / n_intra;
    r.grad *= Real(opt.lambda1 / n_intra);
    s.grads.intra.push_back(std::move(r.grad));
  }

  const double n_bta = double(tr.bta_logprobs.size());
  for (const auto& lp : tr.bta_logprobs) {
    auto r = ctc_loss(lp, target);
    s.losses.l_bta += r.loss / n_bta;
    r.grad *= Real(opt.lambda3 / n_bta);
    s.grads.bta.push_back(std::move(r.grad));
  }

  const int blank = int(tr.inter_logprobs.dim(1)) - 1;
  s.decode = greedy_decode(tr.inter_logprobs);
  s.pseudo_label = generate_pseudo_label(s.decode, target, blank, opt.pseudo_label);
  if (opt.refine && !s.pseudo_label.labels.empty()) {
    auto r = refine_loss(tr.latent_logprobs, s.pseudo_label.labels);
    s.losses.l_refine = r.loss;
    r.grad *= Real(opt.lambda2);
    s.grads.latent = std::move(r.grad);
  }
  s.total = total_loss(s.losses);
  return s;
}

}  // namespace dfsign
