// dfsign/ctc.hpp

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

// Connectionist temporal classification over [T, V+1] log-probability rows.
// The blank is the last class (index V).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dfsign/tensor.hpp"

namespace dfsign {

/// Gloss ids in [0, V); never contains the blank.
using GlossSequence = std::vector<int>;
/// One label in [0, V] per frame; V is the blank.
using FramewiseLabels = std::vector<int>;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Frames needed to emit `target`: one per gloss plus a blank between repeats.
inline std::size_t ctc_min_frames(const GlossSequence& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

template <std::floating_point Real>
struct CtcResult {
  double loss = 0;
  BasicTensor<Real> grad;  // d loss / d logprobs, [T, V+1]
};

namespace detail {

template <std::floating_point Real>
void check_ctc_args(const BasicTensor<Real>& logprobs, const GlossSequence& target) {
  logprobs.require_rank(2, "ctc logprobs");
  const int blank = int(logprobs.dim(1)) - 1;
  if (blank < 1) throw ShapeError("ctc: need at least one gloss class plus the blank");
  for (int g : target)
    if (g < 0 || g >= blank)
      throw ContractError("ctc: target gloss " + std::to_string(g) + " outside [0," +
                          std::to_string(blank) + ")");
  if (logprobs.dim(0) < ctc_min_frames(target))
    throw InfeasibleTargetError("ctc: " + std::to_string(logprobs.dim(0)) +
                                " frames cannot emit a target needing " +
                                std::to_string(ctc_min_frames(target)));
}

}  // namespace detail

/// Negative log-likelihood of `target` under framewise log-probabilities,
/// summed over every alignment by the forward-backward recursions in log
/// space (double). The gradient is taken with respect to the log-prob inputs.
template <std::floating_point Real>
CtcResult<Real> ctc_loss(const BasicTensor<Real>& logprobs, const GlossSequence& target) {
  detail::check_ctc_args(logprobs, target);
  const std::size_t T = logprobs.dim(0), K = logprobs.dim(1);
  const int blank = int(K) - 1;
  const std::size_t S = 2 * target.size() + 1;
  auto label = [&](std::size_t s) { return s % 2 ? target[s / 2] : blank; };
  auto lp = [&](std::size_t t, std::size_t s) { return double(logprobs.at(t, std::size_t(label(s)))); };
  // skip transition s-2 -> s allowed for a gloss that differs from the previous one
  auto can_skip = [&](std::size_t s) { return s % 2 == 1 && s >= 2 && label(s) != label(s - 2); };

  std::vector<double> alpha(T * S, kLogZero), beta(T * S, kLogZero);
  alpha[0] = lp(0, 0);
  if (S > 1) alpha[1] = lp(0, 1);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
      alpha[t * S + s] = a == kLogZero ? kLogZero : a + lp(t, s);
    }
  beta[(T - 1) * S + S - 1] = lp(T - 1, S - 1);
  if (S > 1) beta[(T - 1) * S + S - 2] = lp(T - 1, S - 2);
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta[(t + 1) * S + s];
      if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1]);
      if (s + 2 < S && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * S + s + 2]);
      beta[t * S + s] = b == kLogZero ? kLogZero : b + lp(t, s);
    }

  double log_p = alpha[(T - 1) * S + S - 1];
  if (S > 1) log_p = log_add(log_p, alpha[(T - 1) * S + S - 2]);
  if (log_p == kLogZero) throw InfeasibleTargetError("ctc: target has zero probability");

  CtcResult<Real> r{-log_p, BasicTensor<Real>({T, K})};
  std::vector<double> occ(K);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occ.begin(), occ.end(), kLogZero);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = alpha[t * S + s] + beta[t * S + s];
      if (ab != kLogZero) occ[std::size_t(label(s))] = log_add(occ[std::size_t(label(s))], ab - lp(t, s));
    }
    for (std::size_t k = 0; k < K; ++k)
      r.grad.at(t, k) = occ[k] == kLogZero ? Real(0) : Real(-std::exp(occ[k] - log_p));
  }
  return r;
}

/// Merge consecutive duplicates, then drop blanks.
inline GlossSequence collapse(const FramewiseLabels& labels, int blank) {
  GlossSequence out;
  int prev = -1;
  for (int l : labels) {
    if (l != prev && l != blank) out.push_back(l);
    prev = l;
  }
  return out;
}

/// Per-frame argmax; ties go to the smallest class index.
template <std::floating_point Real>
FramewiseLabels greedy_decode(const BasicTensor<Real>& logprobs) {
  logprobs.require_rank(2, "greedy_decode");
  FramewiseLabels out(logprobs.dim(0));
  for (std::size_t t = 0; t < logprobs.dim(0); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logprobs.dim(1); ++k)
      if (logprobs.at(t, k) > logprobs.at(t, best)) best = k;
    out[t] = int(best);
  }
  return out;
}

/// Loss by enumerating every framewise path; (V+1)^T must not exceed 1e7.
/// Test oracle for ctc_loss.
template <std::floating_point Real>
double brute_force_ctc(const BasicTensor<Real>& logprobs, const GlossSequence& target) {
  detail::check_ctc_args(logprobs, target);
  const std::size_t T = logprobs.dim(0), K = logprobs.dim(1);
  double paths = std::pow(double(K), double(T));
  if (paths > 1e7) throw ContractError("brute_force_ctc: (V+1)^T = " + std::to_string(paths) + " > 1e7");
  const int blank = int(K) - 1;
  std::vector<int> path(T, 0);
  double total = kLogZero;
  for (;;) {
    if (collapse(path, blank) == target) {
      double s = 0;
      for (std::size_t t = 0; t < T; ++t) s += double(logprobs.at(t, std::size_t(path[t])));
      total = log_add(total, s);
    }
    std::size_t i = 0;
    while (i < T && ++path[i] == int(K)) path[i++] = 0;
    if (i == T) break;
  }
  if (total == kLogZero) throw InfeasibleTargetError("brute_force_ctc: no path emits target");
  return -total;
}

}  // namespace dfsign
