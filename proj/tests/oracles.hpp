// tests/oracles.hpp

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

// Reference implementations used only by tests. They are written for
// obviousness, not speed, and share no code with the library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

/// Nested-loop cross-correlation over flat row-major buffers.
inline std::vector<double> conv2d(const std::vector<double>& in, int ci_n, int h, int w,
                                  const std::vector<double>& wt, const std::vector<double>& bias,
                                  int co_n, int kh, int kw, int sy, int sx, int py, int px,
                                  int* oh_out, int* ow_out) {
  const int oh = (h + 2 * py - kh) / sy + 1, ow = (w + 2 * px - kw) / sx + 1;
  std::vector<double> out(std::size_t(co_n * oh * ow));
  for (int co = 0; co < co_n; ++co)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias[std::size_t(co)];
        for (int ci = 0; ci < ci_n; ++ci)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * sy + ky - py, ix = ox * sx + kx - px;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += wt[std::size_t(((co * ci_n + ci) * kh + ky) * kw + kx)] *
                     in[std::size_t((ci * h + iy) * w + ix)];
            }
        out[std::size_t((co * oh + oy) * ow + ox)] = acc;
      }
  *oh_out = oh;
  *ow_out = ow;
  return out;
}

/// Plain Levenshtein distance, two-row formulation.
template <class Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Two-pass collapse: drop consecutive duplicates, then blanks.
inline std::vector<int> collapse(const std::vector<int>& x, int blank) {
  std::vector<int> dedup;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (i == 0 || x[i] != x[i - 1]) dedup.push_back(x[i]);
  std::vector<int> out;
  for (int v : dedup)
    if (v != blank) out.push_back(v);
  return out;
}

/// Merge consecutive repeats.
inline std::vector<int> runs(const std::vector<int>& x) {
  std::vector<int> out;
  for (int v : x)
    if (out.empty() || out.back() != v) out.push_back(v);
  return out;
}

}  // namespace oracle
