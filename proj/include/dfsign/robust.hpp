// dfsign/robust.hpp

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

// Test-time vertical translation and scaling, with the division ratio either
// kept fixed or moved along with the translation.

#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "dfsign/corpus.hpp"
#include "dfsign/error.hpp"
#include "dfsign/train.hpp"

namespace dfsign {

struct FrameTransform {
  std::string name;
  double shift = 0;  // fraction of the height; positive moves content up
  double scale = 1;  // about the frame centre

  bool identity() const { return shift == 0 && scale == 1; }
};

/// Original plus rows A-H: shifts of 10% and 20% up and down, and 10% shifts
/// combined with scales 0.8 and 1.2.
inline std::vector<FrameTransform> robustness_transforms() {
  return {{"Original", 0.0, 1.0}, {"A", 0.1, 1.0},  {"B", 0.2, 1.0},
          {"C", 0.1, 0.8},        {"D", 0.1, 1.2},  {"E", -0.1, 1.0},
          {"F", -0.2, 1.0},       {"G", -0.1, 0.8}, {"H", -0.1, 1.2}};
}

/// Applies `t` to every frame of a [T, C, H, W] video. Output pixels sample
/// the source by nearest neighbour; pixels that map outside the frame are 0.
inline Tensor transform_video(const Tensor& video, const FrameTransform& t) {
  video.require_rank(4, "transform_video");
  if (!(t.scale > 0)) throw ContractError("transform scale must be positive");
  if (t.identity()) return video;
  const std::size_t T = video.dim(0), C = video.dim(1), H = video.dim(2), W = video.dim(3);
  const double cy = (double(H) - 1) / 2, cx = (double(W) - 1) / 2, dy = t.shift * double(H);
  std::vector<long> src_y(H), src_x(W);
  for (std::size_t y = 0; y < H; ++y) {
    const double s = (double(y) + dy - cy) / t.scale + cy;
    src_y[y] = long(std::floor(s + 0.5));
  }
  for (std::size_t x = 0; x < W; ++x) src_x[x] = long(std::floor((double(x) - cx) / t.scale + cx + 0.5));
  Tensor out(video.shape());
  const float* in = video.storage().data();
  float* o = out.storage().data();
  for (std::size_t f = 0; f < T * C; ++f)
    for (std::size_t y = 0; y < H; ++y) {
      if (src_y[y] < 0 || src_y[y] >= long(H)) continue;
      const float* row = in + (f * H + std::size_t(src_y[y])) * W;
      float* orow = o + (f * H + y) * W;
      for (std::size_t x = 0; x < W; ++x)
        if (src_x[x] >= 0 && src_x[x] < long(W)) orow[x] = row[std::size_t(src_x[x])];
    }
  return out;
}

enum class RatioMode { Fixed, Shifted };

inline RatioMode parse_ratio_mode(const std::string& s) {
  if (s == "fixed") return RatioMode::Fixed;
  if (s == "shifted") return RatioMode::Shifted;
  throw ContractError("r mode must be fixed or shifted, got '" + s + "'");
}

inline std::string to_string(RatioMode m) { return m == RatioMode::Fixed ? "fixed" : "shifted"; }

/// Division used for a transform: the trained one, or in shifted mode the
/// face boundary moved with the translation (clamped to feasible rows).
inline DivisionSpec division_for(const DivisionSpec& trained, const FrameTransform& t, RatioMode mode) {
  if (mode == RatioMode::Fixed || t.shift == 0) return trained;
  return {trained.ratio - t.shift, trained.groups, true};
}

struct RobustnessRow {
  FrameTransform transform;
  double ratio = 0;
  std::vector<double> wer;  // one per split
};

/// Corpus WER of `model` on each split under every transform.
inline std::vector<RobustnessRow> robustness_eval(const Model<float>& model, const std::vector<const Split*>& splits,
                                                  const std::vector<FrameTransform>& transforms, RatioMode mode) {
  std::vector<RobustnessRow> rows;
  for (const auto& t : transforms) {
    const auto division = division_for(model.config.division, t, mode);
    const Model<float> m = division.ratio == model.config.division.ratio ? model : model.with_division(division);
    RobustnessRow row{t, division.ratio, {}};
    for (const Split* s : splits)
      row.wer.push_back(
          evaluate(m, *s, [&](const Tensor& v) { return transform_video(v, t); }).report.corpus_wer());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_robustness_table(std::ostream& os, const std::vector<RobustnessRow>& rows,
                                   const std::vector<std::string>& split_names, RatioMode mode) {
  const auto flags = os.flags();
  os << "transform\tshift\tscale\tr_mode\tr";
  for (const auto& n : split_names) os << '\t' << n << "_wer";
  os << '\n';
  std::vector<double> mean(split_names.size(), 0.0);
  for (const auto& r : rows) {
    os << r.transform.name << '\t' << std::defaultfloat << r.transform.shift << '\t' << r.transform.scale << '\t'
       << to_string(mode) << '\t' << r.ratio;
    for (std::size_t i = 0; i < r.wer.size(); ++i) {
      os << '\t' << std::fixed << std::setprecision(4) << r.wer[i];
      mean[i] += r.wer[i] / double(rows.size());
    }
    os << std::defaultfloat << '\n';
  }
  os << "Average\t\t\t" << to_string(mode) << '\t';
  for (double m : mean) os << '\t' << std::fixed << std::setprecision(4) << m;
  os << '\n';
  os.flags(flags);
}

}  // namespace dfsign
