// tests/test_dfconv.cpp

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

#include <gtest/gtest.h>

#include <random>

#include "dfsign/dfconv.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dfsign;
using testutil::T64;

namespace {

DFConvParams<double> random_dfconv(std::mt19937_64& rng, std::size_t ci, std::size_t co, DivisionSpec spec) {
  return {{random_tensor({co, ci, 3, 3}, rng), random_tensor({co}, rng), {1, 1}, {1, 1}},
          {random_tensor({co, ci, 3, 3}, rng), random_tensor({co}, rng), {1, 1}, {1, 1}},
          spec};
}

// Hand-built oracle: slice rows, run the naive conv on each piece, stack.
T64 dfconv_by_hand(const T64& x, const DFConvParams<double>& p, std::size_t hu,
                   const std::vector<std::size_t>& bands) {
  const std::size_t c = x.dim(0), w = x.dim(2), co = p.upper.weights.dim(0);
  std::vector<std::pair<std::size_t, std::size_t>> pieces{{0, hu}};
  std::size_t row = hu;
  for (auto b : bands) {
    pieces.push_back({row, row + b});
    row += b;
  }
  T64 out({co, x.dim(1), w});
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    auto [b, e] = pieces[k];
    std::vector<double> flat;
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t y = b; y < e; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) flat.push_back(x.at(ci, y, xx));
    const auto& cp = k == 0 ? p.upper : p.lower;
    int oh, ow;
    auto ref = oracle::conv2d(flat, int(c), int(e - b), int(w), cp.weights.storage(), cp.bias.storage(),
                              int(co), 3, 3, 1, 1, 1, 1, &oh, &ow);
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < e - b; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) out.at(o, b + y, xx) = ref[(o * (e - b) + y) * w + xx];
  }
  return out;
}

}  // namespace

TEST(DivisionSpec, FloorOfRatio) {
  EXPECT_EQ((DivisionSpec{0.35, 2, false}.upper_rows(64)), 22u);
  EXPECT_EQ((DivisionSpec{0.5, 2, false}.upper_rows(48)), 24u);
  // floor(0.35 * 20) must not suffer from 0.35 * 20 = 6.9999...
  EXPECT_EQ((DivisionSpec{0.35, 2, false}.upper_rows(20)), 7u);
}

TEST(DivisionSpec, ClampKeepsRegionsFeasible) {
  DivisionSpec s{0.02, 2, true};
  EXPECT_EQ(s.upper_rows(48, 3, 6), 3u);
  s.ratio = 0.99;
  EXPECT_EQ(s.upper_rows(48, 3, 6), 42u);
  s.clamp = false;
  EXPECT_THROW(s.upper_rows(48, 3, 6), DivisionError);
}

TEST(SplitRegions, Example64) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({2, 64, 5}, rng);
  auto s = split_regions(x, DivisionSpec{0.35, 2, false});
  EXPECT_EQ(s.upper.shape(), (Shape{2, 22, 5}));
  EXPECT_EQ(s.lower.shape(), (Shape{2, 42, 5}));
}

TEST(SplitRegions, RegionSmallerThanKernelIsInvalid) {
  T64 x({1, 10, 4});
  // h_u = 9 = H - 1 leaves one lower row, below a 3-row kernel.
  EXPECT_THROW(split_regions(x, DivisionSpec{0.9, 1, false}, 3), DivisionError);
  EXPECT_THROW(split_regions(x, DivisionSpec{0.05, 1, false}), DivisionError);
  DFConvParams<double> p{{T64({1, 1, 3, 3}), T64({1}), {1, 1}, {1, 1}},
                         {T64({1, 1, 3, 3}), T64({1}), {1, 1}, {1, 1}},
                         {0.9, 1, false}};
  EXPECT_THROW(dfconv_forward(x, p), DivisionError);
}

TEST(SplitRegions, PartitionReassembles) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const std::size_t h = 4 + rng() % 40;
    auto x = random_tensor({3, h, 6}, rng);
    const double r = 0.2 + 0.6 * double(rng() % 1000) / 1000.0;
    auto s = split_regions(x, DivisionSpec{r, 2, false});
    std::vector<T64> parts{s.upper, s.lower};
    EXPECT_EQ(concat_rows<double>(parts), x);
  }
}

TEST(SubdivideLower, BandHeights) {
  EXPECT_EQ(band_heights(42, 2), (std::vector<std::size_t>{21, 21}));
  EXPECT_EQ(band_heights(43, 2), (std::vector<std::size_t>{22, 21}));
  EXPECT_EQ(band_heights(11, 3), (std::vector<std::size_t>{4, 4, 3}));
  EXPECT_THROW(band_heights(5, 2, 3), DivisionError);
  EXPECT_THROW(band_heights(5, 0), DivisionError);

  std::mt19937_64 rng(3);
  auto lower = random_tensor({2, 9, 4}, rng);
  auto one = subdivide_lower(lower, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], lower);
  auto two = subdivide_lower(lower, 2);
  EXPECT_EQ(concat_rows<double>(two), lower);
}

TEST(DFConv, ZeroInputZeroOutput) {
  std::mt19937_64 rng(4);
  auto p = random_dfconv(rng, 2, 3, {0.35, 2, false});
  p.upper.bias.fill(0);
  p.lower.bias.fill(0);
  auto out = dfconv_forward(T64({2, 24, 8}), p);
  EXPECT_EQ(out.shape(), (Shape{3, 24, 8}));
  for (double v : out.storage()) EXPECT_EQ(v, 0.0);
}

TEST(DFConv, MatchesCompositionalOracle) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(10 + seed);
    const std::size_t h = 20 + rng() % 30;
    DivisionSpec spec{0.3 + 0.1 * (seed % 3), std::size_t(1 + seed % 3), false};
    auto p = random_dfconv(rng, 2, 3, spec);
    auto x = random_tensor({2, h, 7}, rng);
    const std::size_t hu = spec.upper_rows(h);
    auto out = dfconv_forward(x, p);
    auto ref = dfconv_by_hand(x, p, hu, band_heights(h - hu, spec.groups));
    ASSERT_EQ(out.shape(), ref.shape());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-12);
  }
}

TEST(DFConv, RegionIndependence) {
  std::mt19937_64 rng(5);
  DivisionSpec spec{0.35, 2, false};
  auto p = random_dfconv(rng, 2, 3, spec);
  auto x = random_tensor({2, 40, 6}, rng);
  const std::size_t hu = spec.upper_rows(40);  // 14; bands 13 + 13
  auto base = dfconv_forward(x, p);

  auto changed_rows = [&](std::size_t y) {
    auto xp = x;
    xp.at(1, y, 3) += 1.0;
    auto out = dfconv_forward(xp, p);
    std::vector<bool> rows(40, false);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t w = 0; w < 6; ++w)
          if (out.at(c, r, w) != base.at(c, r, w)) rows[r] = true;
    return rows;
  };

  auto rows = changed_rows(hu - 1);  // last upper row
  for (std::size_t r = hu; r < 40; ++r) EXPECT_FALSE(rows[r]) << r;
  rows = changed_rows(hu);  // first lower row
  for (std::size_t r = 0; r < hu; ++r) EXPECT_FALSE(rows[r]) << r;
  rows = changed_rows(hu + 12);  // last row of band 0
  for (std::size_t r = hu + 13; r < 40; ++r) EXPECT_FALSE(rows[r]) << r;
}

TEST(DFConv, ZeroLowerWeightsZeroAllBands) {
  std::mt19937_64 rng(6);
  for (std::size_t groups : {1u, 2u, 3u}) {
    auto p = random_dfconv(rng, 2, 3, {0.35, groups, false});
    p.lower.weights.fill(0);
    p.lower.bias.fill(0);
    auto x = random_tensor({2, 36, 5}, rng);
    auto out = dfconv_forward(x, p);
    const std::size_t hu = p.spec.upper_rows(36);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t r = hu; r < 36; ++r)
        for (std::size_t w = 0; w < 5; ++w) EXPECT_EQ(out.at(c, r, w), 0.0);
  }
}

TEST(DFConv, InteriorRowsMatchPlainConv) {
  std::mt19937_64 rng(7);
  DivisionSpec spec{0.4, 1, false};
  auto p = random_dfconv(rng, 2, 3, spec);
  p.upper = p.lower;
  auto x = random_tensor({2, 30, 6}, rng);
  auto df = dfconv_forward(x, p);
  auto plain = conv2d(x, p.lower);
  const std::size_t hu = spec.upper_rows(30), pad = 1;
  bool seam_differs = false;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 0; r < 30; ++r)
      for (std::size_t w = 0; w < 6; ++w) {
        const bool near_seam = r + pad >= hu && r < hu + pad;
        if (!near_seam)
          EXPECT_NEAR(df.at(c, r, w), plain.at(c, r, w), 1e-12) << r;
        else if (df.at(c, r, w) != plain.at(c, r, w))
          seam_differs = true;
      }
  EXPECT_TRUE(seam_differs);
}

TEST(DFConv, UpperGradIgnoresLowerRows) {
  std::mt19937_64 rng(8);
  auto p = random_dfconv(rng, 2, 3, {0.35, 2, false});
  auto x = random_tensor({2, 24, 5}, rng);
  const std::size_t hu = p.spec.upper_rows(24);
  auto g = random_tensor({3, 24, 5}, rng);
  auto base = dfconv_backward(x, p, g);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = hu; r < 24; ++r)
      for (std::size_t w = 0; w < 5; ++w) g.at(c, r, w) *= -7.0;
  auto changed = dfconv_backward(x, p, g);
  EXPECT_EQ(base.upper.weights, changed.upper.weights);
  EXPECT_EQ(base.upper.bias, changed.upper.bias);
}

TEST(DFConv, SharedWeightGradientIsSumOverBands) {
  std::mt19937_64 rng(9);
  // Two identical bands of 8 rows below a 6-row upper region.
  DivisionSpec spec{0.28, 2, false};
  ASSERT_EQ(spec.upper_rows(22), 6u);
  auto p = random_dfconv(rng, 2, 3, spec);
  auto band = random_tensor({2, 8, 5}, rng);
  auto gband = random_tensor({3, 8, 5}, rng);
  std::vector<T64> xs{random_tensor({2, 6, 5}, rng), band, band};
  std::vector<T64> gs{random_tensor({3, 6, 5}, rng), gband, gband};
  auto g = dfconv_backward(concat_rows<double>(xs), p, concat_rows<double>(gs));
  auto single = conv2d_backward(band, p.lower, gband);
  for (std::size_t i = 0; i < single.weights.size(); ++i)
    EXPECT_NEAR(g.lower.weights[i], 2 * single.weights[i], 1e-12);
  for (std::size_t i = 0; i < single.bias.size(); ++i)
    EXPECT_NEAR(g.lower.bias[i], 2 * single.bias[i], 1e-12);
}

namespace {

MultiCueParams<double> random_me(std::mt19937_64& rng, std::size_t c, std::size_t d) {
  auto conv = [&](std::size_t ci) {
    return Conv2DParams<double>{random_tensor({d, ci, 3, 3}, rng), random_tensor({d}, rng), {1, 1}, {1, 1}};
  };
  return {conv(c), conv(d), conv(c), conv(c)};
}

}  // namespace

TEST(MultiCue, ZeroMapsZeroVectors) {
  std::mt19937_64 rng(20);
  auto p = random_me(rng, 4, 5);
  for (auto* cp : {&p.full1, &p.full2, &p.nonmanual, &p.manual}) cp->bias.fill(0);
  auto v = multi_cue_embed(cue_maps(T64({4, 6, 6}), DivisionSpec{0.35, 2, false}), p);
  for (const auto* t : {&v.full, &v.nonmanual, &v.manual}) {
    EXPECT_EQ(t->shape(), (Shape{5}));
    for (double x : t->storage()) EXPECT_EQ(x, 0.0);
  }
}

TEST(MultiCue, CueMapsUseTwoRowMinimum) {
  auto m = cue_maps(T64({4, 6, 6}), DivisionSpec{0.35, 2, false});
  EXPECT_EQ(m.nonmanual.shape(), (Shape{4, 2, 6}));
  EXPECT_EQ(m.manual.shape(), (Shape{4, 4, 6}));
  EXPECT_EQ(m.full.shape(), (Shape{4, 6, 6}));
}

TEST(MultiCue, FullPathMatchesHandComposedChain) {
  std::mt19937_64 rng(21);
  auto p = random_me(rng, 4, 5);
  auto x = random_tensor({4, 6, 6}, rng);
  auto maps = cue_maps(x, DivisionSpec{0.35, 2, false});
  auto v = multi_cue_embed(maps, p);
  auto full = global_avgpool(maxpool2d(relu(conv2d(relu(conv2d(x, p.full1)), p.full2))).output);
  EXPECT_EQ(v.full, full);
  auto nm = global_avgpool(maxpool2d(relu(conv2d(maps.nonmanual, p.nonmanual))).output);
  EXPECT_EQ(v.nonmanual, nm);
  auto man = global_avgpool(maxpool2d(relu(conv2d(maps.manual, p.manual))).output);
  EXPECT_EQ(v.manual, man);
}

TEST(MultiCue, MismatchedDimsRejected) {
  std::mt19937_64 rng(22);
  auto p = random_me(rng, 4, 5);
  p.manual = {random_tensor({3, 4, 3, 3}, rng), random_tensor({3}, rng), {1, 1}, {1, 1}};
  EXPECT_THROW(multi_cue_embed(cue_maps(T64({4, 6, 6}), DivisionSpec{}), p), ShapeError);
}

