// tests/test_gradients.cpp

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

#include "op_checks.hpp"

namespace {

class OpGradient : public ::testing::TestWithParam<op_checks::OpCheck> {};

TEST_P(OpGradient, CentralDifferenceOnEverySeed) {
  const auto& c = GetParam();
  for (int seed = 0; seed < testutil::kGradSeeds; ++seed) {
    auto rep = c.run(seed);
    EXPECT_LE(rep.max_relative_error, testutil::kGradTol) << c.name << " seed " << seed;
    EXPECT_TRUE(op_checks::passes(c, rep)) << c.name << " seed " << seed << " kinks " << rep.skipped_kinks;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(op_checks::all()),
                         [](const auto& info) { return info.param.name; });

}  // namespace
