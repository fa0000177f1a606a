// dfsign/ablate.hpp

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

// Component and pseudo-label design ablations. Rows that share a
// configuration are trained once per seed.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "dfsign/corpus.hpp"
#include "dfsign/train.hpp"

namespace dfsign {

struct AblationRow {
  std::string table;  // "components" or "pseudo_label"
  std::string label;
  TrainConfig config;
};

/// Toggle settings that identify a configuration within an ablation.
inline std::string ablation_key(const TrainConfig& c) {
  auto b = [](bool v) { return v ? '1' : '0'; };
  std::string k{b(c.dfconv), b(c.dplr), b(c.bta)};
  if (c.dplr) k += std::string{'/', b(c.densify), b(c.refine)};
  return k;
}

inline std::vector<AblationRow> ablation_rows(const TrainConfig& base) {
  auto with = [&](bool dfconv, bool dplr, bool bta, bool densify = true, bool refine = true) {
    TrainConfig c = base;
    c.dfconv = dfconv;
    c.dplr = dplr;
    c.bta = bta;
    c.densify = densify;
    c.refine = refine;
    return c;
  };
  return {
      {"components", "baseline", with(false, false, false)},
      {"components", "+dfconv", with(true, false, false)},
      {"components", "+dfconv+dplr", with(true, true, false)},
      {"components", "+dfconv+bta", with(true, false, true)},
      {"components", "full", with(true, true, true)},
      {"pseudo_label", "no_refine_loss", with(true, false, true)},
      {"pseudo_label", "raw", with(true, true, true, false, false)},
      {"pseudo_label", "refine_only", with(true, true, true, false, true)},
      {"pseudo_label", "densify_only", with(true, true, true, true, false)},
      {"pseudo_label", "densify+refine", with(true, true, true, true, true)},
  };
}

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<EpochLog> log;
  double dev_wer = 0, test_wer = 0;
  double dev_blank_fraction = 0;
  std::uint64_t hash = 0;
  Model<float> model;
};

/// Trains one configuration from scratch and evaluates it on dev and test.
inline RunResult train_and_evaluate(const TrainConfig& cfg, const Corpus& corpus,
                                    const std::function<void(const EpochLog&)>& on_epoch = {}) {
  Trainer t(cfg, corpus.spec);
  const Split& dev = corpus.split("dev");
  RunResult r;
  r.seed = cfg.seed;
  t.train(corpus.split("train"), &dev, [&](const EpochLog& l) {
    r.log.push_back(l);
    if (on_epoch) on_epoch(l);
  });
  const auto d = evaluate(t.model(), dev);
  r.dev_wer = d.report.corpus_wer();
  r.dev_blank_fraction = d.blank_fraction;
  r.test_wer = evaluate(t.model(), corpus.split("test")).report.corpus_wer();
  r.hash = params_hash(t.model().params);
  r.model = t.model();
  return r;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

struct AblationResult {
  std::vector<AblationRow> rows;
  std::map<std::string, std::vector<RunResult>> runs;  // by ablation_key, one per seed

  const std::vector<RunResult>& runs_for(const TrainConfig& c) const {
    auto it = runs.find(ablation_key(c));
    if (it == runs.end()) throw ContractError("no ablation runs for configuration " + ablation_key(c));
    return it->second;
  }
  double median_of(const TrainConfig& c, double RunResult::*field) const {
    std::vector<double> v;
    for (const auto& r : runs_for(c)) v.push_back(r.*field);
    return median(v);
  }
};

/// Trains every distinct row configuration for seeds base.seed .. base.seed
/// + seeds - 1. `progress` is told about each finished run.
inline AblationResult run_ablation(
    const TrainConfig& base, const Corpus& corpus, int seeds,
    const std::function<void(const AblationRow&, const RunResult&)>& progress = {}) {
  if (seeds < 1) throw ContractError("ablation needs at least one seed");
  AblationResult res;
  res.rows = ablation_rows(base);
  for (const auto& row : res.rows) {
    auto& runs = res.runs[ablation_key(row.config)];
    if (!runs.empty()) continue;
    for (int s = 0; s < seeds; ++s) {
      TrainConfig c = row.config;
      c.seed = base.seed + std::uint64_t(s);
      runs.push_back(train_and_evaluate(c, corpus));
      if (progress) progress(row, runs.back());
    }
  }
  return res;
}

inline void write_ablation_table(std::ostream& os, const AblationResult& res) {
  const auto flags = os.flags();
  os << "table\trow\tdfconv\tdplr\tbta\tdensify\trefine\tseeds\tdev_wer\ttest_wer\tdev_blank_frac\n";
  for (const auto& row : res.rows) {
    const auto& c = row.config;
    auto flag = [](bool v) { return v ? "1" : "0"; };
    os << row.table << '\t' << row.label << '\t' << flag(c.dfconv) << '\t' << flag(c.dplr) << '\t' << flag(c.bta)
       << '\t' << (c.dplr ? flag(c.densify) : "-") << '\t' << (c.dplr ? flag(c.refine) : "-") << '\t'
       << res.runs_for(c).size() << '\t' << std::fixed << std::setprecision(4)
       << res.median_of(c, &RunResult::dev_wer) << '\t' << res.median_of(c, &RunResult::test_wer) << '\t'
       << res.median_of(c, &RunResult::dev_blank_fraction) << '\n';
  }
  os.flags(flags);
}

}  // namespace dfsign
