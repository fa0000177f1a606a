// tests/test_harness.cpp

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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dfsign/ablate.hpp"
#include "dfsign/corpus.hpp"
#include "dfsign/gradcheck.hpp"
#include "dfsign/keyvalue.hpp"
#include "dfsign/robust.hpp"
#include "dfsign/train.hpp"

using namespace dfsign;
namespace fs = std::filesystem;

namespace {

CorpusSpec tiny_corpus() {
  CorpusSpec s;
  s.vocab = 4;
  s.train_videos = 6;
  s.dev_videos = 3;
  s.test_videos = 3;
  s.glosses_min = 1;
  s.glosses_max = 2;
  s.frames_min = 2;
  s.frames_max = 3;
  s.gap_min = 0;
  s.gap_max = 1;
  s.height = s.width = 24;
  return s;
}

TrainConfig tiny_train() {
  TrainConfig c;
  c.epochs = 2;
  c.batch = 2;
  c.e_warm = 1;
  c.model.stage_channels = {2, 2};
  c.model.cue_dim = 4;
  c.model.bta_hidden = 2;
  c.model.tmc_blocks = 1;
  c.model.tmc_kernel = 3;
  c.model.tmc_hidden = 6;
  c.model.cue_hidden = 4;
  c.model.rnn_hidden = 4;
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dfsign_test_" + name);
  fs::remove_all(p);
  return p;
}

bool same_frames(const Corpus& a, const Corpus& b) {
  for (std::size_t s = 0; s < a.splits.size(); ++s) {
    if (a.splits[s].videos.size() != b.splits[s].videos.size()) return false;
    for (std::size_t i = 0; i < a.splits[s].videos.size(); ++i) {
      const auto &x = a.splits[s].videos[i], &y = b.splits[s].videos[i];
      if (x.id != y.id || x.glosses != y.glosses || !(x.frames == y.frames)) return false;
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// key = value files

TEST(KeyValues, ParsesTypedValuesAndComments) {
  auto kv = KeyValues::parse_string("# header\n  lr = 0.05  # inline\nepochs=7\n\ndplr = off\nname = a b\n");
  EXPECT_DOUBLE_EQ(kv.get("lr", 0.0), 0.05);
  EXPECT_EQ(kv.get("epochs", 0), 7);
  EXPECT_FALSE(kv.get("dplr", true));
  EXPECT_EQ(kv.get("name", std::string()), "a b");
  EXPECT_EQ(kv.get("missing", 3), 3);
  EXPECT_NO_THROW(kv.reject_unknown());
}

TEST(KeyValues, RejectsMalformedInput) {
  EXPECT_THROW(KeyValues::parse_string("no equals sign\n"), DataError);
  EXPECT_THROW(KeyValues::parse_string("a = 1\na = 2\n"), DataError);
  EXPECT_THROW(KeyValues::parse_string(" = 1\n"), DataError);
  auto kv = KeyValues::parse_string("epochs = seven\nflag = maybe\nx = 1.5e\n");
  EXPECT_THROW(kv.get("epochs", 0), DataError);
  EXPECT_THROW(kv.get("flag", false), DataError);
  EXPECT_THROW(kv.get("x", 0.0), DataError);
  EXPECT_THROW(KeyValues::load("/nonexistent/dfsign.cfg"), IoError);
}

TEST(KeyValues, UnknownKeysAreReported) {
  auto kv = KeyValues::parse_string("lr = 0.1\nlearning_rate = 0.2\n");
  kv.get("lr", 0.0);
  EXPECT_THROW(kv.reject_unknown(), DataError);
}

TEST(KeyValues, WriteParseRoundTrip) {
  KeyValues kv;
  kv.set("b", "2");
  kv.set("a", "x y");
  std::ostringstream os;
  kv.write(os);
  auto back = KeyValues::parse_string(os.str());
  EXPECT_EQ(back.entries(), kv.entries());
}

// ---------------------------------------------------------------------------
// Synthetic corpus

TEST(Corpus, GenerationIsDeterministic) {
  auto a = generate_corpus(tiny_corpus()), b = generate_corpus(tiny_corpus());
  EXPECT_TRUE(same_frames(a, b));
  auto other = tiny_corpus();
  other.seed = 2;
  EXPECT_FALSE(same_frames(a, generate_corpus(other)));
}

TEST(Corpus, SingleGlossVideos) {
  auto s = tiny_corpus();
  s.glosses_min = s.glosses_max = 1;
  for (const auto& split : generate_corpus(s).splits)
    for (const auto& v : split.videos) EXPECT_EQ(v.glosses.size(), 1u) << v.id;
}

TEST(Corpus, CountsFollowTheSpecRanges) {
  CorpusSpec s;  // default desk-scale spec
  s.train_videos = 60;
  s.dev_videos = s.test_videos = 10;
  const auto c = generate_corpus(s);
  std::set<std::size_t> lengths;
  for (const auto& split : c.splits) {
    for (const auto& v : split.videos) {
      const std::size_t n = v.glosses.size();
      lengths.insert(n);
      EXPECT_GE(n, std::size_t(s.glosses_min));
      EXPECT_LE(n, std::size_t(s.glosses_max));
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_GE(v.glosses[i], 0);
        EXPECT_LT(v.glosses[i], s.vocab);
        if (i) {
          EXPECT_NE(v.glosses[i], v.glosses[i - 1]) << v.id;
        }
      }
      const std::size_t T = v.frames.dim(0);
      EXPECT_GE(T, n * std::size_t(s.frames_min) + (n + 1) * std::size_t(s.gap_min));
      EXPECT_LE(T, n * std::size_t(s.frames_max) + (n + 1) * std::size_t(s.gap_max));
      EXPECT_EQ(v.frames.shape(), (Shape{T, 3, 48, 48}));
      for (float x : v.frames.storage()) {
        ASSERT_GE(x, 0.0f);
        ASSERT_LE(x, 1.0f);
      }
    }
  }
  EXPECT_EQ(lengths, (std::set<std::size_t>{3, 4, 5}));
  EXPECT_EQ(c.split("train").videos.size(), 60u);
  EXPECT_EQ(c.split("train").videos[0].id, "train_0000");
  EXPECT_THROW(c.split("val"), DataError);
}

TEST(Corpus, GlossPairsShareTheHandAndDifferInTheFace) {
  CorpusSpec s;
  s.noise = 0;
  const render::Layout l(s);
  for (int k = 0; k < kHandGlyphs; ++k) {
    EXPECT_EQ(hand_glyph(2 * k), hand_glyph(2 * k + 1));
    EXPECT_NE(mouth_variant(2 * k), mouth_variant(2 * k + 1));
    Tensor a({3, 48, 48}), b({3, 48, 48});
    const render::Point hand = l.hand_pixel({0.5, 0.5});
    render::draw_face(a, l, mouth_variant(2 * k), {0, 0});
    render::draw_hand(a, l, hand_glyph(2 * k), hand);
    render::draw_face(b, l, mouth_variant(2 * k + 1), {0, 0});
    render::draw_hand(b, l, hand_glyph(2 * k + 1), hand);
    const std::size_t split = std::size_t(l.face_rows);
    EXPECT_TRUE(slice_rows(a, split, 48) == slice_rows(b, split, 48)) << "lower region, glyph " << k;
    EXPECT_FALSE(slice_rows(a, 0, split) == slice_rows(b, 0, split)) << "upper region, glyph " << k;
  }
  // distinct glyphs differ in the lower region
  Tensor a({3, 48, 48}), b({3, 48, 48});
  render::draw_hand(a, l, 0, l.hand_pixel({0.5, 0.5}));
  render::draw_hand(b, l, 1, l.hand_pixel({0.5, 0.5}));
  EXPECT_FALSE(a == b);
}

TEST(Corpus, InvalidSpecsAreRejected) {
  auto s = tiny_corpus();
  s.vocab = 17;
  EXPECT_THROW(s.validate(), ContractError);
  s = tiny_corpus();
  s.height = 12;
  EXPECT_THROW(s.validate(), ContractError);
  s = tiny_corpus();
  s.glosses_min = 3;
  s.glosses_max = 2;
  EXPECT_THROW(s.validate(), ContractError);
  EXPECT_THROW(CorpusSpec::from(KeyValues::parse_string("vocab = 0\n")), ContractError);
}

TEST(Corpus, DiskRoundTrip) {
  const auto dir = scratch("corpus");
  const auto c = generate_corpus(tiny_corpus());
  write_corpus(c, dir);
  EXPECT_TRUE(fs::exists(dir / "manifest.txt"));
  EXPECT_TRUE(fs::exists(dir / "dev.tsv"));
  const auto back = read_corpus(dir);
  EXPECT_TRUE(same_frames(c, back));
  EXPECT_EQ(back.spec.to_kv().entries(), c.spec.to_kv().entries());
  EXPECT_EQ(read_corpus(dir, {"dev"}).splits.size(), 1u);

  std::ifstream in(dir / "train.tsv");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.substr(0, first.find('\t')), "train_0000");

  fs::remove(dir / "test" / "test_0001.tnsr");
  EXPECT_THROW(read_corpus(dir), IoError);
  std::ofstream(dir / "dev.tsv") << "dev_0000\t1 x 2\n";
  EXPECT_THROW(read_split(dir, "dev"), DataError);
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Training

TEST(TrainConfig, KeyValueRoundTrip) {
  auto c = tiny_train();
  c.lr = 0.02;
  c.dplr = false;
  c.ratio = 0.4;
  c.optimizer = "adam";
  const auto kv = c.to_kv();
  const auto back = TrainConfig::from(kv);
  EXPECT_EQ(back.to_kv().entries(), kv.entries());
  EXPECT_EQ(back.model.stage_channels, (std::vector<std::size_t>{2, 2}));
  EXPECT_THROW(TrainConfig::from(KeyValues::parse_string("optimizer = rmsprop\n")), ContractError);
  EXPECT_THROW(TrainConfig::from(KeyValues::parse_string("batch = 0\n")), ContractError);
  EXPECT_THROW(TrainConfig::from(KeyValues::parse_string("ratio = 1.5\n")), ContractError);
}

TEST(Configs, ShippedFilesMatchTheDefaults) {
  const fs::path dir = DFSIGN_CONFIG_DIR;
  auto corpus_kv = KeyValues::load((dir / "corpus.conf").string());
  EXPECT_EQ(CorpusSpec::from(corpus_kv).to_kv().entries(), CorpusSpec{}.to_kv().entries());
  EXPECT_NO_THROW(corpus_kv.reject_unknown());
  auto train_kv = KeyValues::load((dir / "train.conf").string());
  EXPECT_EQ(TrainConfig::from(train_kv).to_kv().entries(), TrainConfig{}.to_kv().entries());
  EXPECT_NO_THROW(train_kv.reject_unknown());
}

TEST(TrainConfig, LearningRateHalves) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(c.lr_at(0), 0.01);
  EXPECT_DOUBLE_EQ(c.lr_at(9), 0.01);
  EXPECT_DOUBLE_EQ(c.lr_at(10), 0.005);
  EXPECT_DOUBLE_EQ(c.lr_at(25), 0.0025);
  c.lr_halve_every = 0;
  EXPECT_DOUBLE_EQ(c.lr_at(30), 0.01);
}

TEST(Trainer, EpochLogCountsEverySample) {
  const auto corpus = generate_corpus(tiny_corpus());
  Trainer t(tiny_train(), corpus.spec);
  std::ostringstream dump;
  const auto l1 = t.run_epoch(corpus.split("train"), &corpus.split("dev"), &dump);
  EXPECT_EQ(l1.epoch, 1);
  EXPECT_EQ(l1.case1 + l1.case2 + l1.skip + l1.infeasible, 6);
  EXPECT_EQ(l1.l_refine, 0.0);  // before warm-up
  EXPECT_GE(l1.dev_wer, 0.0);
  EXPECT_GE(l1.blank_fraction, 0.0);
  EXPECT_LE(l1.blank_fraction, 1.0);
  EXPECT_NEAR(l1.l_total, l1.l_inter + l1.l_intra + l1.l_bta, 1e-3);
  std::size_t lines = 0;
  for (char ch : dump.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 6u);
  std::ostringstream os;
  EpochLog::write_header(os);
  l1.write(os);
  EXPECT_EQ(os.str().substr(0, 6), "epoch\t");
}

TEST(Trainer, InfeasibleTargetsAreSkippedAndCounted) {
  const auto spec = tiny_corpus();
  Trainer t(tiny_train(), spec);
  Split s{"train", {}};
  std::mt19937_64 rng(1);
  // two frames pool to one, which cannot emit three glosses
  s.videos.push_back({"short", {0, 1, 2}, random_tensor<float>({2, 3, 24, 24}, rng, 0.0f, 1.0f)});
  s.videos.push_back({"ok", {1}, random_tensor<float>({4, 3, 24, 24}, rng, 0.0f, 1.0f)});
  const auto log = t.run_epoch(s);
  EXPECT_EQ(log.infeasible, 1);
  EXPECT_EQ(log.case1 + log.case2 + log.skip, 1);
  EXPECT_EQ(log.dev_wer, -1.0);
}

TEST(Trainer, RunsAreDeterministic) {
  const auto corpus = generate_corpus(tiny_corpus());
  auto run = [&] {
    Trainer t(tiny_train(), corpus.spec);
    t.train(corpus.split("train"), nullptr);
    return params_hash(t.model().params);
  };
  EXPECT_EQ(run(), run());
  auto other = tiny_train();
  other.seed = 9;
  Trainer t(other, corpus.spec);
  t.train(corpus.split("train"), nullptr);
  EXPECT_NE(params_hash(t.model().params), run());
}

TEST(Trainer, ParametersChange) {
  const auto corpus = generate_corpus(tiny_corpus());
  Trainer t(tiny_train(), corpus.spec);
  const auto before = params_hash(t.model().params);
  t.run_epoch(corpus.split("train"));
  EXPECT_NE(params_hash(t.model().params), before);
}

class ResumeTest : public ::testing::TestWithParam<const char*> {};

TEST_P(ResumeTest, ResumedTrainingIsBitIdentical) {
  const auto corpus = generate_corpus(tiny_corpus());
  auto cfg = tiny_train();
  cfg.optimizer = GetParam();
  cfg.epochs = 3;
  Trainer straight(cfg, corpus.spec);
  straight.train(corpus.split("train"), nullptr);

  Trainer first(cfg, corpus.spec);
  first.run_epoch(corpus.split("train"));
  first.run_epoch(corpus.split("train"));
  const auto dir = scratch(std::string("ckpt_") + GetParam());
  save_checkpoint(dir, first, corpus.spec);
  auto resumed = resume(load_checkpoint(dir));
  EXPECT_EQ(resumed.epochs_done(), 2);
  EXPECT_EQ(resumed.steps(), first.steps());
  resumed.train(corpus.split("train"), nullptr);
  EXPECT_EQ(resumed.epochs_done(), 3);
  EXPECT_EQ(params_hash(resumed.model().params), params_hash(straight.model().params));
  fs::remove_all(dir);
}

INSTANTIATE_TEST_SUITE_P(Optimizers, ResumeTest, ::testing::Values("sgd", "adam"));

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto corpus = generate_corpus(tiny_corpus());
  auto cfg = tiny_train();
  cfg.dfconv = false;
  Trainer t(cfg, corpus.spec);
  t.run_epoch(corpus.split("train"));
  const auto dir = scratch("ckpt_corrupt");
  save_checkpoint(dir, t, corpus.spec);
  const auto c = load_checkpoint(dir);
  EXPECT_EQ(params_hash(c.model.params), params_hash(t.model().params));
  EXPECT_FALSE(c.config.dfconv);
  EXPECT_EQ(c.corpus.to_kv().entries(), corpus.spec.to_kv().entries());
  const auto e1 = evaluate(t.model(), corpus.split("dev"));
  const auto e2 = evaluate(c.model, corpus.split("dev"));
  EXPECT_EQ(e1.decodes, e2.decodes);

  auto x = tnsr::read(dir / "classifier.b.tnsr");
  x[0] += 1.0f;
  tnsr::write(dir / "classifier.b.tnsr", x);
  EXPECT_THROW(load_checkpoint(dir), DataError);
  tnsr::write(dir / "classifier.b.tnsr", Tensor({1}));
  EXPECT_THROW(load_checkpoint(dir), DataError);
  fs::remove(dir / "classifier.b.tnsr");
  EXPECT_THROW(load_checkpoint(dir), IoError);
  fs::remove_all(dir);
  EXPECT_THROW(load_checkpoint(dir), IoError);
}

TEST(Evaluate, ReportCoversEveryVideo) {
  const auto corpus = generate_corpus(tiny_corpus());
  const auto m = Model<float>::create(tiny_train().model_config(corpus.spec), 3);
  const auto r = evaluate(m, corpus.split("test"));
  ASSERT_EQ(r.report.rows.size(), 3u);
  ASSERT_EQ(r.decodes.size(), 3u);
  EXPECT_EQ(r.report.rows[0].video_id, "test_0000");
  std::size_t ref = 0;
  for (const auto& v : corpus.split("test").videos) ref += v.glosses.size();
  std::size_t total = 0;
  for (const auto& row : r.report.rows) total += row.stats.ref_len;
  EXPECT_EQ(total, ref);
}

// ---------------------------------------------------------------------------
// Robustness protocol

TEST(Robustness, GridHasNineRows) {
  const auto g = robustness_transforms();
  ASSERT_EQ(g.size(), 9u);
  EXPECT_TRUE(g[0].identity());
  EXPECT_EQ(g[1].name, "A");
  EXPECT_EQ(g[8].name, "H");
  for (std::size_t i = 1; i < g.size(); ++i) {
    EXPECT_FALSE(g[i].identity());
    EXPECT_TRUE(std::abs(g[i].shift) == 0.1 || std::abs(g[i].shift) == 0.2);
  }
}

TEST(Robustness, TransformMovesContent) {
  std::mt19937_64 rng(4);
  const auto v = random_tensor<float>({2, 3, 20, 20}, rng, 0.0f, 1.0f);
  EXPECT_TRUE(transform_video(v, {"id", 0, 1}) == v);
  const auto up = transform_video(v, {"up", 0.1, 1});  // 2 rows
  const auto down = transform_video(v, {"down", -0.1, 1});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t x = 0; x < 20; ++x) {
      for (std::size_t y = 0; y < 18; ++y) EXPECT_EQ(up.at(1, c, y, x), v.at(1, c, y + 2, x));
      EXPECT_EQ(up.at(1, c, 19, x), 0.0f);
      for (std::size_t y = 2; y < 20; ++y) EXPECT_EQ(down.at(0, c, y, x), v.at(0, c, y - 2, x));
      EXPECT_EQ(down.at(0, c, 0, x), 0.0f);
    }
  const auto big = transform_video(v, {"big", 0, 2});
  EXPECT_EQ(big.at(0, 0, 10, 10), v.at(0, 0, 10, 10));  // centre is fixed
  EXPECT_EQ(big.at(0, 0, 0, 0), v.at(0, 0, 5, 5));
  const auto small = transform_video(v, {"small", 0, 0.5});
  EXPECT_EQ(small.at(0, 0, 0, 0), 0.0f);
  EXPECT_THROW(transform_video(v, {"bad", 0, 0}), ContractError);
}

TEST(Robustness, ShiftedModeMovesTheRatio) {
  const DivisionSpec d{0.35, 2, false};
  EXPECT_DOUBLE_EQ(division_for(d, {"A", 0.1, 1}, RatioMode::Fixed).ratio, 0.35);
  EXPECT_NEAR(division_for(d, {"A", 0.1, 1}, RatioMode::Shifted).ratio, 0.25, 1e-12);
  EXPECT_NEAR(division_for(d, {"F", -0.2, 1}, RatioMode::Shifted).ratio, 0.55, 1e-12);
  EXPECT_TRUE(division_for(d, {"A", 0.1, 1}, RatioMode::Shifted).clamp);
  EXPECT_FALSE(division_for(d, {"Original", 0, 1}, RatioMode::Shifted).clamp);
  // far outside the frame the boundary is clamped instead of failing
  const DivisionSpec far = division_for(d, {"X", 0.9, 1}, RatioMode::Shifted);
  EXPECT_EQ(far.upper_rows(24, 3, 6), 3u);
  EXPECT_EQ(parse_ratio_mode("shifted"), RatioMode::Shifted);
  EXPECT_THROW(parse_ratio_mode("moved"), ContractError);
}

TEST(Robustness, IdentityRowMatchesPlainEvaluation) {
  const auto corpus = generate_corpus(tiny_corpus());
  const auto m = Model<float>::create(tiny_train().model_config(corpus.spec), 5);
  const Split& dev = corpus.split("dev");
  const double plain = evaluate(m, dev).report.corpus_wer();
  for (auto mode : {RatioMode::Fixed, RatioMode::Shifted}) {
    const auto rows = robustness_eval(m, {&dev}, {robustness_transforms()[0]}, mode);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].wer[0], plain);
  }
}

TEST(Robustness, ShiftedModeCommutesWithPreShiftedFrames) {
  const auto corpus = generate_corpus(tiny_corpus());
  const auto m = Model<float>::create(tiny_train().model_config(corpus.spec), 6);
  const Split& dev = corpus.split("dev");
  const FrameTransform a = robustness_transforms()[1];
  Split shifted = dev;
  for (auto& v : shifted.videos) v.frames = transform_video(v.frames, a);

  const auto moved = m.with_division({m.config.division.ratio - a.shift, m.config.division.groups, true});
  const auto fixed_rows = robustness_eval(m, {&dev}, {a}, RatioMode::Fixed);
  const auto shifted_rows = robustness_eval(m, {&dev}, {a}, RatioMode::Shifted);
  EXPECT_EQ(fixed_rows[0].wer[0], evaluate(m, shifted).report.corpus_wer());
  EXPECT_EQ(shifted_rows[0].wer[0], evaluate(moved, shifted).report.corpus_wer());
  EXPECT_EQ(evaluate(moved, shifted).decodes,
            evaluate(moved, dev, [&](const Tensor& v) { return transform_video(v, a); }).decodes);

  std::ostringstream os;
  write_robustness_table(os, shifted_rows, {"dev"}, RatioMode::Shifted);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "transform\tshift\tscale\tr_mode\tr\tdev_wer");
}

// ---------------------------------------------------------------------------
// Ablation grid

TEST(Ablation, RowsAndSharedConfigurations) {
  const auto rows = ablation_rows(TrainConfig{});
  ASSERT_EQ(rows.size(), 10u);
  std::set<std::string> keys;
  for (const auto& r : rows) keys.insert(ablation_key(r.config));
  EXPECT_EQ(keys.size(), 8u);
  EXPECT_EQ(ablation_key(rows[3].config), ablation_key(rows[5].config));  // +dfconv+bta = no refine loss
  EXPECT_EQ(ablation_key(rows[4].config), ablation_key(rows[9].config));  // full = densify+refine
  EXPECT_EQ(ablation_key(rows[0].config), "000");
  EXPECT_EQ(ablation_key(rows[7].config), "111/01");
}

TEST(Ablation, Median) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), ContractError);
}

TEST(Ablation, TinyGridRunsEveryConfigurationOnce) {
  const auto corpus = generate_corpus(tiny_corpus());
  auto base = tiny_train();
  base.epochs = 1;
  int runs = 0;
  const auto res = run_ablation(base, corpus, 1, [&](const AblationRow&, const RunResult&) { ++runs; });
  EXPECT_EQ(runs, 8);
  std::ostringstream os;
  write_ablation_table(os, res);
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 11u);
  EXPECT_NE(os.str().find("components\tbaseline\t0\t0\t0\t-\t-\t1\t"), std::string::npos);
}
