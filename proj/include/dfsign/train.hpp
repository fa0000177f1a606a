// dfsign/train.hpp

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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dfsign/corpus.hpp"
#include "dfsign/keyvalue.hpp"
#include "dfsign/metrics.hpp"
#include "dfsign/model.hpp"
#include "dfsign/objective.hpp"
#include "dfsign/random.hpp"
#include "dfsign/tnsr.hpp"

namespace dfsign {

struct TrainConfig {
  // optimisation
  std::string optimizer = "sgd";  // sgd (with momentum) or adam
  double lr = 0.01;
  double momentum = 0.9;
  int lr_halve_every = 10;  // epochs; 0 keeps the rate fixed
  double clip_norm = 5;     // global gradient norm bound; 0 disables
  int epochs = 40;
  int batch = 8;
  std::uint64_t seed = 1;
  // objective
  double lambda1 = 1, lambda2 = 1, lambda3 = 1;
  int e_warm = 5;  // first epoch (0-based) with refinement
  // toggles
  bool dfconv = true, dplr = true, bta = true;
  bool densify = true;
  bool refine = true;  // replace wrong glosses with the ground truth
  // division
  double ratio = 0.35;
  int groups = 2;
  // network widths
  ModelConfig model;

  /// Network configuration for frames of the given corpus.
  ModelConfig model_config(const CorpusSpec& corpus) const {
    ModelConfig m = model;
    m.vocab = std::size_t(corpus.vocab);
    m.height = std::size_t(corpus.height);
    m.width = std::size_t(corpus.width);
    m.dfconv = dfconv;
    m.bta = bta;
    m.division = {ratio, std::size_t(groups), false};
    return m;
  }

  double lr_at(int epoch) const {
    return lr_halve_every > 0 ? lr * std::pow(0.5, double(epoch / lr_halve_every)) : lr;
  }

  void validate() const {
    if (epochs < 0 || batch < 1) throw ContractError("train config: epochs >= 0 and batch >= 1 required");
    if (lr <= 0) throw ContractError("train config: lr must be positive");
    if (optimizer != "sgd" && optimizer != "adam")
      throw ContractError("train config: optimizer must be sgd or adam, got '" + optimizer + "'");
    if (groups < 1) throw ContractError("train config: groups must be positive");
    if (!(ratio > 0 && ratio < 1)) throw ContractError("train config: ratio must be in (0, 1)");
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw ContractError("train config: negative loss weight");
  }

  static TrainConfig from(const KeyValues& kv) {
    TrainConfig c;
    c.optimizer = kv.get("optimizer", c.optimizer);
    c.lr = kv.get("lr", c.lr);
    c.momentum = kv.get("momentum", c.momentum);
    c.lr_halve_every = kv.get("lr_halve_every", c.lr_halve_every);
    c.clip_norm = kv.get("clip_norm", c.clip_norm);
    c.epochs = kv.get("epochs", c.epochs);
    c.batch = kv.get("batch", c.batch);
    c.seed = kv.get("seed", c.seed);
    c.lambda1 = kv.get("lambda1", c.lambda1);
    c.lambda2 = kv.get("lambda2", c.lambda2);
    c.lambda3 = kv.get("lambda3", c.lambda3);
    c.e_warm = kv.get("e_warm", c.e_warm);
    c.dfconv = kv.get("dfconv", c.dfconv);
    c.dplr = kv.get("dplr", c.dplr);
    c.bta = kv.get("bta", c.bta);
    c.densify = kv.get("densify", c.densify);
    c.refine = kv.get("refine", c.refine);
    c.ratio = kv.get("ratio", c.ratio);
    c.groups = kv.get("groups", c.groups);
    auto& m = c.model;
    m.cue_dim = kv.get("cue_dim", m.cue_dim);
    m.bta_hidden = kv.get("bta_hidden", m.bta_hidden);
    m.tmc_blocks = kv.get("tmc_blocks", m.tmc_blocks);
    m.tmc_kernel = kv.get("tmc_kernel", m.tmc_kernel);
    m.tmc_hidden = kv.get("tmc_hidden", m.tmc_hidden);
    m.cue_hidden = kv.get("cue_hidden", m.cue_hidden);
    m.rnn_hidden = kv.get("rnn_hidden", m.rnn_hidden);
    if (kv.has("stage_channels")) {
      m.stage_channels.clear();
      std::istringstream ss(kv.get("stage_channels", std::string()));
      std::string tok;
      while (std::getline(ss, tok, ','))
        m.stage_channels.push_back(KeyValues::parse_string("c = " + tok).get<std::size_t>("c", 0));
    }
    c.validate();
    return c;
  }

  KeyValues to_kv() const {
    KeyValues kv;
    auto put = [&](const char* k, auto v) {
      std::ostringstream os;
      if constexpr (std::is_same_v<decltype(v), bool>)
        os << (v ? "true" : "false");
      else if constexpr (std::is_floating_point_v<decltype(v)>)
        os << std::setprecision(17) << v;
      else
        os << v;
      kv.set(k, os.str());
    };
    kv.set("optimizer", optimizer);
    put("lr", lr);
    put("momentum", momentum);
    put("lr_halve_every", lr_halve_every);
    put("clip_norm", clip_norm);
    put("epochs", epochs);
    put("batch", batch);
    put("seed", seed);
    put("lambda1", lambda1);
    put("lambda2", lambda2);
    put("lambda3", lambda3);
    put("e_warm", e_warm);
    put("dfconv", dfconv);
    put("dplr", dplr);
    put("bta", bta);
    put("densify", densify);
    put("refine", refine);
    put("ratio", ratio);
    put("groups", groups);
    put("cue_dim", model.cue_dim);
    put("bta_hidden", model.bta_hidden);
    put("tmc_blocks", model.tmc_blocks);
    put("tmc_kernel", model.tmc_kernel);
    put("tmc_hidden", model.tmc_hidden);
    put("cue_hidden", model.cue_hidden);
    put("rnn_hidden", model.rnn_hidden);
    std::string ch;
    for (std::size_t i = 0; i < model.stage_channels.size(); ++i)
      ch += (i ? "," : "") + std::to_string(model.stage_channels[i]);
    kv.set("stage_channels", ch);
    return kv;
  }
};

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  WerReport report;
  std::vector<FramewiseLabels> decodes;
  double blank_fraction = 0;  // over every decoded frame
};

/// Greedy decoding of the inter-cue head; `transform` is applied to each
/// video's frames first when given.
template <std::floating_point Real>
EvalResult evaluate(const Model<Real>& model, const Split& split,
                    const std::function<Tensor(const Tensor&)>& transform = {}) {
  EvalResult r;
  std::size_t blanks = 0, frames = 0;
  const int blank = model.config.blank();
  for (const auto& v : split.videos) {
    const Tensor x = transform ? transform(v.frames) : v.frames;
    auto tr = forward_pipeline(model, x.template cast<Real>());
    auto decode = greedy_decode(tr.inter_logprobs);
    for (int l : decode) blanks += l == blank;
    frames += decode.size();
    r.report.rows.push_back({v.id, edit_alignment(v.glosses, collapse(decode, blank))});
    r.decodes.push_back(std::move(decode));
  }
  r.blank_fraction = frames ? double(blanks) / double(frames) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0;
  double l_inter = 0, l_intra = 0, l_refine = 0, l_bta = 0, l_total = 0;  // means over trained samples
  double dev_wer = -1;
  double blank_fraction = -1;  // of dev decodes
  int case1 = 0, case2 = 0, skip = 0;  // pseudo-label cases over training samples
  int infeasible = 0;  // samples skipped for infeasible CTC targets

  static void write_header(std::ostream& os) {
    os << "epoch\tlr\tL_inter\tL_intra\tL_refine\tL_bta\tL_total\tdev_wer\tblank_frac\tcase1\tcase2\tskip\tinfeasible\n";
  }
  void write(std::ostream& os) const {
    const auto flags = os.flags();
    os << epoch << '\t' << std::setprecision(6) << lr << '\t' << std::fixed << std::setprecision(4) << l_inter << '\t'
       << l_intra << '\t' << l_refine << '\t' << l_bta << '\t' << l_total << '\t' << dev_wer << '\t'
       << blank_fraction << '\t' << case1 << '\t' << case2 << '\t' << skip << '\t' << infeasible << '\n';
    os.flags(flags);
  }
};

namespace detail {

template <std::floating_point Real>
double squared_norm(const ModelParams<Real>& g) {
  double s = 0;
  for_each_param(g, [&](const std::string&, const BasicTensor<Real>& t) {
    for (Real v : t.storage()) s += double(v) * double(v);
  });
  return s;
}

}  // namespace detail

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const CorpusSpec& corpus)
      : cfg_(cfg), model_(Model<float>::create(cfg.model_config(corpus), cfg.seed)),
        velocity_(zeros_like(model_.params)), second_(zeros_like(model_.params)) {
    cfg_.validate();
  }

  const TrainConfig& config() const { return cfg_; }
  const Model<float>& model() const { return model_; }
  Model<float>& model() { return model_; }
  const ModelParams<float>& velocity() const { return velocity_; }
  ModelParams<float>& velocity() { return velocity_; }
  /// Second-moment estimates; stays zero for SGD.
  const ModelParams<float>& second_moment() const { return second_; }
  ModelParams<float>& second_moment() { return second_; }
  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t s) { steps_ = s; }
  int epochs_done() const { return epoch_; }
  void set_epochs_done(int e) { epoch_ = e; }

  /// One pass over `train` in a seed- and epoch-determined order, then an
  /// evaluation on `dev` when given. `dpl_dump` receives one line per
  /// training sample when set.
  EpochLog run_epoch(const Split& train, const Split* dev = nullptr, std::ostream* dpl_dump = nullptr) {
    EpochLog log;
    log.epoch = epoch_ + 1;
    log.lr = cfg_.lr_at(epoch_);
    ObjectiveOptions opt{cfg_.lambda1, cfg_.lambda2, cfg_.lambda3, cfg_.dplr && epoch_ >= cfg_.e_warm,
                         {cfg_.densify, cfg_.refine}};

    std::vector<std::size_t> order(train.videos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(cfg_.seed * 7919ULL + std::uint64_t(epoch_));
    shuffle(order, rng);

    std::size_t trained = 0;
    for (std::size_t b = 0; b < order.size(); b += std::size_t(cfg_.batch)) {
      auto grads = zeros_like(model_.params);
      int in_batch = 0;
      for (std::size_t i = b; i < std::min(order.size(), b + std::size_t(cfg_.batch)); ++i) {
        const Video& v = train.videos[order[i]];
        auto tr = forward_pipeline(model_, v.frames);
        SampleObjective<float> s;
        try {
          s = sample_objective(tr, v.glosses, opt);
        } catch (const InfeasibleTargetError&) {
          ++log.infeasible;
          continue;
        }
        backward_pipeline(model_, tr, s.grads, grads);
        ++in_batch;
        ++trained;
        log.l_inter += s.losses.l_inter;
        log.l_intra += s.losses.l_intra;
        log.l_refine += s.losses.l_refine;
        log.l_bta += s.losses.l_bta;
        log.l_total += s.total;
        const bool labelled = !s.pseudo_label.labels.empty();
        log.case1 += labelled && s.pseudo_label.kind == DplrCase::Case1;
        log.case2 += labelled && s.pseudo_label.kind == DplrCase::Case2;
        log.skip += !labelled;
        if (dpl_dump) {
          PseudoLabel shown = s.pseudo_label;
          if (!labelled) shown.kind = DplrCase::Skip;
          write_dpl_line(*dpl_dump, v.id, shown);
        }
      }
      if (in_batch > 0) step(grads, float(1.0 / in_batch), float(log.lr));
    }
    if (trained > 0)
      for (double* x : {&log.l_inter, &log.l_intra, &log.l_refine, &log.l_bta, &log.l_total}) *x /= double(trained);
    ++epoch_;
    if (dev) {
      auto e = evaluate(model_, *dev);
      log.dev_wer = e.report.corpus_wer();
      log.blank_fraction = e.blank_fraction;
    }
    return log;
  }

  /// Runs the remaining epochs; `on_epoch` sees every log line.
  void train(const Split& train, const Split* dev, const std::function<void(const EpochLog&)>& on_epoch = {}) {
    while (epoch_ < cfg_.epochs) {
      auto log = run_epoch(train, dev);
      if (on_epoch) on_epoch(log);
    }
  }

 private:
  void step(ModelParams<float>& grads, float scale, float lr) {
    double norm = std::sqrt(detail::squared_norm(grads)) * scale;
    if (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) scale *= float(cfg_.clip_norm / norm);
    ++steps_;
    std::vector<Tensor*> gs, ss;
    for_each_param(grads, [&](const std::string&, Tensor& t) { gs.push_back(&t); });
    for_each_param(second_, [&](const std::string&, Tensor& t) { ss.push_back(&t); });
    const bool adam = cfg_.optimizer == "adam";
    const float mu = float(cfg_.momentum);
    // Adam with beta1 = momentum, beta2 = 0.999
    const double b2 = 0.999;
    const float c1 = adam ? float(1.0 / (1.0 - std::pow(double(mu), double(steps_)))) : 1.0f;
    const float c2 = adam ? float(1.0 / (1.0 - std::pow(b2, double(steps_)))) : 1.0f;
    std::size_t k = 0;
    for_each_param_pair(model_.params, velocity_, [&](const std::string&, Tensor& pt, Tensor& vt) {
      auto p = pt.data();
      auto v = vt.data();
      auto g = gs[k]->data();
      auto m2 = ss[k++]->data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const float gi = scale * g[i];
        if (adam) {
          v[i] = mu * v[i] + (1 - mu) * gi;
          m2[i] = float(b2) * m2[i] + float(1 - b2) * gi * gi;
          p[i] -= lr * (v[i] * c1) / (std::sqrt(m2[i] * c2) + 1e-8f);
        } else {
          v[i] = mu * v[i] + gi;
          p[i] -= lr * v[i];
        }
      }
    });
  }

  TrainConfig cfg_;
  Model<float> model_;
  ModelParams<float> velocity_;
  ModelParams<float> second_;
  int epoch_ = 0;
  std::uint64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: a directory with one TNSR file per parameter, the optimiser
// state under velocity/ and second/, and manifest.txt.

/// FNV-1a over parameter names and their TNSR encodings, in traversal order.
template <std::floating_point Real>
std::uint64_t params_hash(const ModelParams<Real>& p) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::string& bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for_each_param(p, [&](const std::string& name, const BasicTensor<Real>& t) {
    mix(name);
    mix(tnsr::encode(t.template cast<float>()));
  });
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct Checkpoint {
  TrainConfig config;
  CorpusSpec corpus;
  int epochs_done = 0;
  std::uint64_t steps = 0;
  Model<float> model;
  ModelParams<float> velocity;
  ModelParams<float> second;
};

inline void save_checkpoint(const std::filesystem::path& dir, const Trainer& t, const CorpusSpec& corpus) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "velocity", ec);
  if (!ec) fs::create_directories(dir / "second", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto kv = t.config().to_kv();
  const auto corpus_kv = corpus.to_kv();
  for (const auto& [k, v] : corpus_kv.entries()) kv.set("corpus." + k, v);
  kv.set("epochs_done", std::to_string(t.epochs_done()));
  kv.set("steps", std::to_string(t.steps()));
  kv.set("params_hash", hex64(params_hash(t.model().params)));
  for_each_param(t.model().params, [&](const std::string& name, const Tensor& x) {
    kv.set("param." + name, shape_str(x.shape()));
    tnsr::write((dir / (name + ".tnsr")).string(), x);
  });
  for_each_param(t.velocity(), [&](const std::string& name, const Tensor& x) {
    tnsr::write((dir / "velocity" / (name + ".tnsr")).string(), x);
  });
  for_each_param(t.second_moment(), [&](const std::string& name, const Tensor& x) {
    tnsr::write((dir / "second" / (name + ".tnsr")).string(), x);
  });
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw IoError("cannot write " + (dir / "manifest.txt").string());
  kv.write(m);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  auto kv = KeyValues::load((dir / "manifest.txt").string());
  KeyValues train_kv, corpus_kv;
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("corpus.", 0) == 0)
      corpus_kv.set(k.substr(7), v);
    else if (k.rfind("param.", 0) != 0 && k != "epochs_done" && k != "steps" && k != "params_hash")
      train_kv.set(k, v);
  }
  Checkpoint c{TrainConfig::from(train_kv), CorpusSpec::from(corpus_kv), kv.get("epochs_done", 0),
               kv.get<std::uint64_t>("steps", 0), {}, {}, {}};
  c.model = Model<float>::create(c.config.model_config(c.corpus), c.config.seed);
  c.velocity = zeros_like(c.model.params);
  c.second = zeros_like(c.model.params);
  auto load = [&](ModelParams<float>& p, const std::filesystem::path& base) {
    for_each_param(p, [&](const std::string& name, Tensor& x) {
      auto t = tnsr::read((base / (name + ".tnsr")).string());
      if (t.shape() != x.shape())
        throw DataError("checkpoint tensor " + name + " has shape " + shape_str(t.shape()) + ", expected " +
                        shape_str(x.shape()));
      x = std::move(t);
    });
  };
  load(c.model.params, dir);
  load(c.velocity, dir / "velocity");
  load(c.second, dir / "second");
  const std::string want = kv.get("params_hash", std::string());
  if (!want.empty() && want != hex64(params_hash(c.model.params)))
    throw DataError("checkpoint " + dir.string() + ": parameter hash mismatch");
  return c;
}

/// Trainer positioned where a checkpoint left off.
inline Trainer resume(const Checkpoint& c) {
  Trainer t(c.config, c.corpus);
  t.model() = c.model;
  t.velocity() = c.velocity;
  t.second_moment() = c.second;
  t.set_epochs_done(c.epochs_done);
  t.set_steps(c.steps);
  return t;
}

}  // namespace dfsign
