// tools/dfsign.cpp

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

// Command-line driver: corpus generation, training, evaluation, ablations and
// the robustness protocol. Exit status 0 on success, 1 on usage errors, 2 on
// bad data or I/O failures.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dfsign/ablate.hpp"
#include "dfsign/corpus.hpp"
#include "dfsign/keyvalue.hpp"
#include "dfsign/metrics.hpp"
#include "dfsign/robust.hpp"
#include "dfsign/train.hpp"

namespace fs = std::filesystem;
using namespace dfsign;

namespace {

/// stdout, or the file named by `path` when it is non-empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

TrainConfig load_train_config(const std::string& path) {
  auto kv = KeyValues::load(path);
  auto c = TrainConfig::from(kv);
  kv.reject_unknown();
  return c;
}

void check_compatible(const CorpusSpec& trained, const CorpusSpec& corpus) {
  if (trained.vocab != corpus.vocab || trained.height != corpus.height || trained.width != corpus.width)
    throw DataError("checkpoint was trained on vocab " + std::to_string(trained.vocab) + " and " +
                    std::to_string(trained.height) + "x" + std::to_string(trained.width) +
                    " frames; corpus has vocab " + std::to_string(corpus.vocab) + " and " +
                    std::to_string(corpus.height) + "x" + std::to_string(corpus.width));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

int cmd_gen(const std::string& spec_path, const std::string& out) {
  CorpusSpec spec;
  if (!spec_path.empty()) {
    auto kv = KeyValues::load(spec_path);
    spec = CorpusSpec::from(kv);
    kv.reject_unknown();
  }
  const auto corpus = generate_corpus(spec);
  write_corpus(corpus, out);
  for (const auto& s : corpus.splits) std::cout << s.name << '\t' << s.videos.size() << '\n';
  return 0;
}

int cmd_train(const std::string& config, const std::string& corpus_dir, const std::string& out, bool resume_run,
              const std::string& dpl_dump) {
  const auto corpus = read_corpus(corpus_dir, {"train", "dev"});
  const auto cfg = load_train_config(config);
  std::unique_ptr<Trainer> t;
  if (resume_run && fs::exists(fs::path(out) / "manifest.txt")) {
    auto ckpt = load_checkpoint(out);
    check_compatible(ckpt.corpus, corpus.spec);
    // only the epoch budget may change between a run and its continuation
    const auto want = cfg.to_kv(), have = ckpt.config.to_kv();
    for (const auto& [key, value] : want.entries()) {
      if (key == "epochs") continue;
      if (have.get(key, std::string()) != value)
        throw DataError("cannot resume " + out + ": config key " + key + " differs from the checkpoint");
    }
    ckpt.config.epochs = cfg.epochs;
    t = std::make_unique<Trainer>(resume(ckpt));
  } else {
    t = std::make_unique<Trainer>(cfg, corpus.spec);
  }
  std::unique_ptr<std::ofstream> dump;
  if (!dpl_dump.empty()) {
    dump = std::make_unique<std::ofstream>(dpl_dump);
    if (!*dump) throw IoError("cannot write " + dpl_dump);
  }
  const auto log_path = fs::path(out) / "train_log.tsv";
  fs::create_directories(out);
  const bool fresh = !resume_run || !fs::exists(log_path);
  std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot write " + log_path.string());
  if (fresh) EpochLog::write_header(log);
  EpochLog::write_header(std::cout);
  while (t->epochs_done() < t->config().epochs) {
    const auto l = t->run_epoch(corpus.split("train"), &corpus.split("dev"), dump.get());
    l.write(std::cout);
    l.write(log);
    log.flush();
    save_checkpoint(out, *t, corpus.spec);
  }
  if (t->epochs_done() == 0) save_checkpoint(out, *t, corpus.spec);
  std::cerr << "checkpoint " << out << " hash " << hex64(params_hash(t->model().params)) << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& corpus_dir, const std::string& split,
             const std::string& out) {
  const auto ckpt = load_checkpoint(ckpt_dir);
  const auto corpus = read_corpus(corpus_dir, {split});
  check_compatible(ckpt.corpus, corpus.spec);
  const auto r = evaluate(ckpt.model, corpus.split(split));
  Output o(out);
  write_wer_report(o.stream(), r.report);
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& corpus_dir, int seeds, const std::string& out) {
  const auto base = load_train_config(config);
  const auto corpus = read_corpus(corpus_dir);
  const auto res = run_ablation(base, corpus, seeds, [](const AblationRow& row, const RunResult& r) {
    std::cerr << "trained " << ablation_key(row.config) << " seed " << r.seed << ": dev " << r.dev_wer << " test "
              << r.test_wer << '\n';
  });
  Output o(out);
  write_ablation_table(o.stream(), res);
  return 0;
}

int cmd_robust(const std::string& ckpt_dir, const std::string& corpus_dir, const std::string& mode,
               const std::string& splits, const std::string& out) {
  const auto ckpt = load_checkpoint(ckpt_dir);
  const auto names = split_list(splits);
  if (names.empty()) throw ContractError("no splits given");
  const auto corpus = read_corpus(corpus_dir, names);
  check_compatible(ckpt.corpus, corpus.spec);
  std::vector<const Split*> ss;
  for (const auto& n : names) ss.push_back(&corpus.split(n));
  const auto m = parse_ratio_mode(mode);
  const auto rows = robustness_eval(ckpt.model, ss, robustness_transforms(), m);
  Output o(out);
  write_robustness_table(o.stream(), rows, names, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divide-and-focus sign recognition toolkit"};
  app.require_subcommand(1);

  std::string spec, out, config, corpus, ckpt, split = "dev", mode, splits = "dev,test", dpl_dump;
  bool resume_run = false;
  int seeds = 5;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--spec", spec, "corpus spec file (key = value); defaults when omitted")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint directory");
  train->add_option("--config", config, "training config file")->required()->check(CLI::ExistingFile);
  train->add_option("--corpus", corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out, "checkpoint directory")->required();
  train->add_flag("--resume", resume_run, "continue from the checkpoint in --out when present");
  train->add_option("--dpl-dump", dpl_dump, "write per-sample pseudo-labels of every epoch to this file");

  auto* eval = app.add_subcommand("eval", "word error rate report of a checkpoint");
  eval->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--corpus", corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", split, "split to evaluate")->capture_default_str();
  eval->add_option("--out", out, "report file (stdout when omitted)");

  auto* ablate = app.add_subcommand("ablate", "component and pseudo-label ablation tables");
  ablate->add_option("--config", config, "base training config file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--corpus", corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--seeds", seeds, "seeds per configuration")->capture_default_str()->check(CLI::PositiveNumber);
  ablate->add_option("--out", out, "table file (stdout when omitted)");

  auto* robust = app.add_subcommand("robust", "WER under vertical translation and scaling");
  robust->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  robust->add_option("--corpus", corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  robust->add_option("--r-mode", mode, "fixed or shifted division ratio")
      ->required()
      ->check(CLI::IsMember({"fixed", "shifted"}));
  robust->add_option("--splits", splits, "comma-separated splits")->capture_default_str();
  robust->add_option("--out", out, "table file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(spec, out);
    if (*train) return cmd_train(config, corpus, out, resume_run, dpl_dump);
    if (*eval) return cmd_eval(ckpt, corpus, split, out);
    if (*ablate) return cmd_ablate(config, corpus, seeds, out);
    if (*robust) return cmd_robust(ckpt, corpus, mode, splits, out);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
