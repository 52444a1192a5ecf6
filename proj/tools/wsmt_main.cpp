// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wsmt/bleu.hpp"
#include "wsmt/bpe.hpp"
#include "wsmt/checkpoint.hpp"
#include "wsmt/config.hpp"
#include "wsmt/corpus.hpp"
#include "wsmt/exact.hpp"
#include "wsmt/logging.hpp"
#include "wsmt/model.hpp"
#include "wsmt/parallel.hpp"
#include "wsmt/report.hpp"
#include "wsmt/significance.hpp"
#include "wsmt/synth.hpp"
#include "wsmt/train.hpp"
#include "wsmt/version.hpp"
#include "wsmt/wakesleep.hpp"

namespace {

using namespace wsmt;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Options shared by every experiment subcommand.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--set", c.sets, "config override, key=value; repeatable");
  cmd->add_option("--seed", c.seed, "run seed (run.seed)");
  cmd->add_option("--workers", c.workers, "worker threads (run.workers)");
}

ConfigMap resolve_config(const CommonOpts& c) {
  ConfigMap cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  apply_overrides(cfg, c.sets);
  if (c.seed.has_value()) cfg["run.seed"] = std::to_string(*c.seed);
  if (c.workers.has_value()) cfg["run.workers"] = std::to_string(*c.workers);
  return cfg;
}

std::uint64_t require_seed(const ConfigMap& cfg) {
  if (!has_key(cfg, "run.seed")) throw std::runtime_error("config: run.seed is required");
  return get_u64(cfg, "run.seed", 0);
}

int resolve_workers(const ConfigMap& cfg) {
  int workers = get_int(cfg, "run.workers", default_workers());
  if (workers < 1) throw std::runtime_error("config: run.workers must be positive");
  return workers;
}

// Records checksums for every data.* path plus any extra files, stamps the
// code version, and saves; emits the record to the log when path is empty.
void write_manifest(ConfigMap cfg, const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& extra_files = {}) {
  cfg["code.version"] = kVersion;
  std::vector<std::pair<std::string, std::string>> files = extra_files;
  for (const auto& [key, value] : cfg)
    if (key.rfind("data.", 0) == 0 && !value.empty()) files.emplace_back(key, value);
  for (const auto& [key, file] : files) cfg["checksum." + key] = hex64(file_hash(file));
  if (path.empty()) {
    log::Fields fields;
    for (const auto& [k, v] : cfg) fields.emplace_back(k, v);
    log::info("manifest", fields);
    return;
  }
  save_config(cfg, path);
}

TrainHyper hyper_from(const ConfigMap& cfg) {
  TrainHyper h;
  h.batch_size = get_int(cfg, "train.batch_size", h.batch_size);
  h.dropout_prob = get_double(cfg, "train.dropout", h.dropout_prob);
  h.l2_weight = get_double(cfg, "train.l2", h.l2_weight);
  h.clip_norm = get_double(cfg, "train.clip_norm", h.clip_norm);
  h.max_epochs = get_int(cfg, "train.max_epochs", h.max_epochs);
  h.max_len = get_int(cfg, "train.max_len", h.max_len);
  h.adam.alpha = get_double(cfg, "train.alpha", h.adam.alpha);
  h.adam.beta1 = get_double(cfg, "train.beta1", h.adam.beta1);
  h.adam.beta2 = get_double(cfg, "train.beta2", h.adam.beta2);
  h.adam.eps = get_double(cfg, "train.eps", h.adam.eps);
  return h;
}

void hyper_into(const TrainHyper& h, ConfigMap& cfg) {
  cfg["train.batch_size"] = std::to_string(h.batch_size);
  cfg["train.dropout"] = fmt6(h.dropout_prob);
  cfg["train.l2"] = log::str(h.l2_weight);
  cfg["train.clip_norm"] = fmt6(h.clip_norm);
  cfg["train.max_epochs"] = std::to_string(h.max_epochs);
  cfg["train.max_len"] = std::to_string(h.max_len);
  cfg["train.alpha"] = log::str(h.adam.alpha);
  cfg["train.beta1"] = log::str(h.adam.beta1);
  cfg["train.beta2"] = log::str(h.adam.beta2);
  cfg["train.eps"] = log::str(h.adam.eps);
}

ModelConfig model_config_from(const ConfigMap& cfg, const Vocabulary& src,
                              const Vocabulary& trg, Direction dir) {
  ModelConfig mc = make_model_config(src, trg, dir, get_int(cfg, "model.embed_dim", 32),
                                     get_int(cfg, "model.hidden_dim", 64),
                                     get_int(cfg, "model.max_len", 30));
  mc.attn_dim = get_int(cfg, "model.attn_dim", mc.attn_dim);
  return mc;
}

void model_config_into(const ModelConfig& mc, ConfigMap& cfg) {
  cfg["model.embed_dim"] = std::to_string(mc.embed_dim);
  cfg["model.hidden_dim"] = std::to_string(mc.hidden_dim);
  cfg["model.attn_dim"] = std::to_string(mc.attn_dim);
  cfg["model.max_len"] = std::to_string(mc.max_len);
}

// Fills in the conventional file names of a generated task directory for any
// data.* key not set explicitly.
void apply_data_dir(ConfigMap& cfg, const std::string& dir) {
  auto fill = [&](const char* key, const char* name) {
    if (!has_key(cfg, key)) cfg[key] = dir + "/" + name;
  };
  fill("data.train_src", "train.src");
  fill("data.train_trg", "train.trg");
  fill("data.dev_src", "dev.src");
  fill("data.dev_trg", "dev.trg");
  fill("data.test_src", "test.src");
  fill("data.test_trg", "test.trg");
  fill("data.mono_src", "mono.src");
  fill("data.mono_trg", "mono.trg");
  fill("data.vocab_src", "vocab.src");
  fill("data.vocab_trg", "vocab.trg");
}

Vocabulary side_vocabulary(const ConfigMap& cfg, const char* vocab_key,
                           const std::vector<std::string>& fallback_corpora) {
  if (has_key(cfg, vocab_key)) return Vocabulary::load(get_string(cfg, vocab_key));
  std::vector<std::string> present;
  for (const auto& p : fallback_corpora)
    if (!p.empty()) present.push_back(p);
  if (present.empty())
    throw std::runtime_error(std::string("config: ") + vocab_key +
                             " is required when no corpora are given");
  return build_vocabulary(present);
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
  std::string task = task_kind_name(TaskKind::SubstitutionCipher);
  TaskSpec spec;
  std::string out_dir;
};

void run_synth(const SynthOpts& o) {
  TaskSpec spec = o.spec;
  spec.kind = task_kind_from_name(o.task);
  log::info("synth", {{"task", o.task}, {"out", o.out_dir}});
  GeneratedTask task = generate_task(spec);
  write_task(task, spec, o.out_dir);
  ConfigMap manifest = load_config(o.out_dir + "/manifest.txt");
  manifest["code.version"] = kVersion;
  save_config(manifest, o.out_dir + "/manifest.txt");
}

// ------------------------------------------------------------ bpe-learn ----

struct BpeLearnOpts {
  std::vector<std::string> inputs;
  int merges = 200;
  std::string out;
  std::string vocab_out;
  std::string manifest;
};

void run_bpe_learn(const BpeLearnOpts& o) {
  Vocabulary word_vocab = build_vocabulary(o.inputs);
  std::vector<Monotext> corpora;
  corpora.reserve(o.inputs.size());
  for (const auto& path : o.inputs)
    corpora.push_back(load_monotext(path, word_vocab, OovPolicy::Strict));
  MergeTable merges = learn_bpe(corpora, o.merges);
  save_merges(merges, o.out);
  if (!o.vocab_out.empty()) subword_vocabulary(corpora, merges).save(o.vocab_out);
  ConfigMap cfg;
  cfg["bpe.merges"] = std::to_string(o.merges);
  cfg["bpe.out"] = o.out;
  for (std::size_t i = 0; i < o.inputs.size(); ++i)
    cfg["data.in" + std::to_string(i)] = o.inputs[i];
  write_manifest(std::move(cfg), o.manifest.empty() ? o.out + ".manifest" : o.manifest);
}

// ------------------------------------------------------------ bpe-apply ----

struct BpeApplyOpts {
  std::string merges;
  std::string in;
  std::string out;
  bool undo = false;
  std::string manifest;
};

void run_bpe_apply(const BpeApplyOpts& o) {
  MergeTable table = load_merges(o.merges);
  std::vector<std::string> lines = read_lines(o.in);
  for (auto& line : lines)
    line = o.undo ? undo_bpe_line(line, table.word_end_marker) : apply_bpe_line(line, table);
  write_lines(lines, o.out);
  ConfigMap cfg;
  cfg["bpe.table"] = o.merges;
  cfg["bpe.undo"] = o.undo ? "true" : "false";
  cfg["data.in"] = o.in;
  write_manifest(std::move(cfg), o.manifest.empty() ? o.out + ".manifest" : o.manifest);
}

// ---------------------------------------------------------------- train ----

struct TrainOpts {
  CommonOpts common;
  std::string train_src, train_trg, dev_src, dev_trg;
  std::string vocab_src, vocab_trg;
  std::string direction = "forward";
  std::string out;
};

void run_train(const TrainOpts& o) {
  ConfigMap cfg = resolve_config(o.common);
  auto path_opt = [&](const char* key, const std::string& flag) {
    if (!flag.empty()) cfg[key] = flag;
    return get_string(cfg, key, "");
  };
  std::string train_src = path_opt("data.train_src", o.train_src);
  std::string train_trg = path_opt("data.train_trg", o.train_trg);
  std::string dev_src = path_opt("data.dev_src", o.dev_src);
  std::string dev_trg = path_opt("data.dev_trg", o.dev_trg);
  if (!o.vocab_src.empty()) cfg["data.vocab_src"] = o.vocab_src;
  if (!o.vocab_trg.empty()) cfg["data.vocab_trg"] = o.vocab_trg;
  if (train_src.empty() || train_trg.empty())
    throw std::runtime_error("train: training corpus paths are required");

  Vocabulary vs = side_vocabulary(cfg, "data.vocab_src", {train_src, dev_src});
  Vocabulary vt = side_vocabulary(cfg, "data.vocab_trg", {train_trg, dev_trg});
  Bitext train = load_bitext(train_src, train_trg, vs, vt);
  Bitext dev;
  dev.src_vocab = vs;
  dev.trg_vocab = vt;
  if (!dev_src.empty() && !dev_trg.empty()) dev = load_bitext(dev_src, dev_trg, vs, vt);

  Direction dir = direction_from_name(get_string(cfg, "model.direction", o.direction));
  ModelConfig mc = model_config_from(cfg, vs, vt, dir);
  Seq2SeqModel model(mc);
  std::uint64_t seed = require_seed(cfg);
  RngStream root(seed);
  model.init_params(root.derive("init"));
  TrainHyper hyper = hyper_from(cfg);
  StopperConfig stopper{get_int(cfg, "train.patience", 3)};
  int workers = resolve_workers(cfg);
  TrainResult res = train_mle(model, train, hyper, dev, root.derive("train"), stopper, workers);
  save_checkpoint(o.out, model, vs, vt);

  cfg["model.direction"] = direction_name(dir);
  model_config_into(mc, cfg);
  hyper_into(hyper, cfg);
  cfg["train.patience"] = std::to_string(stopper.patience);
  cfg["run.seed"] = std::to_string(seed);
  cfg["run.workers"] = std::to_string(workers);
  write_manifest(std::move(cfg), o.out + ".manifest");
  std::cout << "best_epoch = " << res.best_epoch << '\n';
  if (res.best_dev_bleu.has_value()) std::cout << "dev_bleu = " << fmt2(*res.best_dev_bleu) << '\n';
}

// ------------------------------------------------------------ translate ----

struct TranslateOpts {
  CommonOpts common;
  std::string model;
  std::string in;
  std::string out;
  std::string mode = "greedy";
  int beam_width = 10;
  double temperature = 1.0;
};

void run_translate(const TranslateOpts& o) {
  ConfigMap cfg = resolve_config(o.common);
  LoadedModel lm = load_model(o.model);
  Monotext input = load_monotext(o.in, lm.src_vocab);
  DecodeConfig dc;
  dc.mode = decode_mode_from_name(get_string(cfg, "decode.mode", o.mode));
  dc.beam_width = get_int(cfg, "decode.beam_width", o.beam_width);
  dc.temperature = get_double(cfg, "decode.temperature", o.temperature);
  dc.max_len = lm.model.config().max_len;
  RngStream root(get_u64(cfg, "run.seed", 1));
  int workers = resolve_workers(cfg);
  std::vector<Sentence> decoded =
      decode_corpus(lm.model, input.sentences, dc, root.derive("translate"), workers);
  std::vector<std::string> lines;
  lines.reserve(decoded.size());
  for (const Sentence& s : decoded) lines.push_back(detokenize(s, lm.trg_vocab));
  write_lines(lines, o.out);
  cfg["decode.mode"] = decode_mode_name(dc.mode);
  cfg["decode.beam_width"] = std::to_string(dc.beam_width);
  cfg["decode.temperature"] = fmt6(dc.temperature);
  cfg["data.in"] = o.in;
  cfg["data.model"] = o.model;
  write_manifest(std::move(cfg), o.out + ".manifest");
}

// ------------------------------------------------------------- evaluate ----

struct EvaluateOpts {
  CommonOpts common;
  std::string hyp;
  std::string ref;
  std::string hyp_b;
  bool lowercase = false;
  long trials = 10000;
  double alpha = 0.05;
  std::string manifest;
};

void run_evaluate(const EvaluateOpts& o) {
  ConfigMap cfg = resolve_config(o.common);
  bool lowercase = get_bool(cfg, "eval.lowercase", o.lowercase);
  std::vector<std::string> hyps = read_lines(o.hyp);
  std::vector<std::string> refs = read_lines(o.ref);
  if (o.hyp_b.empty()) {
    std::cout << "BLEU = " << fmt2(bleu(hyps, refs, lowercase).score) << '\n';
  } else {
    std::vector<std::string> hyps_b = read_lines(o.hyp_b);
    double a = bleu(hyps, refs, lowercase).score;
    double b = bleu(hyps_b, refs, lowercase).score;
    long trials = get_long(cfg, "eval.trials", o.trials);
    double alpha = get_double(cfg, "eval.alpha", o.alpha);
    RngStream rng(get_u64(cfg, "run.seed", 1));
    SignificanceResult sig =
        paired_significance(hyps, hyps_b, refs, trials, alpha, rng.derive("sig"), lowercase);
    std::cout << "BLEU_A = " << fmt2(a) << '\n';
    std::cout << "BLEU_B = " << fmt2(b) << '\n';
    char delta[32];
    std::snprintf(delta, sizeof(delta), "%+.2f", a - b);
    std::cout << "delta = " << delta << '\n';
    std::cout << "p_value = " << fmt6(sig.p_value) << '\n';
    std::cout << "significant = " << (sig.significant ? "yes" : "no") << '\n';
  }
  cfg["data.hyp"] = o.hyp;
  cfg["data.ref"] = o.ref;
  if (!o.hyp_b.empty()) cfg["data.hyp_b"] = o.hyp_b;
  cfg["eval.lowercase"] = lowercase ? "true" : "false";
  write_manifest(std::move(cfg), o.manifest);
}

// ------------------------------------------------------------ wakesleep ----

struct WakeSleepOpts {
  CommonOpts common;
  std::string data_dir;
  std::string run_dir;
  std::string theta_path;
  std::string phi_path;
  std::optional<int> iterations;
  std::optional<long> dream_count;
  std::string wake_mode;
  std::string sleep_mode;
  std::optional<double> temperature;
  CLI::Option* symmetric_flag = nullptr;
  CLI::Option* strict_flag = nullptr;
};

Seq2SeqModel obtain_model(const std::string& ckpt_path, const ConfigMap& cfg,
                          const Vocabulary& in_vocab, const Vocabulary& out_vocab,
                          Direction dir, const Bitext& train, const Bitext& dev,
                          const TrainHyper& pre, StopperConfig stopper, int workers,
                          RngStream root) {
  const char* tag = dir == Direction::Forward ? "theta" : "phi";
  if (!ckpt_path.empty()) {
    LoadedModel loaded = load_model(ckpt_path);
    if (!(loaded.src_vocab == in_vocab) || !(loaded.trg_vocab == out_vocab))
      throw std::runtime_error(std::string(tag) +
                               " checkpoint vocabulary differs from the corpus vocabulary");
    if (loaded.model.config().direction != dir)
      throw std::runtime_error(std::string(tag) + " checkpoint has the wrong direction tag");
    log::info("model_loaded", {{"model", tag}, {"path", ckpt_path}});
    return std::move(loaded.model);
  }
  Seq2SeqModel model(model_config_from(cfg, in_vocab, out_vocab, dir));
  model.init_params(root.derive("init").derive(tag));
  log::info("pretrain", {{"model", tag}, {"pairs", log::str(train.size())}});
  train_mle(model, train, pre, dev, root.derive("pretrain").derive(tag), stopper, workers);
  return model;
}

void run_wakesleep_cmd(const WakeSleepOpts& o) {
  ConfigMap cfg = resolve_config(o.common);
  if (!o.data_dir.empty()) apply_data_dir(cfg, o.data_dir);
  if (o.iterations.has_value()) cfg["ws.iterations"] = std::to_string(*o.iterations);
  if (o.dream_count.has_value()) cfg["ws.dream_count"] = std::to_string(*o.dream_count);
  if (!o.wake_mode.empty()) cfg["ws.wake_mode"] = o.wake_mode;
  if (!o.sleep_mode.empty()) cfg["ws.sleep_mode"] = o.sleep_mode;
  if (o.temperature.has_value()) cfg["ws.temperature"] = fmt6(*o.temperature);
  if (o.symmetric_flag != nullptr && o.symmetric_flag->count() > 0)
    cfg["ws.symmetric"] = "true";
  if (o.strict_flag != nullptr && o.strict_flag->count() > 0) cfg["ws.symmetric"] = "false";
  if (!o.run_dir.empty()) cfg["run.dir"] = o.run_dir;
  if (!o.theta_path.empty()) cfg["data.theta"] = o.theta_path;
  if (!o.phi_path.empty()) cfg["data.phi"] = o.phi_path;

  std::string run_dir = get_string(cfg, "run.dir", "");
  if (run_dir.empty()) throw std::runtime_error("wakesleep: run.dir is required");
  std::uint64_t seed = require_seed(cfg);
  int workers = resolve_workers(cfg);

  WakeSleepData data;
  Vocabulary vs = side_vocabulary(
      cfg, "data.vocab_src",
      {get_string(cfg, "data.train_src", ""), get_string(cfg, "data.dev_src", ""),
       get_string(cfg, "data.test_src", ""), get_string(cfg, "data.mono_src", "")});
  Vocabulary vt = side_vocabulary(
      cfg, "data.vocab_trg",
      {get_string(cfg, "data.train_trg", ""), get_string(cfg, "data.dev_trg", ""),
       get_string(cfg, "data.test_trg", ""), get_string(cfg, "data.mono_trg", "")});
  data.train = load_bitext(get_string(cfg, "data.train_src"), get_string(cfg, "data.train_trg"),
                           vs, vt);
  data.dev = load_bitext(get_string(cfg, "data.dev_src"), get_string(cfg, "data.dev_trg"), vs, vt);
  data.test =
      load_bitext(get_string(cfg, "data.test_src"), get_string(cfg, "data.test_trg"), vs, vt);
  data.mono_src = load_monotext(get_string(cfg, "data.mono_src"), vs);
  data.mono_trg = load_monotext(get_string(cfg, "data.mono_trg"), vt);

  WakeSleepConfig w;
  w.iterations = get_int(cfg, "ws.iterations", 3);
  w.dream_count = get_long(cfg, "ws.dream_count", -1);
  w.wake_mode = decode_mode_from_name(get_string(cfg, "ws.wake_mode", "greedy"));
  w.sleep_mode = decode_mode_from_name(get_string(cfg, "ws.sleep_mode", "sample"));
  w.temperature = get_double(cfg, "ws.temperature", 1.0);
  w.symmetric = get_bool(cfg, "ws.symmetric", true);
  w.include_real_bitext_in_sleep = get_bool(cfg, "ws.include_real_bitext", true);
  w.hyper = hyper_from(cfg);
  w.stopper.patience = get_int(cfg, "train.patience", 3);
  w.seed = seed;
  w.sig_trials = get_long(cfg, "eval.trials", 10000);
  w.sig_alpha = get_double(cfg, "eval.alpha", 0.05);
  w.eval_lowercase = get_bool(cfg, "eval.lowercase", false);
  w.workers = workers;
  w.run_dir = run_dir;
  w.forward_label = get_string(cfg, "ws.forward_label", "src-trg");
  w.reverse_label = get_string(cfg, "ws.reverse_label", "trg-src");
  w.validate();

  TrainHyper pre = w.hyper;
  pre.max_epochs = get_int(cfg, "train.pretrain_epochs", pre.max_epochs);

  cfg["ws.iterations"] = std::to_string(w.iterations);
  cfg["ws.dream_count"] = std::to_string(w.dream_count);
  cfg["ws.wake_mode"] = decode_mode_name(w.wake_mode);
  cfg["ws.sleep_mode"] = decode_mode_name(w.sleep_mode);
  cfg["ws.temperature"] = fmt6(w.temperature);
  cfg["ws.symmetric"] = w.symmetric ? "true" : "false";
  cfg["ws.include_real_bitext"] = w.include_real_bitext_in_sleep ? "true" : "false";
  cfg["ws.forward_label"] = w.forward_label;
  cfg["ws.reverse_label"] = w.reverse_label;
  hyper_into(w.hyper, cfg);
  cfg["train.pretrain_epochs"] = std::to_string(pre.max_epochs);
  cfg["train.patience"] = std::to_string(w.stopper.patience);
  cfg["eval.trials"] = std::to_string(w.sig_trials);
  cfg["eval.alpha"] = fmt6(w.sig_alpha);
  cfg["eval.lowercase"] = w.eval_lowercase ? "true" : "false";
  cfg["run.seed"] = std::to_string(seed);
  cfg["run.workers"] = std::to_string(workers);
  cfg["run.dir"] = run_dir;
  {
    ModelConfig mc = model_config_from(cfg, vs, vt, Direction::Forward);
    model_config_into(mc, cfg);
  }
  std::filesystem::create_directories(run_dir);
  write_manifest(cfg, run_dir + "/manifest.txt");

  RngStream root(seed);
  Seq2SeqModel theta =
      obtain_model(get_string(cfg, "data.theta", ""), cfg, vs, vt, Direction::Forward,
                   data.train, data.dev, pre, w.stopper, workers, root);
  Bitext rev_train = reversed(data.train);
  Bitext rev_dev = reversed(data.dev);
  Seq2SeqModel phi =
      obtain_model(get_string(cfg, "data.phi", ""), cfg, vt, vs, Direction::Backward,
                   rev_train, rev_dev, pre, w.stopper, workers, root);

  EmpiricalLM lm = build_lm(data.mono_src);
  EvalHooks hooks;
  hooks.on_iteration = [](const IterationMetrics& it) {
    log::Fields f{{"iteration", log::str(it.iteration)}};
    if (it.forward.dev_bleu.has_value()) f.emplace_back("dev", fmt2(*it.forward.dev_bleu));
    if (it.forward.test_bleu.has_value()) f.emplace_back("test", fmt2(*it.forward.test_bleu));
    log::info("iteration_done", f);
  };
  WakeSleepResult result = run_wake_sleep(theta, phi, data, &lm, w, hooks);
  save_checkpoint(run_dir + "/theta.ckpt", theta, vs, vt);
  save_checkpoint(run_dir + "/phi.ckpt", phi, vt, vs);
  std::cout << result.report_text;
}

// ------------------------------------------------------------- diagnose ----

struct DiagnoseOpts {
  CommonOpts common;
  std::string op;
  std::string theta;
  std::string phi;
  std::string mono;
  std::string trg;
  long index = 0;
  long top = 10;
  long dreams = 1000;
  std::string manifest;
};

void run_diagnose(const DiagnoseOpts& o) {
  ConfigMap cfg = resolve_config(o.common);
  LoadedModel theta = load_model(o.theta);
  Monotext mono = load_monotext(o.mono, theta.src_vocab);
  EmpiricalLM lm = build_lm(mono);

  auto load_targets = [&]() {
    if (o.trg.empty()) throw std::runtime_error("diagnose: --trg is required for this op");
    return load_monotext(o.trg, theta.trg_vocab);
  };
  auto load_phi = [&]() {
    if (o.phi.empty()) throw std::runtime_error("diagnose: --phi is required for this op");
    LoadedModel phi = load_model(o.phi);
    if (!(phi.src_vocab == theta.trg_vocab) || !(phi.trg_vocab == theta.src_vocab))
      throw std::runtime_error("diagnose: phi vocabularies do not mirror theta");
    return phi;
  };

  if (o.op == "marginal") {
    Monotext targets = load_targets();
    double total = 0.0;
    for (const Sentence& y : targets.sentences)
      total += marginal_log_likelihood(theta.model, lm, y);
    std::cout << "sentences = " << targets.size() << '\n';
    std::cout << "log_marginal_total = " << fmt6(total) << '\n';
    std::cout << "log_marginal_mean = "
              << fmt6(targets.size() == 0 ? 0.0 : total / static_cast<double>(targets.size()))
              << '\n';
  } else if (o.op == "posterior") {
    Monotext targets = load_targets();
    if (o.index < 0 || o.index >= static_cast<long>(targets.size()))
      throw std::runtime_error("diagnose: --index is out of range");
    PosteriorTable table =
        exact_posterior(theta.model, lm, targets.sentences[static_cast<std::size_t>(o.index)]);
    std::cout << "log_marginal = " << fmt6(table.log_marginal) << '\n';
    std::vector<std::size_t> order(table.posterior.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return table.posterior[a] > table.posterior[b];
    });
    long shown = std::min<long>(o.top, static_cast<long>(order.size()));
    for (long r = 0; r < shown; ++r) {
      std::size_t k = order[static_cast<std::size_t>(r)];
      std::cout << fmt6(table.posterior[k]) << '\t' << fmt6(table.log_joint[k]) << '\t'
                << detokenize(lm.support(k), theta.src_vocab) << '\n';
    }
  } else if (o.op == "kl") {
    Monotext targets = load_targets();
    LoadedModel phi = load_phi();
    double total = 0.0;
    for (const Sentence& y : targets.sentences)
      total += inclusive_kl(theta.model, lm, phi.model, y);
    std::cout << "sentences = " << targets.size() << '\n';
    std::cout << "kl_mean = "
              << fmt6(targets.size() == 0 ? 0.0 : total / static_cast<double>(targets.size()))
              << '\n';
  } else if (o.op == "mc-sleep") {
    LoadedModel phi = load_phi();
    RngStream rng(get_u64(cfg, "run.seed", 1));
    double value =
        mc_sleep_objective(theta.model, lm, phi.model, o.dreams, rng.derive("mc-sleep"));
    std::cout << "dreams = " << o.dreams << '\n';
    std::cout << "mc_sleep = " << fmt6(value) << '\n';
  } else if (o.op == "autoencoder") {
    Monotext targets = load_targets();
    LoadedModel phi = load_phi();
    double total = 0.0;
    for (const Sentence& y : targets.sentences)
      total += autoencoder_objective(theta.model, phi.model, y, lm);
    std::cout << "sentences = " << targets.size() << '\n';
    std::cout << "autoencoder_mean = "
              << fmt6(targets.size() == 0 ? 0.0 : total / static_cast<double>(targets.size()))
              << '\n';
  } else {
    throw std::runtime_error("diagnose: unknown op '" + o.op + "'");
  }

  cfg["diagnose.op"] = o.op;
  cfg["data.theta"] = o.theta;
  if (!o.phi.empty()) cfg["data.phi"] = o.phi;
  cfg["data.mono"] = o.mono;
  if (!o.trg.empty()) cfg["data.trg"] = o.trg;
  write_manifest(std::move(cfg), o.manifest);
}

// --------------------------------------------------------------- report ----

struct ReportOpts {
  std::string tsv;
  std::string manifest;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

DirectionMetrics direction_from_cells(const std::vector<std::string>& cells, std::size_t at) {
  DirectionMetrics d;
  auto dbl = [&](std::size_t c) -> std::optional<double> {
    if (cells[c].empty()) return std::nullopt;
    return std::stod(cells[c]);
  };
  auto lng = [&](std::size_t c) -> std::optional<long> {
    if (cells[c].empty()) return std::nullopt;
    return std::stol(cells[c]);
  };
  d.dev_bleu = dbl(at);
  d.test_bleu = dbl(at + 1);
  d.sig_vs_prev = cells[at + 2] == "1";
  d.sig_vs_base = cells[at + 3] == "1";
  d.back_size = lng(at + 4);
  d.dreamt_size = lng(at + 5);
  if (!cells[at + 6].empty()) d.early_stop_epoch = static_cast<int>(std::stol(cells[at + 6]));
  return d;
}

void run_report(const ReportOpts& o) {
  std::vector<std::string> lines = read_lines(o.tsv);
  if (lines.empty()) throw std::runtime_error("report: empty metrics file");
  std::vector<std::string> header = split_tabs(lines[0]);
  if (header.size() != 8 && header.size() != 15)
    throw std::runtime_error("report: unrecognized metrics header");
  bool has_reverse = header.size() == 15;
  auto label_of = [&](std::size_t c) {
    std::string name = header[c];
    std::size_t cut = name.rfind("_dev");
    if (cut == std::string::npos || cut + 4 != name.size())
      throw std::runtime_error("report: unrecognized metrics header");
    return name.substr(0, cut);
  };
  std::string forward_label = label_of(1);
  std::string reverse_label = has_reverse ? label_of(8) : "trg-src";

  std::vector<IterationMetrics> metrics;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    std::vector<std::string> cells = split_tabs(lines[r]);
    if (cells.size() != header.size())
      throw std::runtime_error("report: ragged metrics row " + std::to_string(r));
    IterationMetrics it;
    it.iteration = static_cast<int>(std::stol(cells[0]));
    it.forward = direction_from_cells(cells, 1);
    if (has_reverse) {
      bool any = false;
      for (std::size_t c = 8; c < cells.size(); ++c) any = any || !cells[c].empty();
      if (any) it.reverse = direction_from_cells(cells, 8);
    }
    metrics.push_back(it);
  }
  std::cout << render_report_text(metrics, forward_label, reverse_label);
  ConfigMap cfg;
  cfg["data.tsv"] = o.tsv;
  write_manifest(std::move(cfg), o.manifest);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wake-sleep machine translation laboratory"};
  app.set_version_flag("--version", wsmt::kVersion);
  app.require_subcommand(1);
  argv = app.ensure_utf8(argv);

  auto synth = std::make_shared<SynthOpts>();
  {
    CLI::App* cmd = app.add_subcommand("synth", "generate a synthetic cipher task");
    cmd->add_option("--task", synth->task, "substitution_cipher or cipher_with_local_reorder");
    cmd->add_option("--vocab-size", synth->spec.vocab_size, "alphabet size per side");
    cmd->add_option("--min-len", synth->spec.min_len, "minimum source length");
    cmd->add_option("--max-len", synth->spec.max_len, "maximum source length");
    cmd->add_option("--train-pairs", synth->spec.train_pairs, "training pair count");
    cmd->add_option("--mono-src", synth->spec.mono_src, "source monotext size");
    cmd->add_option("--mono-trg", synth->spec.mono_trg, "target monotext size");
    cmd->add_option("--dev-pairs", synth->spec.dev_pairs, "development pair count");
    cmd->add_option("--test-pairs", synth->spec.test_pairs, "test pair count");
    cmd->add_option("--seed", synth->spec.seed, "generation seed");
    cmd->add_option("--out", synth->out_dir, "output directory")->required();
    cmd->callback([synth] { run_synth(*synth); });
  }

  auto bpe_learn = std::make_shared<BpeLearnOpts>();
  {
    CLI::App* cmd = app.add_subcommand("bpe-learn", "learn a merge table from corpora");
    cmd->add_option("--in", bpe_learn->inputs, "input corpus file; repeatable")->required();
    cmd->add_option("--merges", bpe_learn->merges, "number of merges");
    cmd->add_option("--out", bpe_learn->out, "merge table file")->required();
    cmd->add_option("--vocab-out", bpe_learn->vocab_out, "subword vocabulary file");
    cmd->add_option("--manifest", bpe_learn->manifest, "manifest path");
    cmd->callback([bpe_learn] { run_bpe_learn(*bpe_learn); });
  }

  auto bpe_apply = std::make_shared<BpeApplyOpts>();
  {
    CLI::App* cmd = app.add_subcommand("bpe-apply", "segment (or undo) a corpus");
    cmd->add_option("--merges", bpe_apply->merges, "merge table file")->required();
    cmd->add_option("--in", bpe_apply->in, "input corpus")->required();
    cmd->add_option("--out", bpe_apply->out, "output corpus")->required();
    cmd->add_flag("--undo", bpe_apply->undo, "reverse the segmentation");
    cmd->add_option("--manifest", bpe_apply->manifest, "manifest path");
    cmd->callback([bpe_apply] { run_bpe_apply(*bpe_apply); });
  }

  auto train = std::make_shared<TrainOpts>();
  {
    CLI::App* cmd = app.add_subcommand("train", "MLE-train one translation direction");
    add_common(cmd, train->common);
    cmd->add_option("--train-src", train->train_src, "training corpus, model input side");
    cmd->add_option("--train-trg", train->train_trg, "training corpus, model output side");
    cmd->add_option("--dev-src", train->dev_src, "development corpus, input side");
    cmd->add_option("--dev-trg", train->dev_trg, "development corpus, output side");
    cmd->add_option("--vocab-src", train->vocab_src, "input vocabulary file");
    cmd->add_option("--vocab-trg", train->vocab_trg, "output vocabulary file");
    cmd->add_option("--direction", train->direction, "forward or backward tag");
    cmd->add_option("--out", train->out, "checkpoint path")->required();
    cmd->callback([train] { run_train(*train); });
  }

  auto translate = std::make_shared<TranslateOpts>();
  {
    CLI::App* cmd = app.add_subcommand("translate", "decode a corpus with a checkpoint");
    add_common(cmd, translate->common);
    cmd->add_option("--model", translate->model, "checkpoint path")->required();
    cmd->add_option("--in", translate->in, "input corpus")->required();
    cmd->add_option("--out", translate->out, "output corpus")->required();
    cmd->add_option("--mode", translate->mode, "greedy, beam or sample");
    cmd->add_option("--beam-width", translate->beam_width, "beam width");
    cmd->add_option("--temperature", translate->temperature, "sampling temperature");
    cmd->callback([translate] { run_translate(*translate); });
  }

  auto evaluate = std::make_shared<EvaluateOpts>();
  {
    CLI::App* cmd = app.add_subcommand("evaluate", "BLEU and paired significance");
    add_common(cmd, evaluate->common);
    cmd->add_option("--hyp", evaluate->hyp, "hypothesis corpus")->required();
    cmd->add_option("--ref", evaluate->ref, "reference corpus")->required();
    cmd->add_option("--hyp-b", evaluate->hyp_b, "second hypothesis corpus to compare");
    cmd->add_flag("--lowercase", evaluate->lowercase, "case-insensitive scoring");
    cmd->add_option("--trials", evaluate->trials, "randomization trials");
    cmd->add_option("--alpha", evaluate->alpha, "significance level");
    cmd->add_option("--manifest", evaluate->manifest, "manifest path; logged when omitted");
    cmd->callback([evaluate] { run_evaluate(*evaluate); });
  }

  auto wakesleep = std::make_shared<WakeSleepOpts>();
  {
    CLI::App* cmd = app.add_subcommand("wakesleep", "run the full iterated experiment");
    add_common(cmd, wakesleep->common);
    cmd->add_option("--data", wakesleep->data_dir, "task directory with conventional names");
    cmd->add_option("--run-dir", wakesleep->run_dir, "run output directory (run.dir)");
    cmd->add_option("--theta", wakesleep->theta_path, "pretrained forward checkpoint");
    cmd->add_option("--phi", wakesleep->phi_path, "pretrained backward checkpoint");
    cmd->add_option("--iterations", wakesleep->iterations, "wake-sleep iterations");
    cmd->add_option("--dream-count", wakesleep->dream_count, "sleep samples per iteration");
    cmd->add_option("--wake-mode", wakesleep->wake_mode, "greedy or sample");
    cmd->add_option("--sleep-mode", wakesleep->sleep_mode, "greedy or sample");
    cmd->add_option("--temperature", wakesleep->temperature, "sampling temperature");
    wakesleep->symmetric_flag = cmd->add_flag("--symmetric", "bidirectional variant");
    wakesleep->strict_flag = cmd->add_flag("--strict", "single-direction variant");
    wakesleep->strict_flag->excludes(wakesleep->symmetric_flag);
    cmd->callback([wakesleep] { run_wakesleep_cmd(*wakesleep); });
  }

  auto diagnose = std::make_shared<DiagnoseOpts>();
  {
    CLI::App* cmd = app.add_subcommand("diagnose", "exact-inference oracle computations");
    add_common(cmd, diagnose->common);
    cmd->add_option("--op", diagnose->op,
                    "marginal, posterior, kl, mc-sleep or autoencoder")
        ->required();
    cmd->add_option("--theta", diagnose->theta, "forward checkpoint")->required();
    cmd->add_option("--phi", diagnose->phi, "backward checkpoint");
    cmd->add_option("--mono", diagnose->mono, "source monotext behind the prior")->required();
    cmd->add_option("--trg", diagnose->trg, "target sentences to condition on");
    cmd->add_option("--index", diagnose->index, "target sentence index");
    cmd->add_option("--top", diagnose->top, "posterior rows to print");
    cmd->add_option("--dreams", diagnose->dreams, "Monte Carlo sample count");
    cmd->add_option("--manifest", diagnose->manifest, "manifest path; logged when omitted");
    cmd->callback([diagnose] { run_diagnose(*diagnose); });
  }

  auto report = std::make_shared<ReportOpts>();
  {
    CLI::App* cmd = app.add_subcommand("report", "render a metrics table");
    cmd->add_option("--tsv", report->tsv, "metrics TSV from a wakesleep run")->required();
    cmd->add_option("--manifest", report->manifest, "manifest path; logged when omitted");
    cmd->callback([report] { run_report(*report); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
