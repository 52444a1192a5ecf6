// SPDX-License-Identifier: Apache-2.0
#include "wsmt/wakesleep.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "wsmt/bleu.hpp"
#include "wsmt/checkpoint.hpp"
#include "wsmt/logging.hpp"
#include "wsmt/parallel.hpp"
#include "wsmt/significance.hpp"

namespace wsmt {

void WakeSleepConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  if (wake_mode == DecodeMode::Beam || sleep_mode == DecodeMode::Beam)
    throw std::invalid_argument("wake and sleep modes must be greedy or sample");
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (sig_trials < 1000) throw std::invalid_argument("sig_trials must be at least 1000");
  if (sig_alpha <= 0.0 || sig_alpha >= 1.0)
    throw std::invalid_argument("sig_alpha must lie in (0, 1)");
  if (workers < 1) throw std::invalid_argument("workers must be positive");
  if (stopper.patience < 1) throw std::invalid_argument("patience must be positive");
  hyper.validate();
}

Bitext wake_phase(const Seq2SeqModel& q_model, const Monotext& m, DecodeMode mode,
                  double temperature, RngStream rng, int workers,
                  const Vocabulary& out_vocab) {
  const ModelConfig& mc = q_model.config();
  if (mc.src_vocab_hash != m.vocab.hash())
    throw std::runtime_error("wake: monotext vocabulary does not match the model input side");
  if (mc.trg_vocab_hash != out_vocab.hash())
    throw std::runtime_error("wake: output vocabulary does not match the model");
  DecodeConfig dc;
  dc.mode = mode;
  dc.max_len = mc.max_len;
  dc.temperature = temperature;
  std::vector<Sentence> decoded = decode_corpus(q_model, m.sentences, dc, rng, workers);
  Bitext out;
  out.src_vocab = out_vocab;
  out.trg_vocab = m.vocab;
  out.role = PairRole::Back;
  out.pairs.reserve(m.sentences.size());
  for (std::size_t i = 0; i < m.sentences.size(); ++i)
    out.pairs.emplace_back(std::move(decoded[i]), m.sentences[i]);
  return out;
}

Bitext sleep_phase(const Seq2SeqModel& p_model, const EmpiricalLM& lm, long dream_count,
                   DecodeMode mode, double temperature, RngStream rng, int workers,
                   const Vocabulary& out_vocab) {
  const ModelConfig& mc = p_model.config();
  if (dream_count < 0) throw std::invalid_argument("dream_count must be nonnegative");
  if (mc.src_vocab_hash != lm.vocab().hash())
    throw std::runtime_error("sleep: language model vocabulary does not match the model");
  if (mc.trg_vocab_hash != out_vocab.hash())
    throw std::runtime_error("sleep: output vocabulary does not match the model");
  Bitext out;
  out.src_vocab = lm.vocab();
  out.trg_vocab = out_vocab;
  out.role = PairRole::Dreamt;
  out.pairs.resize(static_cast<std::size_t>(dream_count));
  parallel_for(static_cast<std::size_t>(dream_count), workers, [&](std::size_t j) {
    RngStream pair_rng = rng.derive(static_cast<std::uint64_t>(j));
    Sentence x = lm.sample(pair_rng);
    DecodeConfig dc;
    dc.mode = mode;
    dc.max_len = mc.max_len;
    dc.temperature = temperature;
    dc.rng = pair_rng;
    Sentence y = p_model.decode(x, dc);
    out.pairs[j] = {std::move(x), std::move(y)};
  });
  return out;
}

namespace {

std::vector<Sentence> src_side(const Bitext& b) {
  std::vector<Sentence> out;
  out.reserve(b.pairs.size());
  for (const auto& pr : b.pairs) out.push_back(pr.first);
  return out;
}

std::vector<std::string> trg_text(const Bitext& b) {
  std::vector<std::string> out;
  out.reserve(b.pairs.size());
  for (const auto& pr : b.pairs) out.push_back(detokenize(pr.second, b.trg_vocab));
  return out;
}

struct EvalOutcome {
  double bleu_score = 0.0;
  std::vector<BleuStats> stats;
};

EvalOutcome eval_test_set(const Seq2SeqModel& model, const std::vector<Sentence>& sources,
                          const std::vector<std::string>& refs, const Vocabulary& out_vocab,
                          bool lowercase, RngStream rng, int workers) {
  DecodeConfig dc;
  dc.max_len = model.config().max_len;
  std::vector<Sentence> hyps = decode_corpus(model, sources, dc, rng, workers);
  std::vector<std::string> text;
  text.reserve(hyps.size());
  for (const Sentence& h : hyps) text.push_back(detokenize(h, out_vocab));
  EvalOutcome out;
  out.stats = corpus_stats(text, refs, lowercase);
  BleuStats sum;
  for (const BleuStats& s : out.stats) sum += s;
  out.bleu_score = score_from_stats(sum).score;
  return out;
}

double eval_bitext_bleu(const Seq2SeqModel& model, const Bitext& data, bool lowercase,
                        RngStream rng, int workers) {
  return eval_test_set(model, src_side(data), trg_text(data), data.trg_vocab, lowercase,
                       rng, workers)
      .bleu_score;
}

void append_metrics_line(std::ofstream& out, int iteration, const char* direction,
                         const DirectionMetrics& d, std::uint64_t params) {
  if (!out.is_open()) return;
  out << "iteration=" << iteration << " direction=" << direction;
  auto score = [&](const char* key, const std::optional<double>& v) {
    if (!v.has_value()) return;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    out << ' ' << key << '=' << buf;
  };
  score("dev", d.dev_bleu);
  score("test", d.test_bleu);
  if (d.back_size.has_value()) out << " back=" << *d.back_size;
  if (d.dreamt_size.has_value()) out << " dreamt=" << *d.dreamt_size;
  if (d.early_stop_epoch.has_value()) out << " stop=" << *d.early_stop_epoch;
  out << " sig_prev=" << (d.sig_vs_prev ? 1 : 0) << " sig_base=" << (d.sig_vs_base ? 1 : 0);
  out << " params=" << hex64(params) << '\n';
  out.flush();
}

}  // namespace

WakeSleepResult run_wake_sleep(Seq2SeqModel& theta, Seq2SeqModel& phi,
                               const WakeSleepData& data, const EmpiricalLM* lm_src,
                               const WakeSleepConfig& cfg, const EvalHooks& hooks) {
  cfg.validate();
  auto check = [](bool ok, const char* msg) {
    if (!ok) throw std::runtime_error(msg);
  };
  check(theta.config().direction == Direction::Forward,
        "wake-sleep: theta must carry the forward direction tag");
  check(phi.config().direction == Direction::Backward,
        "wake-sleep: phi must carry the backward direction tag");
  const std::uint64_t src_hash = data.train.src_vocab.hash();
  const std::uint64_t trg_hash = data.train.trg_vocab.hash();
  check(theta.config().src_vocab_hash == src_hash && theta.config().trg_vocab_hash == trg_hash,
        "wake-sleep: theta vocabularies do not match the bitext");
  check(phi.config().src_vocab_hash == trg_hash && phi.config().trg_vocab_hash == src_hash,
        "wake-sleep: phi vocabularies do not match the bitext");
  check(!data.dev.pairs.empty(), "wake-sleep: a development set is required");
  check(!data.test.pairs.empty(), "wake-sleep: a test set is required");
  check(data.dev.src_vocab == data.train.src_vocab && data.dev.trg_vocab == data.train.trg_vocab,
        "wake-sleep: dev vocabularies do not match the bitext");
  check(data.test.src_vocab == data.train.src_vocab &&
            data.test.trg_vocab == data.train.trg_vocab,
        "wake-sleep: test vocabularies do not match the bitext");
  check(data.mono_trg.vocab.hash() == trg_hash,
        "wake-sleep: target monotext vocabulary does not match the bitext");
  if (cfg.symmetric) {
    check(data.mono_src.vocab.hash() == src_hash,
          "wake-sleep: source monotext vocabulary does not match the bitext");
  } else {
    check(lm_src != nullptr, "wake-sleep: strict mode needs the source language model");
    check(lm_src->vocab().hash() == src_hash,
          "wake-sleep: language model vocabulary does not match the bitext");
  }

  const RngStream root(cfg.seed);
  const Bitext rev_train = reversed(data.train);
  const Bitext rev_dev = reversed(data.dev);
  const Bitext rev_test = reversed(data.test);
  const std::vector<Sentence> fwd_test_src = src_side(data.test);
  const std::vector<std::string> fwd_test_refs = trg_text(data.test);
  const std::vector<Sentence> rev_test_src = src_side(rev_test);
  const std::vector<std::string> rev_test_refs = trg_text(rev_test);

  const bool artifacts = !cfg.run_dir.empty();
  std::ofstream metrics_log;
  if (artifacts) {
    std::filesystem::create_directories(cfg.run_dir);
    metrics_log.open(cfg.run_dir + "/metrics.log", std::ios::binary | std::ios::trunc);
    if (!metrics_log) throw std::runtime_error("cannot write the run metrics log");
  }
  auto iter_dir = [&](int i) {
    std::string d = cfg.run_dir + "/iter" + std::to_string(i);
    std::filesystem::create_directories(d);
    return d;
  };
  auto save_models = [&](int i) {
    if (!artifacts) return;
    std::string d = iter_dir(i);
    save_checkpoint(d + "/theta.ckpt", theta, data.train.src_vocab, data.train.trg_vocab);
    save_checkpoint(d + "/phi.ckpt", phi, data.train.trg_vocab, data.train.src_vocab);
  };

  WakeSleepResult result;
  std::vector<std::vector<BleuStats>> fwd_stats;
  std::vector<std::vector<BleuStats>> rev_stats;

  auto record = [&](IterationMetrics row) {
    int iteration = row.iteration;
    result.theta_hashes.push_back(theta.params_hash());
    result.phi_hashes.push_back(phi.params_hash());
    append_metrics_line(metrics_log, iteration, "fwd", row.forward,
                        result.theta_hashes.back());
    if (row.reverse.has_value())
      append_metrics_line(metrics_log, iteration, "rev", *row.reverse,
                          result.phi_hashes.back());
    result.metrics.push_back(std::move(row));
    save_models(iteration);
    if (hooks.on_iteration) hooks.on_iteration(result.metrics.back());
  };

  {
    RngStream er = root.derive("eval").derive(std::uint64_t{0});
    IterationMetrics row;
    row.iteration = 0;
    row.forward.dev_bleu =
        eval_bitext_bleu(theta, data.dev, cfg.eval_lowercase, er.derive("fwd-dev"), cfg.workers);
    EvalOutcome fo = eval_test_set(theta, fwd_test_src, fwd_test_refs, data.train.trg_vocab,
                                   cfg.eval_lowercase, er.derive("fwd-test"), cfg.workers);
    row.forward.test_bleu = fo.bleu_score;
    fwd_stats.push_back(std::move(fo.stats));
    DirectionMetrics rev;
    rev.dev_bleu =
        eval_bitext_bleu(phi, rev_dev, cfg.eval_lowercase, er.derive("rev-dev"), cfg.workers);
    EvalOutcome ro = eval_test_set(phi, rev_test_src, rev_test_refs, data.train.src_vocab,
                                   cfg.eval_lowercase, er.derive("rev-test"), cfg.workers);
    rev.test_bleu = ro.bleu_score;
    rev_stats.push_back(std::move(ro.stats));
    row.reverse = rev;
    record(std::move(row));
  }

  for (int i = 1; i <= cfg.iterations; ++i) {
    RngStream iter_rng = root.derive("iteration").derive(static_cast<std::uint64_t>(i));
    log::info("wake_phase", {{"iteration", log::str(i)}});
    Bitext b_back = wake_phase(phi, data.mono_trg, cfg.wake_mode, cfg.temperature,
                               iter_rng.derive("back"), cfg.workers, data.train.src_vocab);
    Bitext theta_data = union_bitext(data.train, b_back);
    TrainResult theta_result = train_mle(theta, theta_data, cfg.hyper, data.dev,
                                         iter_rng.derive("theta"), cfg.stopper, cfg.workers);

    log::info("sleep_phase", {{"iteration", log::str(i)},
                              {"mode", cfg.symmetric ? "symmetric" : "strict"}});
    std::string idir = artifacts ? iter_dir(i) : std::string();
    Bitext phi_halluc;  // already oriented for phi
    long dreamt_size = 0;
    if (cfg.symmetric) {
      phi_halluc = wake_phase(theta, data.mono_src, cfg.wake_mode, cfg.temperature,
                              iter_rng.derive("dream"), cfg.workers, data.train.trg_vocab);
      dreamt_size = static_cast<long>(phi_halluc.size());
      if (artifacts)
        save_bitext(reversed(phi_halluc), idir + "/back_rev.src", idir + "/back_rev.trg");
    } else {
      long dreams = cfg.dream_count >= 0 ? cfg.dream_count : lm_src->total();
      Bitext b_dreamt = sleep_phase(theta, *lm_src, dreams, cfg.sleep_mode, cfg.temperature,
                                    iter_rng.derive("dream"), cfg.workers, data.train.trg_vocab);
      dreamt_size = static_cast<long>(b_dreamt.size());
      if (artifacts) save_bitext(b_dreamt, idir + "/dreamt.src", idir + "/dreamt.trg");
      phi_halluc = reversed(b_dreamt);
    }
    if (artifacts) save_bitext(b_back, idir + "/back.src", idir + "/back.trg");
    Bitext phi_data = cfg.include_real_bitext_in_sleep ? union_bitext(rev_train, phi_halluc)
                                                       : std::move(phi_halluc);
    TrainResult phi_result = train_mle(phi, phi_data, cfg.hyper, rev_dev,
                                       iter_rng.derive("phi"), cfg.stopper, cfg.workers);

    RngStream er = root.derive("eval").derive(static_cast<std::uint64_t>(i));
    RngStream sig_rng = root.derive("sig").derive(static_cast<std::uint64_t>(i));
    IterationMetrics row;
    row.iteration = i;
    row.forward.dev_bleu = theta_result.best_dev_bleu;
    EvalOutcome fo = eval_test_set(theta, fwd_test_src, fwd_test_refs, data.train.trg_vocab,
                                   cfg.eval_lowercase, er.derive("fwd-test"), cfg.workers);
    row.forward.test_bleu = fo.bleu_score;
    row.forward.back_size = static_cast<long>(b_back.size());
    row.forward.early_stop_epoch = theta_result.best_epoch;
    fwd_stats.push_back(std::move(fo.stats));
    std::size_t r = fwd_stats.size() - 1;
    auto significant = [&](const std::vector<BleuStats>& a, const std::vector<BleuStats>& b,
                           RngStream rng) {
      return paired_significance(a, b, cfg.sig_trials, cfg.sig_alpha, rng).significant;
    };
    row.forward.sig_vs_prev =
        significant(fwd_stats[r], fwd_stats[r - 1], sig_rng.derive("fwd").derive("prev"));
    row.forward.sig_vs_base =
        significant(fwd_stats[r], fwd_stats[0], sig_rng.derive("fwd").derive("base"));

    DirectionMetrics rev;
    rev.dev_bleu = phi_result.best_dev_bleu;
    EvalOutcome ro = eval_test_set(phi, rev_test_src, rev_test_refs, data.train.src_vocab,
                                   cfg.eval_lowercase, er.derive("rev-test"), cfg.workers);
    rev.test_bleu = ro.bleu_score;
    rev.dreamt_size = dreamt_size;
    rev.early_stop_epoch = phi_result.best_epoch;
    rev_stats.push_back(std::move(ro.stats));
    rev.sig_vs_prev =
        significant(rev_stats[r], rev_stats[r - 1], sig_rng.derive("rev").derive("prev"));
    rev.sig_vs_base =
        significant(rev_stats[r], rev_stats[0], sig_rng.derive("rev").derive("base"));
    row.reverse = rev;
    record(std::move(row));
  }

  result.report_text = render_report_text(result.metrics, cfg.forward_label, cfg.reverse_label);
  result.report_tsv = render_report_tsv(result.metrics, cfg.forward_label, cfg.reverse_label);
  if (artifacts) {
    std::ofstream txt(cfg.run_dir + "/report.txt", std::ios::binary);
    txt << result.report_text;
    std::ofstream tsv(cfg.run_dir + "/report.tsv", std::ios::binary);
    tsv << result.report_tsv;
    if (!txt || !tsv) throw std::runtime_error("cannot write the run report");
  }
  return result;
}

}  // namespace wsmt
