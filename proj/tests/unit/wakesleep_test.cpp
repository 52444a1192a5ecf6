// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wsmt/checkpoint.hpp"
#include "wsmt/wakesleep.hpp"

using namespace wsmt;
using namespace wsmt::test;

namespace {

struct Lab {
  Vocabulary src = tiny_vocab({"a", "b"});
  Vocabulary trg = tiny_vocab({"u", "v"});
  WakeSleepData data;

  Lab() {
    data.train.src_vocab = src;
    data.train.trg_vocab = trg;
    data.train.pairs = {{sent({1}), sent({1})},       {sent({2}), sent({2})},
                        {sent({1, 2}), sent({1, 2})}, {sent({2, 1}), sent({2, 1})},
                        {sent({1, 1}), sent({1, 1})}, {sent({2, 2}), sent({2, 2})}};
    data.dev.src_vocab = src;
    data.dev.trg_vocab = trg;
    data.dev.pairs = {{sent({1}), sent({1})}, {sent({2, 1}), sent({2, 1})}};
    data.test = data.dev;
    data.mono_src.vocab = src;
    data.mono_src.sentences = {sent({1}), sent({1, 2}), sent({2})};
    data.mono_trg.vocab = trg;
    data.mono_trg.sentences = {sent({2}), sent({1, 1}), sent({1}), sent({2, 1})};
  }

  Seq2SeqModel theta(std::uint64_t seed = 1) const {
    ModelConfig cfg = make_model_config(src, trg, Direction::Forward, 2, 4, 4);
    Seq2SeqModel m(cfg);
    m.init_params(RngStream(seed));
    return m;
  }
  Seq2SeqModel phi(std::uint64_t seed = 2) const {
    ModelConfig cfg = make_model_config(trg, src, Direction::Backward, 2, 4, 4);
    Seq2SeqModel m(cfg);
    m.init_params(RngStream(seed));
    return m;
  }

  WakeSleepConfig quick_config(int iterations) const {
    WakeSleepConfig cfg;
    cfg.iterations = iterations;
    cfg.hyper.batch_size = 4;
    cfg.hyper.max_epochs = 2;
    cfg.hyper.max_len = 4;
    cfg.hyper.adam.alpha = 1e-3;
    cfg.sig_trials = 1000;
    cfg.seed = 9;
    return cfg;
  }
};

}  // namespace

TEST_SUITE("wakesleep") {

TEST_CASE("wake phase pairs every monotext sentence with its decode") {
  Lab lab;
  Seq2SeqModel phi = lab.phi();
  Bitext back = wake_phase(phi, lab.data.mono_trg, DecodeMode::Greedy, 1.0, RngStream(3), 1,
                           lab.src);
  REQUIRE(back.size() == lab.data.mono_trg.size());
  CHECK(back.role == PairRole::Back);
  CHECK(back.src_vocab == lab.src);
  CHECK(back.trg_vocab == lab.trg);
  DecodeConfig dc;
  dc.max_len = phi.config().max_len;
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.pairs[i].second == lab.data.mono_trg.sentences[i]);
    CHECK(back.pairs[i].first == phi.decode(lab.data.mono_trg.sentences[i], dc));
  }
}

TEST_CASE("greedy wake phase is idempotent") {
  Lab lab;
  Seq2SeqModel phi = lab.phi();
  Bitext a = wake_phase(phi, lab.data.mono_trg, DecodeMode::Greedy, 1.0, RngStream(1), 1,
                        lab.src);
  Bitext b = wake_phase(phi, lab.data.mono_trg, DecodeMode::Greedy, 1.0, RngStream(2), 2,
                        lab.src);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.pairs[i] == b.pairs[i]);
}

TEST_CASE("sampled wake phase is deterministic per seed and worker-count free") {
  Lab lab;
  Seq2SeqModel phi = lab.phi();
  Bitext a = wake_phase(phi, lab.data.mono_trg, DecodeMode::Sample, 1.0, RngStream(5), 1,
                        lab.src);
  Bitext b = wake_phase(phi, lab.data.mono_trg, DecodeMode::Sample, 1.0, RngStream(5), 3,
                        lab.src);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.pairs[i] == b.pairs[i]);
}

TEST_CASE("wake phase rejects a vocabulary mismatch") {
  Lab lab;
  Seq2SeqModel phi = lab.phi();
  Monotext wrong;
  wrong.vocab = lab.src;  // phi expects target-language input
  wrong.sentences = {sent({1})};
  CHECK_THROWS_AS(wake_phase(phi, wrong, DecodeMode::Greedy, 1.0, RngStream(1), 1, lab.src),
                  std::runtime_error);
  CHECK_THROWS_AS(
      wake_phase(phi, lab.data.mono_trg, DecodeMode::Greedy, 1.0, RngStream(1), 1, lab.trg),
      std::runtime_error);
}

TEST_CASE("sleep phase dreams the requested number of attested sources") {
  Lab lab;
  Seq2SeqModel theta = lab.theta();
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  Bitext dreamt =
      sleep_phase(theta, lm, 50, DecodeMode::Sample, 1.0, RngStream(8), 1, lab.trg);
  REQUIRE(dreamt.size() == 50);
  CHECK(dreamt.role == PairRole::Dreamt);
  CHECK(dreamt.src_vocab == lab.src);
  CHECK(dreamt.trg_vocab == lab.trg);
  for (const auto& [x, y] : dreamt.pairs) {
    CHECK(lm.find(x) >= 0);
    CHECK(y.token_ids.back() == 0);
  }
}

TEST_CASE("sleep phase with zero dreams is empty") {
  Lab lab;
  Seq2SeqModel theta = lab.theta();
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  CHECK(sleep_phase(theta, lm, 0, DecodeMode::Sample, 1.0, RngStream(1), 1, lab.trg).size() ==
        0);
}

TEST_CASE("dream sources follow the language model frequencies") {
  Lab lab;
  Monotext skewed;
  skewed.vocab = lab.src;
  skewed.sentences = {sent({1}), sent({1}), sent({1}), sent({2})};
  EmpiricalLM lm = build_lm(skewed);
  Seq2SeqModel theta = lab.theta();
  Bitext dreamt =
      sleep_phase(theta, lm, 50000, DecodeMode::Sample, 1.0, RngStream(13), 1, lab.trg);
  long ones = 0;
  for (const auto& [x, y] : dreamt.pairs) ones += x == sent({1});
  double freq = static_cast<double>(ones) / 50000.0;
  CHECK(std::abs(freq - 0.75) < 0.01);
}

TEST_CASE("sleep phase is deterministic and worker-count independent") {
  Lab lab;
  Seq2SeqModel theta = lab.theta();
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  Bitext a = sleep_phase(theta, lm, 40, DecodeMode::Sample, 1.0, RngStream(21), 1, lab.trg);
  Bitext b = sleep_phase(theta, lm, 40, DecodeMode::Sample, 1.0, RngStream(21), 4, lab.trg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.pairs[i] == b.pairs[i]);
}

TEST_CASE("zero iterations evaluates the baseline and changes nothing") {
  Lab lab;
  Seq2SeqModel theta = lab.theta();
  Seq2SeqModel phi = lab.phi();
  std::uint64_t th = theta.params_hash(), ph = phi.params_hash();
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  WakeSleepResult r = run_wake_sleep(theta, phi, lab.data, &lm, lab.quick_config(0));
  CHECK(theta.params_hash() == th);
  CHECK(phi.params_hash() == ph);
  REQUIRE(r.metrics.size() == 1);
  CHECK(r.metrics[0].iteration == 0);
  CHECK(r.metrics[0].forward.test_bleu.has_value());
  REQUIRE(r.metrics[0].reverse.has_value());
  CHECK(r.metrics[0].reverse->test_bleu.has_value());
  CHECK_FALSE(r.metrics[0].forward.back_size.has_value());
  REQUIRE(r.theta_hashes.size() == 1);
  CHECK(r.theta_hashes[0] == th);
}

TEST_CASE("one greedy iteration reproduces the manual pipeline bitwise") {
  Lab lab;
  Seq2SeqModel theta = lab.theta(31);
  Seq2SeqModel phi = lab.phi(32);
  Seq2SeqModel theta_manual = theta;
  Seq2SeqModel phi_for_back = phi;

  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.symmetric = false;
  cfg.dream_count = 8;
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  WakeSleepResult r = run_wake_sleep(theta, phi, lab.data, &lm, cfg);
  REQUIRE(r.theta_hashes.size() == 2);

  RngStream root(cfg.seed);
  RngStream iter = root.derive("iteration").derive(static_cast<std::uint64_t>(1));
  Bitext back = wake_phase(phi_for_back, lab.data.mono_trg, cfg.wake_mode, cfg.temperature,
                           iter.derive("back"), 1, lab.src);
  Bitext combined = union_bitext(lab.data.train, back);
  train_mle(theta_manual, combined, cfg.hyper, lab.data.dev, iter.derive("theta"),
            cfg.stopper, 1);
  CHECK(theta_manual.params_hash() == r.theta_hashes[1]);
  CHECK(theta_manual.params_hash() == theta.params_hash());
  CHECK(r.metrics[1].forward.back_size.has_value());
  CHECK(*r.metrics[1].forward.back_size == static_cast<long>(lab.data.mono_trg.size()));
}

TEST_CASE("the union corpus size adds the hallucinated pairs") {
  Lab lab;
  Seq2SeqModel phi = lab.phi();
  Bitext back = wake_phase(phi, lab.data.mono_trg, DecodeMode::Greedy, 1.0, RngStream(1), 1,
                           lab.src);
  Bitext combined = union_bitext(lab.data.train, back);
  CHECK(combined.size() == lab.data.train.size() + lab.data.mono_trg.size());
}

TEST_CASE("strict wake-sleep is bit-reproducible end to end") {
  Lab lab;
  WakeSleepConfig cfg = lab.quick_config(2);
  cfg.sleep_mode = DecodeMode::Greedy;
  cfg.dream_count = 6;

  Seq2SeqModel t1 = lab.theta(41), p1 = lab.phi(42);
  Seq2SeqModel t2 = lab.theta(41), p2 = lab.phi(42);
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  WakeSleepResult r1 = run_wake_sleep(t1, p1, lab.data, &lm, cfg);
  WakeSleepResult r2 = run_wake_sleep(t2, p2, lab.data, &lm, cfg);
  CHECK(r1.report_text == r2.report_text);
  CHECK(r1.report_tsv == r2.report_tsv);
  CHECK(r1.theta_hashes == r2.theta_hashes);
  CHECK(r1.phi_hashes == r2.phi_hashes);
  CHECK(t1.params_hash() == t2.params_hash());
  CHECK(p1.params_hash() == p2.params_hash());
}

TEST_CASE("warm start carries parameters across iterations") {
  Lab lab;
  WakeSleepConfig cfg = lab.quick_config(2);
  cfg.dream_count = 4;
  cfg.hyper.max_epochs = 40;
  cfg.hyper.adam.alpha = 2e-2;
  cfg.stopper.patience = 40;
  Seq2SeqModel theta = lab.theta(51), phi = lab.phi(52);
  EmpiricalLM lm = build_lm(lab.data.mono_src);
  WakeSleepResult r = run_wake_sleep(theta, phi, lab.data, &lm, cfg);
  REQUIRE(r.theta_hashes.size() == 3);
  CHECK(r.theta_hashes[2] == theta.params_hash());
  CHECK(r.phi_hashes[2] == phi.params_hash());
  std::set<std::uint64_t> distinct(r.theta_hashes.begin(), r.theta_hashes.end());
  CHECK(distinct.size() >= 2);
}

TEST_CASE("symmetric mode runs without a language model") {
  Lab lab;
  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.symmetric = true;
  Seq2SeqModel theta = lab.theta(61), phi = lab.phi(62);
  WakeSleepResult r = run_wake_sleep(theta, phi, lab.data, nullptr, cfg);
  REQUIRE(r.metrics.size() == 2);
  REQUIRE(r.metrics[1].reverse.has_value());
  CHECK(r.metrics[1].reverse->dreamt_size.has_value());
  CHECK(*r.metrics[1].reverse->dreamt_size == static_cast<long>(lab.data.mono_src.size()));
}

TEST_CASE("strict mode without a language model is rejected") {
  Lab lab;
  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.symmetric = false;
  Seq2SeqModel theta = lab.theta(71), phi = lab.phi(72);
  CHECK_THROWS_AS(run_wake_sleep(theta, phi, lab.data, nullptr, cfg), std::runtime_error);
}

TEST_CASE("model directions are validated") {
  Lab lab;
  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.symmetric = true;
  Seq2SeqModel theta = lab.theta(81), wrong = lab.theta(82);
  CHECK_THROWS_AS(run_wake_sleep(theta, wrong, lab.data, nullptr, cfg), std::runtime_error);
}

TEST_CASE("missing dev data is rejected") {
  Lab lab;
  lab.data.dev.pairs.clear();
  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.symmetric = true;
  Seq2SeqModel theta = lab.theta(91), phi = lab.phi(92);
  CHECK_THROWS_AS(run_wake_sleep(theta, phi, lab.data, nullptr, cfg), std::runtime_error);
}

TEST_CASE("beam decode modes are rejected in the loop") {
  Lab lab;
  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.wake_mode = DecodeMode::Beam;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = lab.quick_config(1);
  cfg.sleep_mode = DecodeMode::Beam;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = lab.quick_config(1);
  cfg.sig_trials = 100;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("run artifacts land in the run directory") {
  Lab lab;
  TempDir tmp;
  WakeSleepConfig cfg = lab.quick_config(1);
  cfg.symmetric = true;
  cfg.run_dir = tmp.file("run");
  Seq2SeqModel theta = lab.theta(95), phi = lab.phi(96);
  WakeSleepResult r = run_wake_sleep(theta, phi, lab.data, nullptr, cfg);

  namespace fs = std::filesystem;
  CHECK(fs::exists(fs::path(cfg.run_dir) / "report.txt"));
  CHECK(fs::exists(fs::path(cfg.run_dir) / "report.tsv"));
  CHECK(fs::exists(fs::path(cfg.run_dir) / "metrics.log"));
  CHECK(fs::exists(fs::path(cfg.run_dir) / "iter1" / "back.src"));
  CHECK(fs::exists(fs::path(cfg.run_dir) / "iter1" / "back_rev.src"));
  CHECK(fs::exists(fs::path(cfg.run_dir) / "iter1" / "theta.ckpt"));

  LoadedModel saved = load_model((fs::path(cfg.run_dir) / "iter1" / "theta.ckpt").string());
  CHECK(saved.model.params_hash() == r.theta_hashes[1]);
  CHECK(read_file((fs::path(cfg.run_dir) / "report.txt").string()) == r.report_text);
}

}
