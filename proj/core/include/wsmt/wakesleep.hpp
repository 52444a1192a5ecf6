// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wsmt/corpus.hpp"
#include "wsmt/empirical_lm.hpp"
#include "wsmt/model.hpp"
#include "wsmt/report.hpp"
#include "wsmt/rng.hpp"
#include "wsmt/train.hpp"

namespace wsmt {

struct WakeSleepConfig {
  int iterations = 3;
  long dream_count = -1;  // negative selects the source-LM sample total
  DecodeMode wake_mode = DecodeMode::Greedy;
  DecodeMode sleep_mode = DecodeMode::Sample;
  double temperature = 1.0;  // sample-mode decodes only
  // Bidirectional variant: the sleep phase becomes a wake phase of the
  // source-side monotext through the forward model. dream_count is ignored.
  bool symmetric = false;
  // The dreamt bitext is unioned with the real bitext for the inference
  // model unless disabled.
  bool include_real_bitext_in_sleep = true;
  TrainHyper hyper;  // continued training, both phases
  StopperConfig stopper;
  std::uint64_t seed = 1;
  long sig_trials = 10000;
  double sig_alpha = 0.05;
  bool eval_lowercase = false;
  int workers = 1;
  std::string run_dir;  // empty disables artifact output
  std::string forward_label = "src-trg";  // report column labels
  std::string reverse_label = "trg-src";

  void validate() const;
};

// One pair per monotext sentence: the decode as the model-output side, the
// original sentence as the model-input side.
Bitext wake_phase(const Seq2SeqModel& q_model, const Monotext& m, DecodeMode mode,
                  double temperature, RngStream rng, int workers,
                  const Vocabulary& out_vocab);

// dream_count pairs, each a language-model sample translated by p_model.
Bitext sleep_phase(const Seq2SeqModel& p_model, const EmpiricalLM& lm, long dream_count,
                   DecodeMode mode, double temperature, RngStream rng, int workers,
                   const Vocabulary& out_vocab);

struct WakeSleepData {
  Bitext train;
  Monotext mono_src;
  Monotext mono_trg;
  Bitext dev;
  Bitext test;
};

struct EvalHooks {
  std::function<void(const IterationMetrics&)> on_iteration;
};

struct WakeSleepResult {
  std::vector<IterationMetrics> metrics;  // index 0 is the incoming baseline
  std::vector<std::uint64_t> theta_hashes;  // parameter hash after each iteration
  std::vector<std::uint64_t> phi_hashes;
  std::string report_text;
  std::string report_tsv;
};

// Iterated wake and sleep updates of the translation model theta and the
// inference model phi, both already MLE-trained on data.train. The models are
// left at their final states.
WakeSleepResult run_wake_sleep(Seq2SeqModel& theta, Seq2SeqModel& phi,
                               const WakeSleepData& data, const EmpiricalLM* lm_src,
                               const WakeSleepConfig& cfg, const EvalHooks& hooks = {});

}  // namespace wsmt
