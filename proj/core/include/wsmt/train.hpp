// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "wsmt/checkpoint.hpp"
#include "wsmt/corpus.hpp"
#include "wsmt/model.hpp"
#include "wsmt/optim.hpp"
#include "wsmt/rng.hpp"

namespace wsmt {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_bleu;
};

struct StopperConfig {
  int patience = 3;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 means the entry state was never improved on
  std::optional<double> best_dev_bleu;
  AdamSnapshot adam;  // optimizer state at the selected checkpoint
};

// Minibatch MLE with Adam, clipping, dropout and l2; shuffles each epoch from
// `rng`, evaluates greedy dev BLEU at epoch boundaries and leaves the model at
// the best checkpoint (the entry state counts as the epoch-0 candidate).
TrainResult train_mle(Seq2SeqModel& model, const Bitext& data, const TrainHyper& hyper,
                      const Bitext& dev, RngStream rng, StopperConfig stopper = {},
                      int workers = 1);

}  // namespace wsmt
