// SPDX-License-Identifier: Apache-2.0
#include "wsmt/train.hpp"

#include <algorithm>
#include <stdexcept>

#include "wsmt/bleu.hpp"
#include "wsmt/logging.hpp"
#include "wsmt/tape.hpp"

namespace wsmt {

namespace {

struct Snapshot {
  std::vector<Tensor> params;
  AdamSnapshot adam;
  int epoch = 0;
  std::optional<double> dev_bleu;
};

Snapshot take_snapshot(const Seq2SeqModel& model, const AdamState& adam, int epoch,
                       std::optional<double> dev_bleu) {
  Snapshot snap;
  for (const NamedTensor& p : model.params()) snap.params.push_back(*p.tensor);
  snap.adam.t = adam.step_count();
  snap.adam.m = adam.first_moments();
  snap.adam.v = adam.second_moments();
  snap.epoch = epoch;
  snap.dev_bleu = dev_bleu;
  return snap;
}

void restore_snapshot(Seq2SeqModel& model, const Snapshot& snap) {
  std::vector<NamedTensor> params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = snap.params[i];
}

std::optional<double> eval_dev(const Seq2SeqModel& model, const Bitext& dev, int workers) {
  if (dev.pairs.empty()) return std::nullopt;
  std::vector<Sentence> sources, refs;
  sources.reserve(dev.pairs.size());
  refs.reserve(dev.pairs.size());
  for (const auto& [x, y] : dev.pairs) {
    sources.push_back(x);
    refs.push_back(y);
  }
  DecodeConfig cfg;
  cfg.mode = DecodeMode::Greedy;
  cfg.max_len = model.config().max_len;
  std::vector<Sentence> hyps = decode_corpus(model, sources, cfg, RngStream(0), workers);
  return bleu(hyps, refs, dev.trg_vocab).score;
}

}  // namespace

TrainResult train_mle(Seq2SeqModel& model, const Bitext& data, const TrainHyper& hyper,
                      const Bitext& dev, RngStream rng, StopperConfig stopper, int workers) {
  hyper.validate();
  if (data.pairs.empty()) throw std::runtime_error("train_mle: empty training bitext");
  if (stopper.patience < 1) throw std::invalid_argument("patience must be at least 1");

  const int len_cap = std::min(hyper.max_len, model.config().max_len);
  std::vector<std::size_t> usable;
  usable.reserve(data.pairs.size());
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const auto& [x, y] = data.pairs[i];
    if (x.length() <= len_cap && y.length() <= len_cap) usable.push_back(i);
  }
  if (usable.size() < data.pairs.size())
    log::warn("overlong_pairs_dropped",
              {{"dropped", log::str(data.pairs.size() - usable.size())},
               {"len_cap", log::str(len_cap)}});
  if (usable.empty()) throw std::runtime_error("train_mle: no trainable pairs within max_len");

  std::vector<NamedTensor> params = model.params();
  AdamState adam(params, hyper.adam);
  TrainResult result;

  Snapshot best = take_snapshot(model, adam, 0, eval_dev(model, dev, workers));
  const bool use_dev = best.dev_bleu.has_value();

  RngStream shuffle_root = rng.derive("shuffle");
  RngStream dropout_root = rng.derive("dropout");

  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    RngStream shuffle_rng = shuffle_root.derive(static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order = usable;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);

    double loss_sum = 0.0;
    long batch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      Tape tape;
      std::vector<Var> param_vars;
      RngStream dropout_rng = dropout_root.derive(static_cast<std::uint64_t>(epoch))
                                  .derive(static_cast<std::uint64_t>(batch_count));
      Var loss = model.build_loss(tape, data, batch, param_vars, hyper.dropout_prob, dropout_rng);
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(param_vars.size());
      for (Var v : param_vars) grads.push_back(tape.grad(v));
      clip_global_norm(grads, hyper.clip_norm);
      adam.step(params, grads, hyper.l2_weight);
      loss_sum += tape.value(loss)(0, 0);
      ++batch_count;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = batch_count > 0 ? loss_sum / static_cast<double>(batch_count) : 0.0;
    record.dev_bleu = eval_dev(model, dev, workers);
    result.history.push_back(record);
    log::info("epoch", {{"epoch", log::str(epoch)},
                        {"train_loss", log::str(record.train_loss)},
                        {"dev_bleu", record.dev_bleu ? log::str(*record.dev_bleu) : "n/a"}});

    if (use_dev) {
      if (*record.dev_bleu > *best.dev_bleu) {
        best = take_snapshot(model, adam, epoch, record.dev_bleu);
      } else if (epoch - best.epoch >= stopper.patience) {
        log::info("early_stop", {{"epoch", log::str(epoch)},
                                 {"best_epoch", log::str(best.epoch)}});
        break;
      }
    } else {
      best = take_snapshot(model, adam, epoch, std::nullopt);
    }
  }

  restore_snapshot(model, best);
  result.best_epoch = best.epoch;
  result.best_dev_bleu = best.dev_bleu;
  result.adam = std::move(best.adam);
  return result;
}

}  // namespace wsmt
