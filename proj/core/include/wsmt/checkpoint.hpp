// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wsmt/corpus.hpp"
#include "wsmt/model.hpp"
#include "wsmt/optim.hpp"

namespace wsmt {

struct AdamSnapshot {
  long t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> src_tokens;
  std::vector<std::string> trg_tokens;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::optional<AdamSnapshot> adam;
};

void save_checkpoint(const std::string& path, const Seq2SeqModel& model,
                     const Vocabulary& src_vocab, const Vocabulary& trg_vocab,
                     const AdamState* adam = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Copies the checkpoint's tensors into an existing model; shapes, names and
// vocabulary hashes must match.
void restore_model(Seq2SeqModel& model, const Checkpoint& ckpt);

// Convenience: rebuild model and vocabularies straight from a file.
struct LoadedModel {
  Seq2SeqModel model;
  Vocabulary src_vocab;
  Vocabulary trg_vocab;
  std::optional<AdamSnapshot> adam;
};
LoadedModel load_model(const std::string& path);

}  // namespace wsmt
