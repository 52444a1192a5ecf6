// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "wsmt/corpus.hpp"
#include "wsmt/rng.hpp"
#include "wsmt/tape.hpp"
#include "wsmt/tensor.hpp"

namespace wsmt {

// forward (theta) translates source to target; backward (phi) is the
// inference network running target to source.
enum class Direction { Forward, Backward };

std::string direction_name(Direction d);
Direction direction_from_name(const std::string& name);

struct ModelConfig {
  int src_vocab_size = 0;
  int trg_vocab_size = 0;
  int src_eos_id = 0;
  int trg_eos_id = 0;
  int embed_dim = 32;
  int hidden_dim = 64;
  int attn_dim = 64;
  int max_len = 30;
  Direction direction = Direction::Forward;
  std::uint64_t src_vocab_hash = 0;
  std::uint64_t trg_vocab_hash = 0;

  void validate() const;
};

ModelConfig make_model_config(const Vocabulary& src, const Vocabulary& trg, Direction dir,
                              int embed_dim = 32, int hidden_dim = 64, int max_len = 30);

enum class DecodeMode { Greedy, Sample, Beam };

DecodeMode decode_mode_from_name(const std::string& name);
std::string decode_mode_name(DecodeMode mode);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::Greedy;
  int beam_width = 10;
  int max_len = 30;
  double temperature = 1.0;
  RngStream rng{0};  // consumed in sample mode only

  void validate() const;
};

// Encoder pass over one sentence, reused across decoder steps.
struct EncodedSource {
  Tensor annotations;   // S x 2H
  Tensor annotation_w;  // S x A, annotations * att_w_enc + att_b
  Tensor init_state;    // 1 x H
};

struct DecodeHypothesis {
  Sentence sentence;
  double log_prob = 0.0;
};

class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  void init_params(RngStream rng);
  // Stable name -> tensor registry; order is fixed across runs. The handles
  // point into this model, so they stay valid while it lives.
  std::vector<NamedTensor> params() const;
  std::uint64_t params_hash() const;

  // Plain forward path (no gradients).
  EncodedSource encode(const Sentence& x) const;
  // Next-token log-distribution given the previous state; prev_token < 0
  // means the learned start-of-sequence input.
  Tensor step_log_probs(const EncodedSource& src, const Tensor& state, int prev_token,
                        Tensor* next_state) const;
  double log_prob(const Sentence& x, const Sentence& y) const;
  // Per-step log p(y_t | ...) without the final EOS factor when drop_last_eos.
  double prefix_score(const Sentence& x, const std::vector<int>& prefix) const;

  Sentence decode(const Sentence& x, DecodeConfig cfg) const;
  std::vector<DecodeHypothesis> decode_nbest(const Sentence& x, DecodeConfig cfg) const;

  // Teacher-forced batch loss (mean per-token NLL) recorded on a tape.
  // Returns the loss Var; leaves for parameters are appended in params() order
  // and reported through param_vars.
  Var build_loss(Tape& tape, const Bitext& data, const std::vector<std::size_t>& batch,
                 std::vector<Var>& param_vars, double dropout_prob, RngStream dropout_rng) const;

 private:
  ModelConfig config_;

  Tensor src_embed_, trg_embed_, start_embed_;
  Tensor enc_fwd_wzr_, enc_fwd_bzr_, enc_fwd_wc_, enc_fwd_bc_;
  Tensor enc_bwd_wzr_, enc_bwd_bzr_, enc_bwd_wc_, enc_bwd_bc_;
  Tensor dec_init_w_, dec_init_b_;
  Tensor dec_wzr_, dec_bzr_, dec_wc_, dec_bc_;
  Tensor att_w_enc_, att_w_dec_, att_b_, att_v_;
  Tensor out_w_, out_b_;
};

// Corpus decoding with per-sentence derived rng; deterministic for any
// worker count. rng is the run-level stream for this decode pass.
std::vector<Sentence> decode_corpus(const Seq2SeqModel& model,
                                    const std::vector<Sentence>& sources,
                                    const DecodeConfig& cfg, RngStream rng, int workers);

}  // namespace wsmt
