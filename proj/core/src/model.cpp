// SPDX-License-Identifier: Apache-2.0
#include "wsmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wsmt/parallel.hpp"

namespace wsmt {

namespace {

double sigmoid_scalar(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

Tensor gru_plain(const Tensor& x, const Tensor& h, const Tensor& wzr, const Tensor& bzr,
                 const Tensor& wc, const Tensor& bc) {
  const Eigen::Index hidden = h.cols();
  Tensor xh(1, x.cols() + hidden);
  xh << x, h;
  Tensor zr = ((xh * wzr).rowwise() + bzr.row(0)).unaryExpr(&sigmoid_scalar);
  Tensor z = zr.leftCols(hidden);
  Tensor r = zr.rightCols(hidden);
  Tensor xrh(1, x.cols() + hidden);
  xrh << x, r.cwiseProduct(h);
  Tensor c = ((xrh * wc).rowwise() + bc.row(0)).array().tanh();
  return h + z.cwiseProduct(c - h);
}

int argmax_lowest_id(const Tensor& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j)
    if (row(0, j) > row(0, best)) best = static_cast<int>(j);
  return best;
}

}  // namespace

std::string direction_name(Direction d) {
  return d == Direction::Forward ? "forward" : "backward";
}

Direction direction_from_name(const std::string& name) {
  if (name == "forward") return Direction::Forward;
  if (name == "backward") return Direction::Backward;
  throw std::runtime_error("unknown direction: " + name);
}

DecodeMode decode_mode_from_name(const std::string& name) {
  if (name == "greedy") return DecodeMode::Greedy;
  if (name == "sample") return DecodeMode::Sample;
  if (name == "beam") return DecodeMode::Beam;
  throw std::runtime_error("unknown decode mode: " + name);
}

std::string decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::Greedy: return "greedy";
    case DecodeMode::Sample: return "sample";
    case DecodeMode::Beam: return "beam";
  }
  throw std::logic_error("bad decode mode");
}

void ModelConfig::validate() const {
  if (src_vocab_size < 2 || trg_vocab_size < 2)
    throw std::invalid_argument("vocabulary sizes must be at least 2");
  if (src_eos_id < 0 || src_eos_id >= src_vocab_size || trg_eos_id < 0 ||
      trg_eos_id >= trg_vocab_size)
    throw std::invalid_argument("EOS id out of range");
  if (embed_dim < 1 || hidden_dim < 1 || attn_dim < 1)
    throw std::invalid_argument("model dimensions must be positive");
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
}

ModelConfig make_model_config(const Vocabulary& src, const Vocabulary& trg, Direction dir,
                              int embed_dim, int hidden_dim, int max_len) {
  ModelConfig cfg;
  cfg.src_vocab_size = src.size();
  cfg.trg_vocab_size = trg.size();
  cfg.src_eos_id = src.eos_id();
  cfg.trg_eos_id = trg.eos_id();
  cfg.embed_dim = embed_dim;
  cfg.hidden_dim = hidden_dim;
  cfg.attn_dim = hidden_dim;
  cfg.max_len = max_len;
  cfg.direction = dir;
  cfg.src_vocab_hash = src.hash();
  cfg.trg_vocab_hash = trg.hash();
  return cfg;
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw std::invalid_argument("beam_width must be at least 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
}

Seq2SeqModel::Seq2SeqModel(ModelConfig config) : config_(config) {
  config_.validate();
  const int e = config_.embed_dim, h = config_.hidden_dim, a = config_.attn_dim;
  const int vs = config_.src_vocab_size, vt = config_.trg_vocab_size;
  src_embed_ = Tensor::Zero(vs, e);
  trg_embed_ = Tensor::Zero(vt, e);
  start_embed_ = Tensor::Zero(1, e);
  enc_fwd_wzr_ = Tensor::Zero(e + h, 2 * h);
  enc_fwd_bzr_ = Tensor::Zero(1, 2 * h);
  enc_fwd_wc_ = Tensor::Zero(e + h, h);
  enc_fwd_bc_ = Tensor::Zero(1, h);
  enc_bwd_wzr_ = Tensor::Zero(e + h, 2 * h);
  enc_bwd_bzr_ = Tensor::Zero(1, 2 * h);
  enc_bwd_wc_ = Tensor::Zero(e + h, h);
  enc_bwd_bc_ = Tensor::Zero(1, h);
  dec_init_w_ = Tensor::Zero(h, h);
  dec_init_b_ = Tensor::Zero(1, h);
  dec_wzr_ = Tensor::Zero(e + 2 * h + h, 2 * h);
  dec_bzr_ = Tensor::Zero(1, 2 * h);
  dec_wc_ = Tensor::Zero(e + 2 * h + h, h);
  dec_bc_ = Tensor::Zero(1, h);
  att_w_enc_ = Tensor::Zero(2 * h, a);
  att_w_dec_ = Tensor::Zero(h, a);
  att_b_ = Tensor::Zero(1, a);
  att_v_ = Tensor::Zero(a, 1);
  out_w_ = Tensor::Zero(h + 2 * h, vt);
  out_b_ = Tensor::Zero(1, vt);
}

std::vector<NamedTensor> Seq2SeqModel::params() const {
  auto* self = const_cast<Seq2SeqModel*>(this);
  return {
      {"src_embed", &self->src_embed_},     {"trg_embed", &self->trg_embed_},
      {"start_embed", &self->start_embed_}, {"enc_fwd_wzr", &self->enc_fwd_wzr_},
      {"enc_fwd_bzr", &self->enc_fwd_bzr_}, {"enc_fwd_wc", &self->enc_fwd_wc_},
      {"enc_fwd_bc", &self->enc_fwd_bc_},   {"enc_bwd_wzr", &self->enc_bwd_wzr_},
      {"enc_bwd_bzr", &self->enc_bwd_bzr_}, {"enc_bwd_wc", &self->enc_bwd_wc_},
      {"enc_bwd_bc", &self->enc_bwd_bc_},   {"dec_init_w", &self->dec_init_w_},
      {"dec_init_b", &self->dec_init_b_},   {"dec_wzr", &self->dec_wzr_},
      {"dec_bzr", &self->dec_bzr_},         {"dec_wc", &self->dec_wc_},
      {"dec_bc", &self->dec_bc_},           {"att_w_enc", &self->att_w_enc_},
      {"att_w_dec", &self->att_w_dec_},     {"att_b", &self->att_b_},
      {"att_v", &self->att_v_},             {"out_w", &self->out_w_},
      {"out_b", &self->out_b_},
  };
}

void Seq2SeqModel::init_params(RngStream rng) {
  static const char* kBiases[] = {"enc_fwd_bzr", "enc_fwd_bc", "enc_bwd_bzr",
                                  "enc_bwd_bc",  "dec_init_b", "dec_bzr",
                                  "dec_bc",      "att_b",      "out_b"};
  for (NamedTensor& p : params()) {
    bool is_bias = std::any_of(std::begin(kBiases), std::end(kBiases),
                               [&](const char* n) { return p.name == n; });
    if (is_bias)
      p.tensor->setZero();
    else
      glorot_fill(*p.tensor, rng.derive(p.name));
  }
}

std::uint64_t Seq2SeqModel::params_hash() const {
  std::uint64_t h = fnv1a64(std::string_view{});
  for (const NamedTensor& p : params()) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = tensor_hash(*p.tensor, h);
  }
  return h;
}

EncodedSource Seq2SeqModel::encode(const Sentence& x) const {
  const int h = config_.hidden_dim;
  const Eigen::Index s = x.length();
  if (s < 1) throw std::runtime_error("cannot encode an empty sentence");
  if (s > config_.max_len) throw std::runtime_error("overlong input sentence");
  Tensor fwd(s, h), bwd(s, h);
  Tensor state = Tensor::Zero(1, h);
  for (Eigen::Index t = 0; t < s; ++t) {
    int id = x.token_ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= config_.src_vocab_size)
      throw std::runtime_error("source token id out of range");
    state = gru_plain(src_embed_.row(id), state, enc_fwd_wzr_, enc_fwd_bzr_, enc_fwd_wc_,
                      enc_fwd_bc_);
    fwd.row(t) = state;
  }
  state = Tensor::Zero(1, h);
  for (Eigen::Index t = s - 1; t >= 0; --t) {
    int id = x.token_ids[static_cast<std::size_t>(t)];
    state = gru_plain(src_embed_.row(id), state, enc_bwd_wzr_, enc_bwd_bzr_, enc_bwd_wc_,
                      enc_bwd_bc_);
    bwd.row(t) = state;
  }
  EncodedSource enc;
  enc.annotations.resize(s, 2 * h);
  enc.annotations << fwd, bwd;
  enc.annotation_w = (enc.annotations * att_w_enc_).rowwise() + att_b_.row(0);
  enc.init_state = ((bwd.row(0) * dec_init_w_).rowwise() + dec_init_b_.row(0)).array().tanh();
  return enc;
}

Tensor Seq2SeqModel::step_log_probs(const EncodedSource& src, const Tensor& state,
                                    int prev_token, Tensor* next_state) const {
  Tensor q = state * att_w_dec_;  // 1 x A
  Tensor act = (src.annotation_w.rowwise() + q.row(0)).array().tanh();
  Tensor scores = act * att_v_;  // S x 1
  double mx = scores.col(0).maxCoeff();
  Eigen::ArrayXd ex = (scores.col(0).array() - mx).exp();
  Eigen::VectorXd alpha = (ex / ex.sum()).matrix();
  Tensor ctx = (src.annotations.transpose() * alpha).transpose();  // 1 x 2H

  Tensor emb;
  if (prev_token < 0) {
    emb = start_embed_;
  } else {
    if (prev_token >= config_.trg_vocab_size)
      throw std::runtime_error("target token id out of range");
    emb = trg_embed_.row(prev_token);
  }
  Tensor gin(1, emb.cols() + ctx.cols());
  gin << emb, ctx;
  Tensor s_new = gru_plain(gin, state, dec_wzr_, dec_bzr_, dec_wc_, dec_bc_);
  Tensor feat(1, s_new.cols() + ctx.cols());
  feat << s_new, ctx;
  Tensor logits = (feat * out_w_).rowwise() + out_b_.row(0);
  if (next_state != nullptr) *next_state = s_new;
  return log_softmax_rows(logits);
}

double Seq2SeqModel::log_prob(const Sentence& x, const Sentence& y) const {
  if (y.length() > config_.max_len) throw std::runtime_error("overlong output sentence");
  EncodedSource enc = encode(x);
  Tensor state = enc.init_state;
  double total = 0.0;
  int prev = -1;
  for (int id : y.token_ids) {
    if (id < 0 || id >= config_.trg_vocab_size)
      throw std::runtime_error("target token id out of range");
    Tensor next;
    Tensor lp = step_log_probs(enc, state, prev, &next);
    total += lp(0, id);
    state = next;
    prev = id;
  }
  return total;
}

double Seq2SeqModel::prefix_score(const Sentence& x, const std::vector<int>& prefix) const {
  if (static_cast<int>(prefix.size()) > config_.max_len)
    throw std::runtime_error("overlong prefix");
  EncodedSource enc = encode(x);
  Tensor state = enc.init_state;
  double total = 0.0;
  int prev = -1;
  for (int id : prefix) {
    Tensor next;
    Tensor lp = step_log_probs(enc, state, prev, &next);
    total += lp(0, id);
    state = next;
    prev = id;
  }
  return total;
}

Sentence Seq2SeqModel::decode(const Sentence& x, DecodeConfig cfg) const {
  cfg.validate();
  if (cfg.mode == DecodeMode::Beam) return decode_nbest(x, cfg).front().sentence;
  const int eos = config_.trg_eos_id;
  EncodedSource enc = encode(x);
  Tensor state = enc.init_state;
  Sentence out;
  int prev = -1;
  for (int step = 1; step <= cfg.max_len; ++step) {
    if (step == cfg.max_len) {
      out.token_ids.push_back(eos);  // truncation: EOS appended, not drawn
      break;
    }
    Tensor next;
    Tensor lp = step_log_probs(enc, state, prev, &next);
    int pick;
    if (cfg.mode == DecodeMode::Greedy) {
      pick = argmax_lowest_id(lp);
    } else {
      Eigen::ArrayXd w = ((lp.row(0).array() - lp.row(0).maxCoeff()) / cfg.temperature).exp();
      std::vector<double> weights(w.data(), w.data() + w.size());
      pick = static_cast<int>(cfg.rng.categorical(weights));
    }
    out.token_ids.push_back(pick);
    if (pick == eos) break;
    state = next;
    prev = pick;
  }
  return out;
}

std::vector<DecodeHypothesis> Seq2SeqModel::decode_nbest(const Sentence& x,
                                                         DecodeConfig cfg) const {
  cfg.validate();
  const int eos = config_.trg_eos_id;
  const int vocab = config_.trg_vocab_size;
  EncodedSource enc = encode(x);

  struct Hyp {
    std::vector<int> tokens;
    Tensor state;
    int prev = -1;
    double score = 0.0;
  };
  std::vector<Hyp> active{{{}, enc.init_state, -1, 0.0}};
  std::vector<DecodeHypothesis> done;

  for (int step = 1; step <= cfg.max_len && !active.empty(); ++step) {
    if (step == cfg.max_len) {
      for (Hyp& h : active) {
        Tensor lp = step_log_probs(enc, h.state, h.prev, nullptr);
        h.tokens.push_back(eos);
        done.push_back({Sentence{std::move(h.tokens)}, h.score + lp(0, eos)});
      }
      break;
    }
    struct Cand {
      std::size_t parent;
      int token;
      double score;
    };
    std::vector<Cand> cands;
    std::vector<Tensor> next_states(active.size());
    cands.reserve(active.size() * static_cast<std::size_t>(vocab));
    for (std::size_t i = 0; i < active.size(); ++i) {
      Tensor lp = step_log_probs(enc, active[i].state, active[i].prev, &next_states[i]);
      for (int v = 0; v < vocab; ++v)
        cands.push_back({i, v, active[i].score + lp(0, v)});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });
    std::vector<Hyp> next_active;
    std::size_t taken = 0;
    for (const Cand& c : cands) {
      if (taken == static_cast<std::size_t>(cfg.beam_width)) break;
      ++taken;
      Hyp h;
      h.tokens = active[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.score = c.score;
      if (c.token == eos) {
        done.push_back({Sentence{std::move(h.tokens)}, h.score});
      } else {
        h.state = next_states[c.parent];
        h.prev = c.token;
        next_active.push_back(std::move(h));
      }
    }
    active = std::move(next_active);
  }

  std::stable_sort(done.begin(), done.end(),
                   [](const DecodeHypothesis& a, const DecodeHypothesis& b) {
                     if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                     return a.sentence.token_ids < b.sentence.token_ids;
                   });
  if (done.empty()) throw std::logic_error("beam search produced no hypotheses");
  if (done.size() > static_cast<std::size_t>(cfg.beam_width))
    done.resize(static_cast<std::size_t>(cfg.beam_width));
  return done;
}

Var Seq2SeqModel::build_loss(Tape& tape, const Bitext& data,
                             const std::vector<std::size_t>& batch,
                             std::vector<Var>& param_vars, double dropout_prob,
                             RngStream dropout_rng) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int hidden = config_.hidden_dim;
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const bool train = dropout_prob > 0.0;

  Eigen::Index s_len = 0, t_len = 0;
  for (std::size_t idx : batch) {
    const auto& [sx, sy] = data.pairs[idx];
    s_len = std::max(s_len, static_cast<Eigen::Index>(sx.length()));
    t_len = std::max(t_len, static_cast<Eigen::Index>(sy.length()));
  }
  if (s_len > config_.max_len || t_len > config_.max_len)
    throw std::runtime_error("overlong sentence in batch");

  std::vector<std::vector<int>> src_ids(static_cast<std::size_t>(s_len),
                                        std::vector<int>(static_cast<std::size_t>(b)));
  std::vector<std::vector<int>> trg_ids(static_cast<std::size_t>(t_len),
                                        std::vector<int>(static_cast<std::size_t>(b)));
  Tensor src_mask = Tensor::Zero(b, s_len);
  Tensor trg_mask = Tensor::Zero(b, t_len);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& [sx, sy] = data.pairs[batch[static_cast<std::size_t>(i)]];
    for (Eigen::Index t = 0; t < s_len; ++t) {
      bool real = t < sx.length();
      src_ids[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
          real ? sx.token_ids[static_cast<std::size_t>(t)] : config_.src_eos_id;
      if (real) src_mask(i, t) = 1.0;
    }
    for (Eigen::Index t = 0; t < t_len; ++t) {
      bool real = t < sy.length();
      trg_ids[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
          real ? sy.token_ids[static_cast<std::size_t>(t)] : config_.trg_eos_id;
      if (real) trg_mask(i, t) = 1.0;
    }
  }
  const double total_tokens = trg_mask.sum();

  param_vars.clear();
  std::vector<NamedTensor> registry = params();
  for (const NamedTensor& p : registry) param_vars.push_back(tape.leaf(*p.tensor));
  auto pv = [&](const char* name) {
    for (std::size_t i = 0; i < registry.size(); ++i)
      if (registry[i].name == name) return param_vars[i];
    throw std::logic_error("unknown parameter");
  };
  const Var src_embed = pv("src_embed"), trg_embed = pv("trg_embed");
  const Var start_embed = pv("start_embed");
  const Var out_w = pv("out_w"), out_b = pv("out_b");

  auto gru = [&](Var x, Var h, Var wzr, Var bzr, Var wc, Var bc) {
    Var zr = tape.sigmoid(tape.affine(tape.concat_cols(x, h), wzr, bzr));
    Var z = tape.slice_cols(zr, 0, hidden);
    Var r = tape.slice_cols(zr, hidden, hidden);
    Var c = tape.tanh(tape.affine(tape.concat_cols(x, tape.cmul(r, h)), wc, bc));
    return tape.add(h, tape.cmul(z, tape.sub(c, h)));
  };

  // Encoder: state frozen at padded positions so annotations and the final
  // backward state match the per-sentence unpadded computation.
  std::vector<Var> fwd_states(static_cast<std::size_t>(s_len));
  std::vector<Var> bwd_states(static_cast<std::size_t>(s_len));
  std::vector<Var> src_embs(static_cast<std::size_t>(s_len));
  for (Eigen::Index t = 0; t < s_len; ++t) {
    Var emb = tape.rows(src_embed, src_ids[static_cast<std::size_t>(t)]);
    src_embs[static_cast<std::size_t>(t)] = tape.dropout(emb, dropout_prob, dropout_rng, train);
  }
  Var h = tape.constant(Tensor::Zero(b, hidden));
  for (Eigen::Index t = 0; t < s_len; ++t) {
    Var hn = gru(src_embs[static_cast<std::size_t>(t)], h, pv("enc_fwd_wzr"),
                 pv("enc_fwd_bzr"), pv("enc_fwd_wc"), pv("enc_fwd_bc"));
    h = tape.row_lerp(h, hn, src_mask.col(t));
    fwd_states[static_cast<std::size_t>(t)] = h;
  }
  h = tape.constant(Tensor::Zero(b, hidden));
  for (Eigen::Index t = s_len - 1; t >= 0; --t) {
    Var hn = gru(src_embs[static_cast<std::size_t>(t)], h, pv("enc_bwd_wzr"),
                 pv("enc_bwd_bzr"), pv("enc_bwd_wc"), pv("enc_bwd_bc"));
    h = tape.row_lerp(h, hn, src_mask.col(t));
    bwd_states[static_cast<std::size_t>(t)] = h;
  }
  Var ann = tape.concat_cols(tape.stack_steps(fwd_states), tape.stack_steps(bwd_states));
  Var ann_w = tape.affine(ann, pv("att_w_enc"), pv("att_b"));
  Var state = tape.tanh(tape.affine(bwd_states[0], pv("dec_init_w"), pv("dec_init_b")));

  Var loss_sum;
  Var prev_emb = tape.repeat_rows(start_embed, b);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Var qw = tape.matmul(state, pv("att_w_dec"));
    Var act = tape.tanh(tape.add(ann_w, tape.repeat_rows(qw, s_len)));
    Var scores = tape.unflatten_col(tape.matmul(act, pv("att_v")), b, s_len);
    Var alpha = tape.masked_softmax_rows(scores, src_mask);
    Var ctx = tape.segment_weighted_sum(alpha, ann);

    Var emb = tape.dropout(prev_emb, dropout_prob, dropout_rng, train);
    Var gin = tape.concat_cols(emb, ctx);
    state = gru(gin, state, pv("dec_wzr"), pv("dec_bzr"), pv("dec_wc"), pv("dec_bc"));

    Var feat = tape.dropout(tape.concat_cols(state, ctx), dropout_prob, dropout_rng, train);
    Var lp = tape.log_softmax_rows(tape.affine(feat, out_w, out_b));
    Var nll = tape.pick_nll(lp, trg_ids[static_cast<std::size_t>(t)], trg_mask.col(t));
    loss_sum = loss_sum.valid() ? tape.add(loss_sum, nll) : nll;

    if (t + 1 < t_len)
      prev_emb = tape.rows(trg_embed, trg_ids[static_cast<std::size_t>(t)]);
  }
  return tape.scale(loss_sum, 1.0 / total_tokens);
}

std::vector<Sentence> decode_corpus(const Seq2SeqModel& model,
                                    const std::vector<Sentence>& sources,
                                    const DecodeConfig& cfg, RngStream rng, int workers) {
  std::vector<Sentence> out(sources.size());
  parallel_for(sources.size(), workers, [&](std::size_t i) {
    DecodeConfig per = cfg;
    per.rng = rng.derive(static_cast<std::uint64_t>(i));
    out[i] = model.decode(sources[i], per);
  });
  return out;
}

}  // namespace wsmt
