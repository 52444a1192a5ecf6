// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "wsmt/checkpoint.hpp"

using namespace wsmt;
using namespace wsmt::test;

namespace {

struct Fixture {
  Vocabulary src = tiny_vocab({"a", "b"});
  Vocabulary trg = tiny_vocab({"x", "y", "z"});

  Seq2SeqModel model(std::uint64_t seed = 11) const {
    ModelConfig cfg = make_model_config(src, trg, Direction::Forward, 4, 8, 5);
    Seq2SeqModel m(cfg);
    m.init_params(RngStream(seed));
    return m;
  }
};

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip preserves parameters and config") {
  TempDir tmp;
  Fixture f;
  Seq2SeqModel m = f.model();
  save_checkpoint(tmp.file("m.ckpt"), m, f.src, f.trg);
  LoadedModel loaded = load_model(tmp.file("m.ckpt"));
  CHECK(loaded.model.params_hash() == m.params_hash());
  CHECK(loaded.model.config().hidden_dim == 8);
  CHECK(loaded.model.config().max_len == 5);
  CHECK(loaded.src_vocab == f.src);
  CHECK(loaded.trg_vocab == f.trg);
  CHECK_FALSE(loaded.adam.has_value());

  Sentence x = sent({1, 2});
  DecodeConfig dc;
  dc.max_len = 5;
  CHECK(loaded.model.decode(x, dc) == m.decode(x, dc));
}

TEST_CASE("adam state rides along when provided") {
  TempDir tmp;
  Fixture f;
  Seq2SeqModel m = f.model();
  auto params = m.params();
  AdamState adam(params, AdamHyper{});
  std::vector<Tensor> grads;
  for (const NamedTensor& p : params) grads.push_back(Tensor::Constant(p.tensor->rows(), p.tensor->cols(), 0.01));
  adam.step(params, grads, 0.0);
  save_checkpoint(tmp.file("m.ckpt"), m, f.src, f.trg, &adam);
  LoadedModel loaded = load_model(tmp.file("m.ckpt"));
  REQUIRE(loaded.adam.has_value());
  CHECK(loaded.adam->t == 1);
  REQUIRE(loaded.adam->m.size() == params.size());
  CHECK(loaded.adam->m[0] == adam.first_moments()[0]);
  CHECK(loaded.adam->v[3] == adam.second_moments()[3]);
}

TEST_CASE("restore_model rejects a mismatched architecture") {
  TempDir tmp;
  Fixture f;
  Seq2SeqModel m = f.model();
  save_checkpoint(tmp.file("m.ckpt"), m, f.src, f.trg);
  Checkpoint ckpt = load_checkpoint(tmp.file("m.ckpt"));

  ModelConfig other = make_model_config(f.src, f.trg, Direction::Forward, 4, 16, 5);
  Seq2SeqModel wrong(other);
  wrong.init_params(RngStream(1));
  CHECK_THROWS_AS(restore_model(wrong, ckpt), std::runtime_error);

  Vocabulary bigger = tiny_vocab({"a", "b", "c"});
  ModelConfig vother = make_model_config(bigger, f.trg, Direction::Forward, 4, 8, 5);
  Seq2SeqModel vwrong(vother);
  vwrong.init_params(RngStream(1));
  CHECK_THROWS_AS(restore_model(vwrong, ckpt), std::runtime_error);
}

TEST_CASE("corrupted files fail the integrity check") {
  TempDir tmp;
  Fixture f;
  Seq2SeqModel m = f.model();
  save_checkpoint(tmp.file("m.ckpt"), m, f.src, f.trg);
  std::string raw = read_file(tmp.file("m.ckpt"));
  raw[raw.size() / 2] ^= 0x01;
  write_file(tmp.file("bad.ckpt"), raw);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("bad.ckpt")), std::runtime_error);

  write_file(tmp.file("junk.ckpt"), "not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(tmp.file("junk.ckpt")), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("absent.ckpt")), std::runtime_error);
}

TEST_CASE("truncated files are rejected") {
  TempDir tmp;
  Fixture f;
  Seq2SeqModel m = f.model();
  save_checkpoint(tmp.file("m.ckpt"), m, f.src, f.trg);
  std::string raw = read_file(tmp.file("m.ckpt"));
  write_file(tmp.file("cut.ckpt"), raw.substr(0, raw.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(tmp.file("cut.ckpt")), std::runtime_error);
}

}
