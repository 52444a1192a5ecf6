// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <sstream>
#include <string>
#include <vector>

#include "wsmt/bleu.hpp"
#include "wsmt/bpe.hpp"
#include "wsmt/model.hpp"
#include "wsmt/rng.hpp"
#include "wsmt/tape.hpp"

namespace {

using namespace wsmt;

Vocabulary bench_vocab(int content) {
  std::vector<std::string> tokens{kEosToken};
  for (int i = 0; i < content; ++i) tokens.push_back("tok" + std::to_string(i));
  return Vocabulary::from_tokens(tokens);
}

Sentence bench_sentence(const Vocabulary& v, int len, RngStream rng) {
  Sentence s;
  for (int i = 0; i < len; ++i)
    s.token_ids.push_back(1 + static_cast<int>(rng.uniform_below(
                                  static_cast<std::uint64_t>(v.size() - 1))));
  s.token_ids.push_back(v.eos_id());
  return s;
}

void BM_SoftmaxBackward(benchmark::State& state) {
  RngStream rng(1);
  Tensor x(64, 512);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
  for (auto _ : state) {
    Tape tape;
    Var in = tape.leaf(x);
    Var loss = tape.sum_all(tape.log_softmax_rows(in));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(in));
  }
}
BENCHMARK(BM_SoftmaxBackward);

void BM_Encode(benchmark::State& state) {
  Vocabulary src = bench_vocab(200);
  Vocabulary trg = bench_vocab(200);
  Seq2SeqModel model(make_model_config(src, trg, Direction::Forward, 32, 64, 60));
  model.init_params(RngStream(2));
  Sentence x = bench_sentence(src, static_cast<int>(state.range(0)), RngStream(3));
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encode)->Arg(10)->Arg(30);

void BM_GreedyDecode(benchmark::State& state) {
  Vocabulary src = bench_vocab(200);
  Vocabulary trg = bench_vocab(200);
  Seq2SeqModel model(make_model_config(src, trg, Direction::Forward, 32, 64, 30));
  model.init_params(RngStream(4));
  Sentence x = bench_sentence(src, 12, RngStream(5));
  DecodeConfig cfg;
  cfg.max_len = 30;
  for (auto _ : state) benchmark::DoNotOptimize(model.decode(x, cfg));
}
BENCHMARK(BM_GreedyDecode);

void BM_CorpusBleu(benchmark::State& state) {
  RngStream rng(6);
  std::vector<std::string> hyps, refs;
  for (int i = 0; i < 500; ++i) {
    std::ostringstream h, r;
    for (int t = 0; t < 15; ++t) {
      h << (t ? " " : "") << "w" << rng.uniform_below(40);
      r << (t ? " " : "") << "w" << rng.uniform_below(40);
    }
    hyps.push_back(h.str());
    refs.push_back(r.str());
  }
  for (auto _ : state) benchmark::DoNotOptimize(bleu(hyps, refs).score);
}
BENCHMARK(BM_CorpusBleu);

void BM_BpeSegment(benchmark::State& state) {
  Monotext corpus;
  corpus.vocab = Vocabulary::from_tokens(
      {kEosToken, "internationalization", "misunderstanding", "regularities",
       "counterexamples", "deterministic", "hallucination", "segmentation"});
  for (int i = 1; i < corpus.vocab.size(); ++i) {
    Sentence s;
    s.token_ids = {i, i, corpus.vocab.eos_id()};
    corpus.sentences.push_back(s);
  }
  MergeTable merges = learn_bpe({corpus}, 30);
  std::string line = "internationalization misunderstanding counterexamples segmentation";
  for (auto _ : state) benchmark::DoNotOptimize(apply_bpe_line(line, merges));
}
BENCHMARK(BM_BpeSegment);

}  // namespace

BENCHMARK_MAIN();
