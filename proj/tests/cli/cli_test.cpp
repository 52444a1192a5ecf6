// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "wsmt/checkpoint.hpp"
#include "wsmt/corpus.hpp"

using namespace wsmt;
using namespace wsmt::test;

namespace {

namespace fs = std::filesystem;

std::string wsmt_bin() {
  const char* bin = std::getenv("WSMT_BIN");
  if (bin == nullptr || *bin == '\0')
    throw std::runtime_error("WSMT_BIN must point at the wsmt binary");
  return bin;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
  static int counter = 0;
  std::string out_path = dir.file("cli_out_" + std::to_string(counter));
  std::string err_path = dir.file("cli_err_" + std::to_string(counter));
  ++counter;
  std::string cmd = wsmt_bin() + " " + args + " > " + out_path + " 2> " + err_path;
  int status = std::system(cmd.c_str());
  CliResult r;
  if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

bool contains(const std::string& s, const std::string& sub) {
  return s.find(sub) != std::string::npos;
}

long count_lines(const std::string& s) {
  long n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

constexpr const char* kTinyModel =
    " --set model.embed_dim=4 --set model.hidden_dim=8 --set model.max_len=6";
constexpr const char* kTinyTrain =
    " --set train.max_epochs=2 --set train.batch_size=8 --set train.dropout=0.1"
    " --set train.alpha=0.005";

// One generated task plus both pretrained directions and a finished
// wake-sleep run, shared across the suite.
struct Workbench {
  TempDir tmp;
  std::string task;
  std::string theta;
  std::string phi;
  std::string run1;
  CliResult theta_res;
  CliResult phi_res;
  CliResult ws_res;

  Workbench() {
    task = tmp.file("task");
    theta = tmp.file("theta.ckpt");
    phi = tmp.file("phi.ckpt");
    run1 = tmp.file("run1");

    must(run_cli(tmp, "synth --task substitution_cipher --vocab-size 6 --min-len 2"
                      " --max-len 4 --train-pairs 20 --mono-src 10 --mono-trg 10"
                      " --dev-pairs 5 --test-pairs 5 --seed 11 --out " + task),
         "synth");
    theta_res = must(
        run_cli(tmp, "train --train-src " + task + "/train.src --train-trg " + task +
                         "/train.trg --dev-src " + task + "/dev.src --dev-trg " + task +
                         "/dev.trg --vocab-src " + task + "/vocab.src --vocab-trg " + task +
                         "/vocab.trg --seed 3 --out " + theta + kTinyModel + kTinyTrain),
        "train theta");
    phi_res = must(
        run_cli(tmp, "train --train-src " + task + "/train.trg --train-trg " + task +
                         "/train.src --dev-src " + task + "/dev.trg --dev-trg " + task +
                         "/dev.src --vocab-src " + task + "/vocab.trg --vocab-trg " + task +
                         "/vocab.src --direction backward --seed 4 --out " + phi +
                         kTinyModel + kTinyTrain),
        "train phi");
    ws_res = must(run_cli(tmp, "wakesleep --data " + task + " --run-dir " + run1 +
                                   " --theta " + theta + " --phi " + phi +
                                   " --seed 7 --iterations 1 --workers 1" + kTinyModel +
                                   " --set train.max_epochs=1 --set train.batch_size=8"
                                   " --set train.dropout=0.1 --set eval.trials=1000"),
                  "wakesleep");
  }

  static CliResult must(CliResult r, const std::string& what) {
    if (r.code != 0)
      throw std::runtime_error("workbench " + what + " failed: " + r.err);
    return r;
  }
};

Workbench& bench() {
  static Workbench w;
  return w;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version flag prints and exits cleanly") {
  TempDir tmp;
  CliResult r = run_cli(tmp, "--version");
  CHECK(r.code == 0);
  CHECK(count_lines(r.out) == 1);
}

TEST_CASE("synth writes the task files and a stamped manifest") {
  TempDir tmp;
  std::string out = tmp.file("task");
  CliResult r = run_cli(tmp, "synth --task cipher_with_local_reorder --vocab-size 8"
                             " --min-len 2 --max-len 5 --train-pairs 12 --mono-src 6"
                             " --mono-trg 6 --dev-pairs 4 --test-pairs 4 --seed 2 --out " +
                                 out);
  REQUIRE(r.code == 0);
  for (const char* name : {"train.src", "train.trg", "dev.src", "dev.trg", "test.src",
                           "test.trg", "mono.src", "mono.trg", "vocab.src", "vocab.trg",
                           "mapping.tsv", "manifest.txt"})
    CHECK(fs::exists(fs::path(out) / name));
  std::string manifest = read_file(out + "/manifest.txt");
  CHECK(contains(manifest, "task.kind = cipher_with_local_reorder"));
  CHECK(contains(manifest, "task.train_pairs = 12"));
  CHECK(contains(manifest, "checksum.train.src = "));
  CHECK(contains(manifest, "code.version = "));
  CHECK(count_lines(read_file(out + "/train.src")) == 12);
  CHECK(count_lines(read_file(out + "/mono.trg")) == 6);
}

TEST_CASE("synth rejects an infeasible request with one error line") {
  TempDir tmp;
  CliResult r = run_cli(tmp, "synth --vocab-size 2 --min-len 1 --max-len 1"
                             " --train-pairs 50 --out " + tmp.file("task"));
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error: "));
  CHECK(r.out.empty());
}

TEST_CASE("bpe round trip through the binary restores the corpus") {
  TempDir tmp;
  std::string corpus = tmp.file("corpus.txt");
  std::string original = "the cat sat\nthe cat ran\nthe dog sat\nthe dog ran\n";
  write_file(corpus, original);

  std::string table = tmp.file("merges.txt");
  CliResult learn = run_cli(tmp, "bpe-learn --in " + corpus + " --merges 10 --out " + table);
  REQUIRE(learn.code == 0);
  CHECK(fs::exists(table));
  CHECK(fs::exists(table + ".manifest"));
  CHECK(contains(read_file(table + ".manifest"), "bpe.merges = 10"));

  std::string seg = tmp.file("seg.txt");
  CliResult apply = run_cli(tmp, "bpe-apply --merges " + table + " --in " + corpus +
                                     " --out " + seg);
  REQUIRE(apply.code == 0);
  CHECK(read_file(seg) != original);
  CHECK(count_lines(read_file(seg)) == 4);

  std::string restored = tmp.file("restored.txt");
  CliResult undo = run_cli(tmp, "bpe-apply --undo --merges " + table + " --in " + seg +
                                    " --out " + restored);
  REQUIRE(undo.code == 0);
  CHECK(read_file(restored) == original);
  CHECK(read_file(corpus) == original);
}

TEST_CASE("train reports its selection and writes a loadable checkpoint") {
  Workbench& w = bench();
  CHECK(contains(w.theta_res.out, "best_epoch = "));
  CHECK(contains(w.theta_res.out, "dev_bleu = "));
  CHECK(fs::exists(w.theta));
  CHECK(fs::exists(w.theta + ".manifest"));
  std::string manifest = read_file(w.theta + ".manifest");
  CHECK(contains(manifest, "model.hidden_dim = 8"));
  CHECK(contains(manifest, "run.seed = 3"));
  CHECK(contains(manifest, "checksum.data.train_src = "));

  LoadedModel loaded = load_model(w.theta);
  CHECK(loaded.model.config().direction == Direction::Forward);
  CHECK(loaded.src_vocab == Vocabulary::load(w.task + "/vocab.src"));
  CHECK(loaded.trg_vocab == Vocabulary::load(w.task + "/vocab.trg"));

  LoadedModel rev = load_model(w.phi);
  CHECK(rev.model.config().direction == Direction::Backward);
  CHECK(rev.src_vocab == Vocabulary::load(w.task + "/vocab.trg"));
}

TEST_CASE("translate decodes every input line deterministically") {
  Workbench& w = bench();
  std::string hyp = w.tmp.file("mono.hyp");
  CliResult r = run_cli(w.tmp, "translate --model " + w.theta + " --in " + w.task +
                                   "/mono.src --out " + hyp);
  REQUIRE(r.code == 0);
  CHECK(count_lines(read_file(hyp)) == 10);
  CHECK(fs::exists(hyp + ".manifest"));
  CHECK(contains(read_file(hyp + ".manifest"), "decode.mode = greedy"));

  std::string again = w.tmp.file("mono2.hyp");
  CliResult r2 = run_cli(w.tmp, "translate --model " + w.theta + " --in " + w.task +
                                    "/mono.src --out " + again);
  REQUIRE(r2.code == 0);
  CHECK(read_file(again) == read_file(hyp));
}

TEST_CASE("evaluate prints a two-decimal score on stdout only") {
  TempDir tmp;
  std::string ref = tmp.file("ref.txt");
  write_file(ref, "the cat sat on a mat\nthe dog barked all night\nbirds sing at dawn\n");
  CliResult r = run_cli(tmp, "evaluate --hyp " + ref + " --ref " + ref);
  REQUIRE(r.code == 0);
  CHECK(r.out == "BLEU = 100.00\n");
}

TEST_CASE("evaluate compares two systems with a significance verdict") {
  TempDir tmp;
  std::string ref = tmp.file("ref.txt"), b = tmp.file("b.txt");
  std::ostringstream refs, worst;
  for (int i = 0; i < 12; ++i) {
    refs << "tok" << i << " alpha beta gamma\n";
    worst << "zzz yyy xxx www\n";
  }
  write_file(ref, refs.str());
  write_file(b, worst.str());
  CliResult r = run_cli(tmp, "evaluate --hyp " + ref + " --ref " + ref + " --hyp-b " + b +
                                 " --trials 1000 --seed 6");
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "BLEU_A = 100.00"));
  CHECK(contains(r.out, "BLEU_B = 17.68"));
  CHECK(contains(r.out, "delta = +82.32"));
  CHECK(contains(r.out, "p_value = 0.0"));
  CHECK(contains(r.out, "significant = yes"));

  std::string manifest = tmp.file("eval.manifest");
  CliResult m = run_cli(tmp, "evaluate --hyp " + ref + " --ref " + ref + " --manifest " +
                                 manifest);
  REQUIRE(m.code == 0);
  CHECK(contains(read_file(manifest), "checksum.data.hyp = "));
}

TEST_CASE("wakesleep writes the full run layout and echoes the report") {
  Workbench& w = bench();
  for (const char* name : {"manifest.txt", "report.txt", "report.tsv", "metrics.log",
                           "theta.ckpt", "phi.ckpt"})
    CHECK(fs::exists(fs::path(w.run1) / name));
  CHECK(fs::exists(fs::path(w.run1) / "iter1" / "back.src"));
  CHECK(fs::exists(fs::path(w.run1) / "iter1" / "back_rev.src"));
  CHECK(fs::exists(fs::path(w.run1) / "iter1" / "theta.ckpt"));
  CHECK(w.ws_res.out == read_file(w.run1 + "/report.txt"));
  CHECK(contains(w.ws_res.out, "Iteration 0"));
  CHECK(contains(w.ws_res.out, "Iteration 1"));
  CHECK(count_lines(read_file(w.run1 + "/report.tsv")) == 3);
}

TEST_CASE("wakesleep reruns bit-identically from its own manifest") {
  Workbench& w = bench();
  std::string run2 = w.tmp.file("run2");
  CliResult r = run_cli(w.tmp, "wakesleep --config " + w.run1 + "/manifest.txt"
                               " --set run.dir=" + run2);
  REQUIRE(r.code == 0);
  CHECK(read_file(run2 + "/report.txt") == read_file(w.run1 + "/report.txt"));
  CHECK(read_file(run2 + "/report.tsv") == read_file(w.run1 + "/report.tsv"));
  CHECK(read_file(run2 + "/metrics.log") == read_file(w.run1 + "/metrics.log"));
  CHECK(r.out == w.ws_res.out);
}

TEST_CASE("report re-renders the saved metrics table") {
  Workbench& w = bench();
  CliResult r = run_cli(w.tmp, "report --tsv " + w.run1 + "/report.tsv");
  REQUIRE(r.code == 0);
  CHECK(r.out == read_file(w.run1 + "/report.txt"));
}

TEST_CASE("diagnose runs the exact-inference summaries") {
  Workbench& w = bench();
  std::string common = " --theta " + w.theta + " --mono " + w.task + "/mono.src";

  CliResult marginal =
      run_cli(w.tmp, "diagnose --op marginal" + common + " --trg " + w.task + "/dev.trg");
  REQUIRE(marginal.code == 0);
  CHECK(contains(marginal.out, "sentences = 5"));
  CHECK(contains(marginal.out, "log_marginal_mean = -"));

  CliResult posterior = run_cli(w.tmp, "diagnose --op posterior" + common + " --trg " +
                                           w.task + "/dev.trg --index 0 --top 3");
  REQUIRE(posterior.code == 0);
  CHECK(contains(posterior.out, "log_marginal = "));
  CHECK(count_lines(posterior.out) == 4);

  CliResult kl = run_cli(w.tmp, "diagnose --op kl" + common + " --phi " + w.phi +
                                    " --trg " + w.task + "/dev.trg");
  REQUIRE(kl.code == 0);
  CHECK(contains(kl.out, "kl_mean = "));

  CliResult mc = run_cli(w.tmp, "diagnose --op mc-sleep" + common + " --phi " + w.phi +
                                    " --dreams 50 --seed 5");
  REQUIRE(mc.code == 0);
  CHECK(contains(mc.out, "dreams = 50"));
  CHECK(contains(mc.out, "mc_sleep = -"));

  CliResult ae = run_cli(w.tmp, "diagnose --op autoencoder" + common + " --phi " + w.phi +
                                    " --trg " + w.task + "/dev.trg");
  REQUIRE(ae.code == 0);
  CHECK(contains(ae.out, "autoencoder_mean = 0."));
}

TEST_CASE("diagnose rejects unknown ops and missing companions") {
  Workbench& w = bench();
  CliResult bad = run_cli(w.tmp, "diagnose --op entropy --theta " + w.theta + " --mono " +
                                     w.task + "/mono.src");
  CHECK(bad.code == 1);
  CHECK(contains(bad.err, "error: diagnose: unknown op"));

  CliResult nophi = run_cli(w.tmp, "diagnose --op kl --theta " + w.theta + " --mono " +
                                       w.task + "/mono.src --trg " + w.task + "/dev.trg");
  CHECK(nophi.code == 1);
  CHECK(contains(nophi.err, "--phi is required"));
}

TEST_CASE("unknown flags and subcommands fail fast") {
  TempDir tmp;
  CHECK(run_cli(tmp, "train --bogus 1 --out x").code != 0);
  CHECK(run_cli(tmp, "frobnicate").code != 0);
  CHECK(run_cli(tmp, "").code != 0);
}

TEST_CASE("missing input files produce a single error line") {
  TempDir tmp;
  CliResult r = run_cli(tmp, "evaluate --hyp " + tmp.file("nope.txt") + " --ref " +
                                 tmp.file("nope2.txt"));
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(contains(r.err, "cannot open file"));
  CHECK(count_lines(r.err) == 1);
}

}
