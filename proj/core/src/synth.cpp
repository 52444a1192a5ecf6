// SPDX-License-Identifier: Apache-2.0
#include "wsmt/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "wsmt/rng.hpp"

namespace wsmt {

namespace {

constexpr double kZipfExponent = 1.1;

std::vector<double> zipf_weights(int vocab_size) {
  std::vector<double> w(static_cast<std::size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i)
    w[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -kZipfExponent);
  return w;
}

Vocabulary alphabet(const std::string& prefix, int vocab_size) {
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(vocab_size) + 1);
  tokens.emplace_back(kEosToken);
  for (int i = 0; i < vocab_size; ++i) tokens.push_back(prefix + std::to_string(i));
  return Vocabulary::from_tokens(std::move(tokens));
}

// Distinct sentence count, saturated at a large cap.
double sentence_space(const TaskSpec& spec) {
  double total = 0.0;
  for (int len = spec.min_len; len <= spec.max_len; ++len) {
    total += std::pow(static_cast<double>(spec.vocab_size), len);
    if (total > 1e18) return 1e18;
  }
  return total;
}

}  // namespace

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "substitution_cipher") return TaskKind::SubstitutionCipher;
  if (name == "cipher_with_local_reorder") return TaskKind::CipherWithLocalReorder;
  throw std::runtime_error("unknown task kind: " + name);
}

std::string task_kind_name(TaskKind kind) {
  return kind == TaskKind::SubstitutionCipher ? "substitution_cipher"
                                              : "cipher_with_local_reorder";
}

void TaskSpec::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be at least 2");
  if (min_len < 1 || max_len < min_len)
    throw std::invalid_argument("need 1 <= min_len <= max_len");
  if (train_pairs < 0 || mono_src < 0 || mono_trg < 0 || dev_pairs < 0 || test_pairs < 0)
    throw std::invalid_argument("split sizes must be nonnegative");
  double required = static_cast<double>(train_pairs) + mono_src + mono_trg + dev_pairs +
                    static_cast<double>(test_pairs);
  if (required > sentence_space(*this))
    throw std::invalid_argument("requested split sizes exceed the sentence space");
}

Sentence apply_ground_truth(const Sentence& x, const std::vector<int>& mapping,
                            const Vocabulary& src_vocab, const Vocabulary& trg_vocab,
                            TaskKind kind) {
  Sentence y;
  y.token_ids.reserve(x.token_ids.size());
  for (int id : x.token_ids) {
    if (id == src_vocab.eos_id()) {
      y.token_ids.push_back(trg_vocab.eos_id());
    } else {
      if (id < 0 || id >= static_cast<int>(mapping.size()))
        throw std::runtime_error("token id outside the cipher mapping");
      y.token_ids.push_back(mapping[static_cast<std::size_t>(id)]);
    }
  }
  if (kind == TaskKind::CipherWithLocalReorder) {
    std::size_t content = y.token_ids.size() - 1;  // EOS stays in place
    for (std::size_t t = 0; t + 1 < content; t += 2)
      std::swap(y.token_ids[t], y.token_ids[t + 1]);
  }
  return y;
}

GeneratedTask generate_task(const TaskSpec& spec) {
  spec.validate();
  GeneratedTask task;
  task.src_vocab = alphabet("s", spec.vocab_size);
  task.trg_vocab = alphabet("t", spec.vocab_size);

  RngStream root(spec.seed);

  // mapping[src id] = trg id via a seeded permutation of the alphabet
  {
    RngStream perm_rng = root.derive("mapping");
    std::vector<int> perm(static_cast<std::size_t>(spec.vocab_size));
    for (int i = 0; i < spec.vocab_size; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[perm_rng.uniform_below(i)]);
    task.mapping.assign(static_cast<std::size_t>(task.src_vocab.size()), -1);
    task.mapping[static_cast<std::size_t>(task.src_vocab.eos_id())] = task.trg_vocab.eos_id();
    for (int i = 0; i < spec.vocab_size; ++i)
      task.mapping[static_cast<std::size_t>(1 + i)] = 1 + perm[static_cast<std::size_t>(i)];
  }

  const std::vector<double> weights = zipf_weights(spec.vocab_size);
  std::set<std::vector<int>> used;
  auto draw_disjoint = [&](RngStream& rng) {
    for (;;) {
      int len = spec.min_len +
                static_cast<int>(rng.uniform_below(
                    static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
      Sentence x;
      x.token_ids.reserve(static_cast<std::size_t>(len) + 1);
      for (int t = 0; t < len; ++t)
        x.token_ids.push_back(1 + static_cast<int>(rng.categorical(weights)));
      x.token_ids.push_back(task.src_vocab.eos_id());
      if (used.insert(x.token_ids).second) return x;
    }
  };
  auto translate = [&](const Sentence& x) {
    return apply_ground_truth(x, task.mapping, task.src_vocab, task.trg_vocab, spec.kind);
  };
  auto fill_bitext = [&](Bitext& bt, long pairs, const char* label) {
    bt.src_vocab = task.src_vocab;
    bt.trg_vocab = task.trg_vocab;
    bt.role = PairRole::Observed;
    RngStream rng = root.derive(label);
    bt.pairs.reserve(static_cast<std::size_t>(pairs));
    for (long i = 0; i < pairs; ++i) {
      Sentence x = draw_disjoint(rng);
      bt.pairs.emplace_back(x, translate(x));
    }
  };

  fill_bitext(task.train, spec.train_pairs, "train");
  fill_bitext(task.dev, spec.dev_pairs, "dev");
  fill_bitext(task.test, spec.test_pairs, "test");

  {
    task.mono_trg.vocab = task.trg_vocab;
    RngStream rng = root.derive("mono_trg");
    task.mono_trg.sentences.reserve(static_cast<std::size_t>(spec.mono_trg));
    for (long i = 0; i < spec.mono_trg; ++i)
      task.mono_trg.sentences.push_back(translate(draw_disjoint(rng)));
  }
  {
    task.mono_src.vocab = task.src_vocab;
    RngStream rng = root.derive("mono_src");
    task.mono_src.sentences.reserve(static_cast<std::size_t>(spec.mono_src));
    for (long i = 0; i < spec.mono_src; ++i) task.mono_src.sentences.push_back(draw_disjoint(rng));
  }
  return task;
}

void write_task(const GeneratedTask& task, const TaskSpec& spec, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) { return dir + "/" + name; };

  save_bitext(task.train, path("train.src"), path("train.trg"));
  save_bitext(task.dev, path("dev.src"), path("dev.trg"));
  save_bitext(task.test, path("test.src"), path("test.trg"));
  save_monotext(task.mono_src, path("mono.src"));
  save_monotext(task.mono_trg, path("mono.trg"));
  task.src_vocab.save(path("vocab.src"));
  task.trg_vocab.save(path("vocab.trg"));

  {
    std::ofstream out(path("mapping.tsv"), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write mapping file");
    for (int id = 0; id < task.src_vocab.size(); ++id) {
      int trg = task.mapping[static_cast<std::size_t>(id)];
      out << task.src_vocab.token(id) << '\t' << task.trg_vocab.token(trg) << '\n';
    }
  }

  std::map<std::string, std::string> manifest;
  manifest["task.kind"] = task_kind_name(spec.kind);
  manifest["task.vocab_size"] = std::to_string(spec.vocab_size);
  manifest["task.min_len"] = std::to_string(spec.min_len);
  manifest["task.max_len"] = std::to_string(spec.max_len);
  manifest["task.train_pairs"] = std::to_string(spec.train_pairs);
  manifest["task.mono_src"] = std::to_string(spec.mono_src);
  manifest["task.mono_trg"] = std::to_string(spec.mono_trg);
  manifest["task.dev_pairs"] = std::to_string(spec.dev_pairs);
  manifest["task.test_pairs"] = std::to_string(spec.test_pairs);
  manifest["task.seed"] = std::to_string(spec.seed);
  for (const char* name : {"train.src", "train.trg", "dev.src", "dev.trg", "test.src",
                           "test.trg", "mono.src", "mono.trg", "vocab.src", "vocab.trg",
                           "mapping.tsv"})
    manifest[std::string("checksum.") + name] = hex64(file_hash(path(name)));

  std::ofstream out(path("manifest.txt"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write task manifest");
  for (const auto& [k, v] : manifest) out << k << " = " << v << '\n';
}

}  // namespace wsmt
