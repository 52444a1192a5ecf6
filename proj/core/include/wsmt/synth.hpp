// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsmt/corpus.hpp"

namespace wsmt {

enum class TaskKind { SubstitutionCipher, CipherWithLocalReorder };

TaskKind task_kind_from_name(const std::string& name);
std::string task_kind_name(TaskKind kind);

struct TaskSpec {
  TaskKind kind = TaskKind::SubstitutionCipher;
  int vocab_size = 50;  // alphabet size per side, EOS excluded
  int min_len = 5;
  int max_len = 15;
  long train_pairs = 1000;
  long mono_src = 5000;
  long mono_trg = 5000;
  long dev_pairs = 500;
  long test_pairs = 500;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GeneratedTask {
  Vocabulary src_vocab;
  Vocabulary trg_vocab;
  Bitext train;
  Bitext dev;
  Bitext test;
  Monotext mono_src;  // source-language sentences
  Monotext mono_trg;  // target-language sentences
  std::vector<int> mapping;  // source token id -> target token id
};

GeneratedTask generate_task(const TaskSpec& spec);

// The bijective cipher (plus the optional local reorder) as a function.
Sentence apply_ground_truth(const Sentence& x, const std::vector<int>& mapping,
                            const Vocabulary& src_vocab, const Vocabulary& trg_vocab,
                            TaskKind kind);

// Writes corpora, vocabularies, the token mapping and a manifest with split
// checksums into dir (created if missing).
void write_task(const GeneratedTask& task, const TaskSpec& spec, const std::string& dir);

}  // namespace wsmt
