// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "wsmt/corpus.hpp"

namespace wsmt {

inline constexpr int kBleuOrder = 4;

std::vector<std::string> tokenize_13a(const std::string& text);
std::string lowercase_ascii(const std::string& text);

struct BleuStats {
  std::array<long, kBleuOrder> match{};
  std::array<long, kBleuOrder> total{};
  long hyp_len = 0;
  long ref_len = 0;

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats sentence_stats(const std::vector<std::string>& hyp_tokens,
                         const std::vector<std::string>& ref_tokens);

struct BleuScore {
  double score = 0.0;
  std::array<double, kBleuOrder> precisions{};
  double brevity_penalty = 0.0;
  long hyp_len = 0;
  long ref_len = 0;
};

BleuScore score_from_stats(const BleuStats& stats);

BleuScore bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
               bool lowercase = false);
BleuScore bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
               const Vocabulary& vocab, bool lowercase = false);

// Per-sentence statistics for randomization tests.
std::vector<BleuStats> corpus_stats(const std::vector<std::string>& hyps,
                                    const std::vector<std::string>& refs,
                                    bool lowercase = false);

}  // namespace wsmt
