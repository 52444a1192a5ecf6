// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wsmt/corpus.hpp"

namespace wsmt {

struct MergeTable {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string word_end_marker = kWordEndMarker;

  std::size_t size() const { return merges.size(); }
};

// Characters of a word with the marker attached to the last one.
std::vector<std::string> base_symbols(const std::string& word, const std::string& marker);

MergeTable learn_bpe(const std::vector<Monotext>& corpora, int num_merges);

std::vector<std::string> segment_word(const std::string& word, const MergeTable& merges);
std::string apply_bpe_line(const std::string& line, const MergeTable& merges);
std::string undo_bpe_line(const std::string& line, const std::string& marker);

Sentence apply_bpe(const Sentence& s, const Vocabulary& word_vocab, const MergeTable& merges,
                   const Vocabulary& subword_vocab);
Sentence undo_bpe(const Sentence& s, const Vocabulary& subword_vocab,
                  const Vocabulary& word_vocab);

// All subword types reachable from the merge table plus base characters of the corpora.
Vocabulary subword_vocabulary(const std::vector<Monotext>& corpora, const MergeTable& merges);

void save_merges(const MergeTable& merges, const std::string& path);
MergeTable load_merges(const std::string& path);

}  // namespace wsmt
