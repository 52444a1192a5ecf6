// SPDX-License-Identifier: Apache-2.0
#include "wsmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wsmt {

namespace {

constexpr const char* kMergeFileVersion = "wsmt_bpe_v1";

std::vector<std::string> split_spaces(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void merge_in_place(std::vector<std::string>& symbols,
                    const std::pair<std::string, std::string>& merge) {
  std::size_t write = 0;
  for (std::size_t read = 0; read < symbols.size();) {
    if (read + 1 < symbols.size() && symbols[read] == merge.first &&
        symbols[read + 1] == merge.second) {
      symbols[write++] = symbols[read] + symbols[read + 1];
      read += 2;
    } else {
      if (write != read) symbols[write] = std::move(symbols[read]);
      ++write;
      read += 1;
    }
  }
  symbols.resize(write);
}

// Word frequencies over the surface tokens of the corpora, EOS excluded.
std::map<std::string, long> word_counts(const std::vector<Monotext>& corpora) {
  std::map<std::string, long> counts;
  for (const Monotext& text : corpora)
    for (const Sentence& s : text.sentences)
      for (int id : s.token_ids) {
        if (id == text.vocab.eos_id()) continue;
        ++counts[text.vocab.token(id)];
      }
  return counts;
}

}  // namespace

std::vector<std::string> base_symbols(const std::string& word, const std::string& marker) {
  if (word.find(marker) != std::string::npos)
    throw std::runtime_error("word contains the reserved word-end marker: " + word);
  std::vector<std::string> symbols = utf8_codepoints(word);
  symbols.back() += marker;
  return symbols;
}

MergeTable learn_bpe(const std::vector<Monotext>& corpora, int num_merges) {
  if (num_merges < 0) throw std::invalid_argument("num_merges must be nonnegative");
  if (corpora.empty()) throw std::invalid_argument("learn_bpe needs at least one corpus");

  MergeTable table;
  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  for (auto& [word, count] : word_counts(corpora)) {
    words.push_back(base_symbols(word, table.word_end_marker));
    counts.push_back(count);
  }

  for (int step = 0; step < num_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        pair_counts[{words[w][i], words[w][i + 1]}] += counts[w];
    if (pair_counts.empty()) break;
    auto best = pair_counts.begin();
    for (auto it = std::next(pair_counts.begin()); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;  // map order already ranks ties lexicographically
    table.merges.push_back(best->first);
    for (auto& word : words) merge_in_place(word, best->first);
  }
  return table;
}

std::vector<std::string> segment_word(const std::string& word, const MergeTable& merges) {
  std::vector<std::string> symbols = base_symbols(word, merges.word_end_marker);
  for (const auto& merge : merges.merges) {
    if (symbols.size() < 2) break;
    merge_in_place(symbols, merge);
  }
  return symbols;
}

std::string apply_bpe_line(const std::string& line, const MergeTable& merges) {
  std::string out;
  for (const std::string& word : split_spaces(line))
    for (const std::string& piece : segment_word(word, merges)) {
      if (!out.empty()) out += ' ';
      out += piece;
    }
  return out;
}

std::string undo_bpe_line(const std::string& line, const std::string& marker) {
  std::string out;
  std::string word;
  for (const std::string& piece : split_spaces(line)) {
    word += piece;
    std::size_t pos;
    while ((pos = word.find(marker)) != std::string::npos) {
      if (!out.empty()) out += ' ';
      out += word.substr(0, pos);
      word.erase(0, pos + marker.size());
    }
  }
  if (!word.empty()) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

Sentence apply_bpe(const Sentence& s, const Vocabulary& word_vocab, const MergeTable& merges,
                   const Vocabulary& subword_vocab) {
  Sentence out;
  for (int id : s.token_ids) {
    if (id == word_vocab.eos_id()) continue;
    for (const std::string& piece : segment_word(word_vocab.token(id), merges)) {
      int pid = subword_vocab.find(piece);
      if (pid < 0) throw std::runtime_error("subword not in vocabulary: " + piece);
      out.token_ids.push_back(pid);
    }
  }
  out.token_ids.push_back(subword_vocab.eos_id());
  return out;
}

Sentence undo_bpe(const Sentence& s, const Vocabulary& subword_vocab,
                  const Vocabulary& word_vocab) {
  std::string line;
  for (int id : s.token_ids) {
    if (id == subword_vocab.eos_id()) continue;
    if (!line.empty()) line += ' ';
    line += subword_vocab.token(id);
  }
  return parse_sentence(undo_bpe_line(line, kWordEndMarker), word_vocab, OovPolicy::Strict);
}

Vocabulary subword_vocabulary(const std::vector<Monotext>& corpora, const MergeTable& merges) {
  std::set<std::string> types;
  for (auto& [word, count] : word_counts(corpora)) {
    (void)count;
    for (const std::string& piece : segment_word(word, merges)) types.insert(piece);
    for (const std::string& piece : base_symbols(word, merges.word_end_marker))
      types.insert(piece);
  }
  types.erase(kEosToken);
  std::vector<std::string> tokens;
  tokens.reserve(types.size() + 1);
  tokens.emplace_back(kEosToken);
  tokens.insert(tokens.end(), types.begin(), types.end());
  return Vocabulary::from_tokens(std::move(tokens));
}

void save_merges(const MergeTable& merges, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << kMergeFileVersion << ' ' << merges.word_end_marker << '\n';
  for (const auto& [left, right] : merges.merges) out << left << ' ' << right << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

MergeTable load_merges(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty merge file: " + path);
  std::istringstream hs(header);
  std::string version, marker;
  if (!(hs >> version >> marker) || version != kMergeFileVersion)
    throw std::runtime_error("unsupported merge file header: " + header);
  MergeTable table;
  table.word_end_marker = marker;
  std::string line;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string left, right, extra;
    if (!(ls >> left >> right) || (ls >> extra))
      throw std::runtime_error("malformed merge at line " + std::to_string(lineno));
    if (left + right == marker)
      throw std::runtime_error("merge would produce the bare word-end marker");
    table.merges.emplace_back(std::move(left), std::move(right));
  }
  return table;
}

}  // namespace wsmt
