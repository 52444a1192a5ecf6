// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wsmt {

inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kWordEndMarker = "\xC2\xB7";  // U+00B7

bool utf8_valid(std::string_view text);
std::vector<std::string> utf8_codepoints(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;

  // EOS must appear exactly once; indices follow the given order.
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  int eos_id() const { return eos_id_; }
  const std::string& token(int id) const;
  int find(std::string_view token) const;  // -1 if absent
  bool contains(std::string_view token) const { return find(token) >= 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, int>> index_;  // sorted by token
  int eos_id_ = -1;
};

// EOS first, then unique corpus tokens in sorted order.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus_paths);

struct Sentence {
  std::vector<int> token_ids;

  int length() const { return static_cast<int>(token_ids.size()); }
  friend bool operator==(const Sentence& a, const Sentence& b) {
    return a.token_ids == b.token_ids;
  }
};

void validate_sentence(const Sentence& s, const Vocabulary& vocab);

struct Monotext {
  std::vector<Sentence> sentences;
  Vocabulary vocab;

  std::size_t size() const { return sentences.size(); }
};

enum class PairRole { Observed, Back, Dreamt };

struct Bitext {
  std::vector<std::pair<Sentence, Sentence>> pairs;
  Vocabulary src_vocab;
  Vocabulary trg_vocab;
  PairRole role = PairRole::Observed;

  std::size_t size() const { return pairs.size(); }
};

enum class OovPolicy { Strict, CharFallback };

struct LoadStats {
  long lines = 0;
  long sentences = 0;
  long blank_skipped = 0;
  long oov_fallbacks = 0;
};

Sentence parse_sentence(std::string_view line, const Vocabulary& vocab,
                        OovPolicy policy = OovPolicy::CharFallback,
                        LoadStats* stats = nullptr);

Monotext load_monotext(const std::string& path, const Vocabulary& vocab,
                       OovPolicy policy = OovPolicy::CharFallback,
                       LoadStats* stats = nullptr);
Bitext load_bitext(const std::string& src_path, const std::string& trg_path,
                   const Vocabulary& src_vocab, const Vocabulary& trg_vocab,
                   OovPolicy policy = OovPolicy::CharFallback);

void save_monotext(const Monotext& text, const std::string& path);
void save_bitext(const Bitext& text, const std::string& src_path,
                 const std::string& trg_path);

// Surface form: tokens joined by single spaces, EOS dropped.
std::string detokenize(const Sentence& s, const Vocabulary& vocab);

Bitext union_bitext(const Bitext& a, const Bitext& b);

// Swaps the two sides of every pair (and the vocabularies).
Bitext reversed(const Bitext& text);

std::uint64_t file_hash(const std::string& path);

}  // namespace wsmt
