// SPDX-License-Identifier: Apache-2.0
#include "wsmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "wsmt/logging.hpp"
#include "wsmt/rng.hpp"

namespace wsmt {

namespace {

int utf8_seq_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xe0) == 0xc0) return 2;
  if ((lead & 0xf0) == 0xe0) return 3;
  if ((lead & 0xf8) == 0xf0) return 4;
  return 0;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw std::runtime_error("read failed: " + path);
  return std::move(buf).str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::string data = read_file(path);
  if (!utf8_valid(data)) throw std::runtime_error("invalid UTF-8 in file: " + path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] == '\n') {
      std::size_t end = i;
      if (end > start && data[end - 1] == '\r') --end;
      lines.emplace_back(data.substr(start, end - start));
      start = i + 1;
    }
  }
  if (start < data.size()) lines.emplace_back(data.substr(start));
  return lines;
}

}  // namespace

bool utf8_valid(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char lead = static_cast<unsigned char>(text[i]);
    int len = utf8_seq_len(lead);
    if (len == 0 || i + len > text.size()) return false;
    std::uint32_t cp = 0;
    if (len == 1) {
      cp = lead;
    } else {
      cp = lead & (0x7f >> len);
      for (int k = 1; k < len; ++k) {
        unsigned char c = static_cast<unsigned char>(text[i + k]);
        if ((c & 0xc0) != 0x80) return false;
        cp = (cp << 6) | (c & 0x3f);
      }
      static constexpr std::uint32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
      if (cp < kMin[len]) return false;  // overlong
    }
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += len;
  }
  return true;
}

std::vector<std::string> utf8_codepoints(std::string_view text) {
  if (!utf8_valid(text)) throw std::runtime_error("invalid UTF-8 token");
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    int len = utf8_seq_len(static_cast<unsigned char>(text[i]));
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const std::string& tok = v.tokens_[i];
    if (tok.empty()) throw std::runtime_error("vocabulary contains empty token");
    if (!utf8_valid(tok)) throw std::runtime_error("vocabulary token is not UTF-8: " + tok);
    if (tok == kEosToken) {
      if (v.eos_id_ >= 0) throw std::runtime_error("vocabulary contains EOS twice");
      v.eos_id_ = static_cast<int>(i);
    }
    v.index_.emplace_back(tok, static_cast<int>(i));
  }
  if (v.eos_id_ < 0) throw std::runtime_error("vocabulary is missing the EOS token");
  std::sort(v.index_.begin(), v.index_.end());
  for (std::size_t i = 1; i < v.index_.size(); ++i)
    if (v.index_[i].first == v.index_[i - 1].first)
      throw std::runtime_error("duplicate vocabulary token: " + v.index_[i].first);
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  std::vector<std::string> tokens;
  tokens.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) throw std::runtime_error("blank line in vocabulary file: " + path);
    tokens.push_back(lines[i]);
  }
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const std::string& tok : tokens_) out << tok << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::find(std::string_view token) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), token,
                             [](const auto& entry, std::string_view t) { return entry.first < t; });
  if (it == index_.end() || it->first != token) return -1;
  return it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64(std::string_view{});
  for (const std::string& tok : tokens_) {
    h = fnv1a64(tok.data(), tok.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus_paths) {
  std::set<std::string> seen;
  for (const std::string& path : corpus_paths)
    for (const std::string& line : read_lines(path))
      for (std::string& tok : split_ws(line)) seen.insert(std::move(tok));
  seen.erase(kEosToken);
  std::vector<std::string> tokens;
  tokens.reserve(seen.size() + 1);
  tokens.emplace_back(kEosToken);
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return Vocabulary::from_tokens(std::move(tokens));
}

void validate_sentence(const Sentence& s, const Vocabulary& vocab) {
  if (s.token_ids.empty()) throw std::runtime_error("sentence is empty");
  for (std::size_t i = 0; i < s.token_ids.size(); ++i) {
    int id = s.token_ids[i];
    if (id < 0 || id >= vocab.size()) throw std::runtime_error("token id out of vocabulary range");
    bool is_eos = id == vocab.eos_id();
    bool is_last = i + 1 == s.token_ids.size();
    if (is_last && !is_eos) throw std::runtime_error("sentence does not end with EOS");
    if (!is_last && is_eos) throw std::runtime_error("EOS before end of sentence");
  }
}

Sentence parse_sentence(std::string_view line, const Vocabulary& vocab, OovPolicy policy,
                        LoadStats* stats) {
  Sentence s;
  for (const std::string& tok : split_ws(line)) {
    if (tok == kEosToken) throw std::runtime_error("explicit EOS in corpus line");
    int id = vocab.find(tok);
    if (id >= 0) {
      s.token_ids.push_back(id);
      continue;
    }
    if (policy == OovPolicy::Strict)
      throw std::runtime_error("token not in vocabulary: " + tok);
    std::vector<std::string> chars = utf8_codepoints(tok);
    chars.back() += kWordEndMarker;
    for (const std::string& piece : chars) {
      int pid = vocab.find(piece);
      if (pid < 0)
        throw std::runtime_error("character fallback failed, symbol not in vocabulary: " + piece);
      s.token_ids.push_back(pid);
    }
    if (stats != nullptr) ++stats->oov_fallbacks;
  }
  s.token_ids.push_back(vocab.eos_id());
  return s;
}

Monotext load_monotext(const std::string& path, const Vocabulary& vocab, OovPolicy policy,
                       LoadStats* stats) {
  Monotext text;
  text.vocab = vocab;
  LoadStats local;
  std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ++local.lines;
    if (split_ws(lines[i]).empty()) {
      ++local.blank_skipped;
      log::warn("blank_line_skipped", {{"path", path}, {"line", log::str(i + 1)}});
      continue;
    }
    text.sentences.push_back(parse_sentence(lines[i], vocab, policy, &local));
    ++local.sentences;
  }
  if (stats != nullptr) *stats = local;
  return text;
}

Bitext load_bitext(const std::string& src_path, const std::string& trg_path,
                   const Vocabulary& src_vocab, const Vocabulary& trg_vocab, OovPolicy policy) {
  std::vector<std::string> src_lines = read_lines(src_path);
  std::vector<std::string> trg_lines = read_lines(trg_path);
  if (src_lines.size() != trg_lines.size())
    throw std::runtime_error("bitext line counts differ: " + std::to_string(src_lines.size()) +
                             " vs " + std::to_string(trg_lines.size()));
  Bitext text;
  text.src_vocab = src_vocab;
  text.trg_vocab = trg_vocab;
  text.role = PairRole::Observed;
  text.pairs.reserve(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    if (split_ws(src_lines[i]).empty() || split_ws(trg_lines[i]).empty())
      throw std::runtime_error("blank line in bitext at pair " + std::to_string(i + 1));
    text.pairs.emplace_back(parse_sentence(src_lines[i], src_vocab, policy),
                            parse_sentence(trg_lines[i], trg_vocab, policy));
  }
  return text;
}

std::string detokenize(const Sentence& s, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < s.token_ids.size(); ++i) {
    if (s.token_ids[i] == vocab.eos_id()) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(s.token_ids[i]);
  }
  return out;
}

void save_monotext(const Monotext& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const Sentence& s : text.sentences) out << detokenize(s, text.vocab) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_bitext(const Bitext& text, const std::string& src_path, const std::string& trg_path) {
  std::ofstream src(src_path, std::ios::binary);
  std::ofstream trg(trg_path, std::ios::binary);
  if (!src || !trg) throw std::runtime_error("cannot write bitext files");
  for (const auto& [s, t] : text.pairs) {
    src << detokenize(s, text.src_vocab) << '\n';
    trg << detokenize(t, text.trg_vocab) << '\n';
  }
  if (!src || !trg) throw std::runtime_error("bitext write failed");
}

Bitext union_bitext(const Bitext& a, const Bitext& b) {
  if (!(a.src_vocab == b.src_vocab) || !(a.trg_vocab == b.trg_vocab))
    throw std::runtime_error("bitext union: vocabulary mismatch");
  Bitext out;
  out.src_vocab = a.src_vocab;
  out.trg_vocab = a.trg_vocab;
  out.role = a.role == b.role ? a.role : PairRole::Observed;
  out.pairs.reserve(a.pairs.size() + b.pairs.size());
  out.pairs.insert(out.pairs.end(), a.pairs.begin(), a.pairs.end());
  out.pairs.insert(out.pairs.end(), b.pairs.begin(), b.pairs.end());
  return out;
}

Bitext reversed(const Bitext& text) {
  Bitext out;
  out.src_vocab = text.trg_vocab;
  out.trg_vocab = text.src_vocab;
  out.role = text.role;
  out.pairs.reserve(text.pairs.size());
  for (const auto& [src, trg] : text.pairs) out.pairs.emplace_back(trg, src);
  return out;
}

std::uint64_t file_hash(const std::string& path) {
  std::string data = read_file(path);
  return fnv1a64(data.data(), data.size());
}

}  // namespace wsmt
