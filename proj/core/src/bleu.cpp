// SPDX-License-Identifier: Apache-2.0
#include "wsmt/bleu.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace wsmt {

namespace {

bool ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool ascii_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string lowercase_ascii(const std::string& text) {
  std::string out = text;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> tokenize_13a(const std::string& text) {
  std::vector<std::string> pieces = utf8_codepoints(text);
  std::string spaced;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const std::string& p = pieces[i];
    bool wordlike = p.size() > 1 || ascii_alnum(p[0]);
    if (!wordlike && (p[0] == '.' || p[0] == ',' || p[0] == ':')) {
      bool digit_left = i > 0 && pieces[i - 1].size() == 1 && ascii_digit(pieces[i - 1][0]);
      bool digit_right =
          i + 1 < pieces.size() && pieces[i + 1].size() == 1 && ascii_digit(pieces[i + 1][0]);
      wordlike = digit_left && digit_right;
    }
    if (wordlike) {
      spaced += p;
    } else if (p.size() == 1 && (p[0] == ' ' || p[0] == '\t')) {
      spaced += ' ';
    } else {
      spaced += ' ';
      spaced += p;
      spaced += ' ';
    }
  }
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < spaced.size()) {
    while (i < spaced.size() && spaced[i] == ' ') ++i;
    std::size_t start = i;
    while (i < spaced.size() && spaced[i] != ' ') ++i;
    if (i > start) tokens.push_back(spaced.substr(start, i - start));
  }
  return tokens;
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int n = 0; n < kBleuOrder; ++n) {
    match[n] += other.match[n];
    total[n] += other.total[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats sentence_stats(const std::vector<std::string>& hyp_tokens,
                         const std::vector<std::string>& ref_tokens) {
  BleuStats stats;
  stats.hyp_len = static_cast<long>(hyp_tokens.size());
  stats.ref_len = static_cast<long>(ref_tokens.size());
  for (int n = 1; n <= kBleuOrder; ++n) {
    if (static_cast<long>(hyp_tokens.size()) < n) break;
    std::map<std::vector<std::string>, long> ref_grams;
    for (std::size_t i = 0; i + n <= ref_tokens.size(); ++i)
      ++ref_grams[{ref_tokens.begin() + i, ref_tokens.begin() + i + n}];
    long matches = 0;
    std::map<std::vector<std::string>, long> hyp_grams;
    for (std::size_t i = 0; i + n <= hyp_tokens.size(); ++i)
      ++hyp_grams[{hyp_tokens.begin() + i, hyp_tokens.begin() + i + n}];
    for (const auto& [gram, count] : hyp_grams) {
      auto it = ref_grams.find(gram);
      if (it != ref_grams.end()) matches += std::min(count, it->second);
    }
    stats.match[n - 1] = matches;
    stats.total[n - 1] = static_cast<long>(hyp_tokens.size()) - n + 1;
  }
  return stats;
}

BleuScore score_from_stats(const BleuStats& stats) {
  BleuScore out;
  out.hyp_len = stats.hyp_len;
  out.ref_len = stats.ref_len;
  if (stats.hyp_len == 0) return out;
  double log_prec_sum = 0.0;
  double smooth = 1.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    double p;
    if (stats.match[n] > 0) {
      p = static_cast<double>(stats.match[n]) / static_cast<double>(stats.total[n]);
    } else {
      smooth *= 2.0;
      p = 1.0 / smooth;
    }
    out.precisions[static_cast<std::size_t>(n)] = p;
    log_prec_sum += std::log(p);
  }
  out.brevity_penalty =
      std::min(1.0, std::exp(1.0 - static_cast<double>(stats.ref_len) / stats.hyp_len));
  out.score = 100.0 * out.brevity_penalty * std::exp(log_prec_sum / kBleuOrder);
  return out;
}

std::vector<BleuStats> corpus_stats(const std::vector<std::string>& hyps,
                                    const std::vector<std::string>& refs, bool lowercase) {
  if (hyps.size() != refs.size())
    throw std::runtime_error("bleu: hypothesis and reference counts differ: " +
                             std::to_string(hyps.size()) + " vs " + std::to_string(refs.size()));
  if (hyps.empty()) throw std::runtime_error("bleu: empty corpus");
  std::vector<BleuStats> stats;
  stats.reserve(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    std::string h = lowercase ? lowercase_ascii(hyps[i]) : hyps[i];
    std::string r = lowercase ? lowercase_ascii(refs[i]) : refs[i];
    stats.push_back(sentence_stats(tokenize_13a(h), tokenize_13a(r)));
  }
  return stats;
}

BleuScore bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
               bool lowercase) {
  BleuStats sum;
  for (const BleuStats& s : corpus_stats(hyps, refs, lowercase)) sum += s;
  return score_from_stats(sum);
}

BleuScore bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
               const Vocabulary& vocab, bool lowercase) {
  std::vector<std::string> h, r;
  h.reserve(hyps.size());
  r.reserve(refs.size());
  for (const Sentence& s : hyps) h.push_back(detokenize(s, vocab));
  for (const Sentence& s : refs) r.push_back(detokenize(s, vocab));
  return bleu(h, r, lowercase);
}

}  // namespace wsmt
