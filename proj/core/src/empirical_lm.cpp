// SPDX-License-Identifier: Apache-2.0
#include "wsmt/empirical_lm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace wsmt {

EmpiricalLM EmpiricalLM::build(const Monotext& m) {
  if (m.sentences.empty()) throw std::runtime_error("empirical LM needs a nonempty monotext");
  EmpiricalLM lm;
  lm.vocab_ = m.vocab;
  for (const Sentence& s : m.sentences) {
    auto [it, inserted] = lm.index_.try_emplace(s.token_ids, static_cast<int>(lm.support_.size()));
    if (inserted) {
      lm.support_.push_back(s);
      lm.counts_.push_back(0);
    }
    ++lm.counts_[static_cast<std::size_t>(it->second)];
  }
  lm.cumulative_.resize(lm.counts_.size());
  long running = 0;
  for (std::size_t k = 0; k < lm.counts_.size(); ++k) {
    running += lm.counts_[k];
    lm.cumulative_[k] = running;
  }
  lm.total_ = running;
  return lm;
}

int EmpiricalLM::find(const Sentence& x) const {
  auto it = index_.find(x.token_ids);
  return it == index_.end() ? -1 : it->second;
}

LmLogProb EmpiricalLM::log_prob(const Sentence& x) const {
  int k = find(x);
  if (k < 0) return {};
  return {true, std::log(static_cast<double>(counts_[static_cast<std::size_t>(k)])) -
                    std::log(static_cast<double>(total_))};
}

const Sentence& EmpiricalLM::sample(RngStream& rng) const {
  long u = static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(total_)));
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return support_[static_cast<std::size_t>(it - cumulative_.begin())];
}

}  // namespace wsmt
