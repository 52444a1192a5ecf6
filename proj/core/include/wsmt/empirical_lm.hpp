// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "wsmt/corpus.hpp"
#include "wsmt/rng.hpp"

namespace wsmt {

// Tagged log-probability: unattested sentences carry no finite value.
struct LmLogProb {
  bool attested = false;
  double value = 0.0;
};

class EmpiricalLM {
 public:
  static EmpiricalLM build(const Monotext& m);

  std::size_t support_size() const { return support_.size(); }
  const Sentence& support(std::size_t k) const { return support_[k]; }
  long count(std::size_t k) const { return counts_[k]; }
  long total() const { return total_; }
  double prob(std::size_t k) const { return static_cast<double>(counts_[k]) / total_; }
  const Vocabulary& vocab() const { return vocab_; }

  int find(const Sentence& x) const;  // support index, -1 if unattested
  LmLogProb log_prob(const Sentence& x) const;
  const Sentence& sample(RngStream& rng) const;

 private:
  std::vector<Sentence> support_;
  std::vector<long> counts_;
  std::vector<long> cumulative_;
  std::map<std::vector<int>, int> index_;
  long total_ = 0;
  Vocabulary vocab_;
};

inline EmpiricalLM build_lm(const Monotext& m) { return EmpiricalLM::build(m); }

}  // namespace wsmt
