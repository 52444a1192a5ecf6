// SPDX-License-Identifier: Apache-2.0
#include "wsmt/significance.hpp"

#include <cmath>
#include <stdexcept>

namespace wsmt {

namespace {

double delta_bleu(const BleuStats& a, const BleuStats& b) {
  return score_from_stats(a).score - score_from_stats(b).score;
}

}  // namespace

SignificanceResult paired_significance(const std::vector<BleuStats>& stats_a,
                                       const std::vector<BleuStats>& stats_b, long trials,
                                       double alpha, RngStream rng) {
  if (stats_a.size() != stats_b.size())
    throw std::runtime_error("paired significance: misaligned systems");
  if (stats_a.empty()) throw std::runtime_error("paired significance: empty corpus");
  if (trials < 1000) throw std::invalid_argument("paired significance needs at least 1000 trials");

  BleuStats sum_a, sum_b;
  for (const BleuStats& s : stats_a) sum_a += s;
  for (const BleuStats& s : stats_b) sum_b += s;
  const double observed = std::fabs(delta_bleu(sum_a, sum_b));

  long at_least = 0;
  for (long t = 0; t < trials; ++t) {
    RngStream trial_rng = rng.derive(static_cast<std::uint64_t>(t));
    BleuStats ta, tb;
    for (std::size_t i = 0; i < stats_a.size(); ++i) {
      if (trial_rng.bernoulli(0.5)) {
        ta += stats_b[i];
        tb += stats_a[i];
      } else {
        ta += stats_a[i];
        tb += stats_b[i];
      }
    }
    if (std::fabs(delta_bleu(ta, tb)) >= observed) ++at_least;
  }
  SignificanceResult result;
  result.trials = trials;
  result.p_value = static_cast<double>(at_least + 1) / static_cast<double>(trials + 1);
  result.significant = result.p_value < alpha;
  return result;
}

SignificanceResult paired_significance(const std::vector<std::string>& hyps_a,
                                       const std::vector<std::string>& hyps_b,
                                       const std::vector<std::string>& refs, long trials,
                                       double alpha, RngStream rng, bool lowercase) {
  return paired_significance(corpus_stats(hyps_a, refs, lowercase),
                             corpus_stats(hyps_b, refs, lowercase), trials, alpha, rng);
}

}  // namespace wsmt
