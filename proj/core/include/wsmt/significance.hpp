// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "wsmt/bleu.hpp"
#include "wsmt/rng.hpp"

namespace wsmt {

struct SignificanceResult {
  double p_value = 1.0;
  bool significant = false;
  long trials = 0;
};

SignificanceResult paired_significance(const std::vector<BleuStats>& stats_a,
                                       const std::vector<BleuStats>& stats_b, long trials,
                                       double alpha, RngStream rng);

SignificanceResult paired_significance(const std::vector<std::string>& hyps_a,
                                       const std::vector<std::string>& hyps_b,
                                       const std::vector<std::string>& refs, long trials,
                                       double alpha, RngStream rng, bool lowercase = false);

}  // namespace wsmt
