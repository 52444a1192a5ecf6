// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "wsmt/empirical_lm.hpp"
#include "wsmt/model.hpp"

namespace wsmt {

struct PosteriorTable {
  Sentence y;
  std::vector<double> log_joint;  // log p(y|x_k) + log p(x_k) per support sentence
  std::vector<double> posterior;  // normalized, sums to 1
  double log_marginal = 0.0;
};

// log sum_k p(y|x_k) p(x_k) over the LM support; exact because the
// categorical LM makes the sum finite.
double marginal_log_likelihood(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                               const Sentence& y);

PosteriorTable exact_posterior(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                               const Sentence& y);

// KL(p(x|y) || q(x|y)) over the support; nonnegative up to rounding.
double inclusive_kl(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                    const Seq2SeqModel& q_model, const Sentence& y);

// (1/M) sum log q(x_j | y_j) over dreamt pairs x_j ~ lm, y_j ~ p(.|x_j).
double mc_sleep_objective(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                          const Seq2SeqModel& q_model, long m_count, RngStream rng);

// sum_k p(y|x_k) q(x_k|y); diagnostic in (0, 1].
double autoencoder_objective(const Seq2SeqModel& p_model, const Seq2SeqModel& q_model,
                             const Sentence& y, const EmpiricalLM& lm);

}  // namespace wsmt
