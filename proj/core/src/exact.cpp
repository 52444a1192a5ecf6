// SPDX-License-Identifier: Apache-2.0
#include "wsmt/exact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wsmt {

namespace {

std::vector<double> joint_scores(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                                 const Sentence& y) {
  if (lm.support_size() == 0) throw std::runtime_error("empty LM support");
  std::vector<double> scores(lm.support_size());
  for (std::size_t k = 0; k < lm.support_size(); ++k) {
    LmLogProb prior = lm.log_prob(lm.support(k));
    if (!prior.attested) throw std::logic_error("support sentence missing from its own LM");
    scores[k] = p_model.log_prob(lm.support(k), y) + prior.value;
  }
  return scores;
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

}  // namespace

double marginal_log_likelihood(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                               const Sentence& y) {
  return log_sum_exp(joint_scores(p_model, lm, y));
}

PosteriorTable exact_posterior(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                               const Sentence& y) {
  PosteriorTable table;
  table.y = y;
  table.log_joint = joint_scores(p_model, lm, y);
  table.log_marginal = log_sum_exp(table.log_joint);
  table.posterior.resize(table.log_joint.size());
  for (std::size_t k = 0; k < table.log_joint.size(); ++k)
    table.posterior[k] = std::exp(table.log_joint[k] - table.log_marginal);
  return table;
}

double inclusive_kl(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                    const Seq2SeqModel& q_model, const Sentence& y) {
  PosteriorTable table = exact_posterior(p_model, lm, y);
  double kl = 0.0;
  for (std::size_t k = 0; k < table.posterior.size(); ++k) {
    double post = table.posterior[k];
    if (post <= 0.0) continue;  // zero-probability terms contribute zero
    double log_q = q_model.log_prob(y, lm.support(k));
    kl += post * (std::log(post) - log_q);
  }
  return kl;
}

double mc_sleep_objective(const Seq2SeqModel& p_model, const EmpiricalLM& lm,
                          const Seq2SeqModel& q_model, long m_count, RngStream rng) {
  if (m_count < 1) throw std::invalid_argument("mc_sleep_objective needs m_count >= 1");
  double sum = 0.0;
  for (long j = 0; j < m_count; ++j) {
    RngStream pair_rng = rng.derive(static_cast<std::uint64_t>(j));
    Sentence x = lm.sample(pair_rng);
    DecodeConfig cfg;
    cfg.mode = DecodeMode::Sample;
    cfg.max_len = p_model.config().max_len;
    cfg.rng = pair_rng;
    Sentence y = p_model.decode(x, cfg);
    sum += q_model.log_prob(y, x);
  }
  return sum / static_cast<double>(m_count);
}

double autoencoder_objective(const Seq2SeqModel& p_model, const Seq2SeqModel& q_model,
                             const Sentence& y, const EmpiricalLM& lm) {
  if (lm.support_size() == 0) throw std::runtime_error("empty LM support");
  double sum = 0.0;
  for (std::size_t k = 0; k < lm.support_size(); ++k) {
    const Sentence& x = lm.support(k);
    sum += std::exp(p_model.log_prob(x, y) + q_model.log_prob(y, x));
  }
  return sum;
}

}  // namespace wsmt
