// SPDX-License-Identifier: Apache-2.0
#include "wsmt/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace wsmt {

void TrainHyper::validate() const {
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (dropout_prob < 0.0 || dropout_prob >= 1.0)
    throw std::invalid_argument("dropout_prob must be in [0, 1)");
  if (l2_weight < 0.0) throw std::invalid_argument("l2_weight must be nonnegative");
  if (clip_norm <= 0.0) throw std::invalid_argument("clip_norm must be positive");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be nonnegative");
  if (max_len < 2) throw std::invalid_argument("max_len must be at least 2");
  if (adam.alpha <= 0.0) throw std::invalid_argument("adam alpha must be positive");
}

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const Tensor& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

void clip_global_norm(std::vector<Tensor>& grads, double clip_norm) {
  if (clip_norm <= 0.0) throw std::invalid_argument("clip_norm must be positive");
  const double norm = global_norm(grads);
  if (norm <= clip_norm) return;
  const double scale = clip_norm / norm;
  for (Tensor& g : grads) g *= scale;
}

AdamState::AdamState(const std::vector<NamedTensor>& params, AdamHyper hyper)
    : hyper_(hyper) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const NamedTensor& p : params) {
    m_.push_back(Tensor::Zero(p.tensor->rows(), p.tensor->cols()));
    v_.push_back(Tensor::Zero(p.tensor->rows(), p.tensor->cols()));
  }
}

void AdamState::step(const std::vector<NamedTensor>& params,
                     const std::vector<Tensor>& grads, double l2_weight) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("adam step: registry size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].tensor;
    if (grads[i].rows() != theta.rows() || grads[i].cols() != theta.cols())
      throw std::invalid_argument("adam step: gradient shape mismatch for " + params[i].name);
    Tensor g = grads[i];
    if (l2_weight != 0.0) g += l2_weight * theta;
    if (!g.allFinite()) throw std::runtime_error("adam step: non-finite gradient for " + params[i].name);
    m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * g;
    v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * g.cwiseProduct(g);
    const Tensor mhat = m_[i] / bc1;
    const Tensor vhat = v_[i] / bc2;
    theta.array() -= hyper_.alpha * mhat.array() / (vhat.array().sqrt() + hyper_.eps);
  }
}

void AdamState::restore(long t, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("adam restore: accumulator count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].rows() != m_[i].rows() || m[i].cols() != m_[i].cols() ||
        v[i].rows() != v_[i].rows() || v[i].cols() != v_[i].cols())
      throw std::invalid_argument("adam restore: accumulator shape mismatch");
  }
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace wsmt
