// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "wsmt/tensor.hpp"

namespace wsmt {

struct AdamHyper {
  double alpha = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Optimizer stack hyperparameters for one training run.
struct TrainHyper {
  int batch_size = 60;
  double dropout_prob = 0.2;
  double l2_weight = 1e-8;
  double clip_norm = 1.0;
  int max_epochs = 10;
  int max_len = 60;
  AdamHyper adam;

  void validate() const;  // throws std::invalid_argument on a bad field
};

double global_norm(const std::vector<Tensor>& grads);

// Rescales all gradients by clip_norm / norm when the global L2 norm exceeds
// clip_norm; zero gradients pass through untouched.
void clip_global_norm(std::vector<Tensor>& grads, double clip_norm);

// Bias-corrected Adam with accumulators kept in parameter-registry order.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<NamedTensor>& params, AdamHyper hyper);

  // One update. l2_weight adds the l2 penalty gradient (l2 * theta) to each
  // gradient before the moment updates.
  void step(const std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
            double l2_weight);

  long step_count() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  // Restores a serialized state; shapes must match the registry.
  void restore(long t, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  AdamHyper hyper_;
  long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace wsmt
