// SPDX-License-Identifier: Apache-2.0
#include "wsmt/tensor.hpp"

#include <cmath>

namespace wsmt {

bool all_finite(const Tensor& t) { return t.allFinite(); }

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd shifted = logits.row(r).array() - m;
    const double lse = std::log(shifted.exp().sum());
    out.row(r) = (shifted - lse).matrix();
  }
  return out;
}

void glorot_fill(Tensor& t, RngStream stream) {
  const double fan_in = static_cast<double>(t.rows());
  const double fan_out = static_cast<double>(t.cols());
  const double r = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = stream.uniform(-r, r);
}

std::uint64_t tensor_hash(const Tensor& t, std::uint64_t seed) {
  const std::int64_t shape[2] = {t.rows(), t.cols()};
  std::uint64_t h = fnv1a64(shape, sizeof(shape), seed);
  return fnv1a64(t.data(), sizeof(double) * static_cast<std::size_t>(t.size()), h);
}

}  // namespace wsmt
