// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "wsmt/rng.hpp"

namespace wsmt {

// Dense 64-bit tensor. Everything in the artifact is rank <= 2; vectors are
// 1 x n rows unless noted.
using Tensor = Eigen::MatrixXd;

bool all_finite(const Tensor& t);

// Numerically stable softmax over each row (max-subtraction).
Tensor softmax_rows(const Tensor& logits);
// log softmax over each row.
Tensor log_softmax_rows(const Tensor& logits);

// Glorot-uniform fill: U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
void glorot_fill(Tensor& t, RngStream stream);

// Bytes of shape + column-major payload hashed with FNV-1a; byte-stable on a
// fixed platform.
std::uint64_t tensor_hash(const Tensor& t, std::uint64_t seed = 0xcbf29ce484222325ull);

// Named view into a set of parameters, used by the optimizer and checkpoints.
struct NamedTensor {
  std::string name;
  Tensor* tensor = nullptr;
};

}  // namespace wsmt
