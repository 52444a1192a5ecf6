// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wsmt/rng.hpp"
#include "wsmt/tensor.hpp"

namespace wsmt {

// Handle to a node on a Tape.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records one computation graph: nodes are appended in evaluation
// order, which is already a topological order, and backward() walks them once
// in reverse. A tape belongs to one logical thread; parallelism happens
// across independent tapes.
class Tape {
 public:
  // Leaf that participates in differentiation (parameters, probes).
  Var leaf(Tensor value);
  // Leaf treated as a constant; no gradient is propagated into it.
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  // Gradient accumulated by the last backward(); zero-shaped if the node was
  // never reached.
  Tensor grad(Var v) const;

  // d(loss)/d(leaf) for every reachable leaf; loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // ---- primitive operations ------------------------------------------------
  Var add(Var a, Var b);                 // same shape
  Var sub(Var a, Var b);                 // same shape
  Var cmul(Var a, Var b);                // elementwise product
  Var scale(Var a, double c);
  Var add_rowwise(Var a, Var bias);      // bias is 1 x cols, broadcast per row
  Var matmul(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);
  // Row gather: out.row(i) = a.row(ids[i]). Backward scatter-adds.
  Var rows(Var a, const std::vector<int>& ids);
  // Each row repeated `times` consecutive times: (B x C) -> (B*times x C).
  Var repeat_rows(Var a, Eigen::Index times);
  // Column vector (r*c x 1) reinterpreted row-major as (r x c).
  Var unflatten_col(Var a, Eigen::Index r, Eigen::Index c);
  Var sum_all(Var a);                    // 1x1
  Var log_softmax_rows(Var a);
  // Softmax per row over entries with mask==1; masked entries get probability
  // zero. Every row must have at least one unmasked entry.
  Var masked_softmax_rows(Var a, const Tensor& mask);
  // out.row(b) = sum_j alpha(b, j) * ann.row(b*S + j), S = alpha.cols().
  Var segment_weighted_sum(Var alpha, Var ann);
  // Steps of equal shape (B x C) interleaved as (B*S x C) with
  // out.row(b*S + t) = steps[t].row(b).
  Var stack_steps(const std::vector<Var>& steps);
  // Per-row convex blend: out.row(i) = (1-m(i)) * a.row(i) + m(i) * b.row(i).
  Var row_lerp(Var a, Var b, const Eigen::VectorXd& m);
  // Negative log-likelihood of picked entries: -sum_i w(i) * logp(i, ids[i]).
  Var pick_nll(Var log_probs, const std::vector<int>& ids,
               const Eigen::VectorXd& weights);
  // Inverted dropout. Identity when train is false or p == 0.
  Var dropout(Var a, double p, RngStream& stream, bool train);

  // x * w + bias (rowwise).
  Var affine(Var x, Var w, Var bias) { return add_rowwise(matmul(x, w), bias); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;
  };

  int push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
  Tensor& grad_ref(int idx);
  void add_grad(int idx, const Tensor& g);

  std::vector<Node> nodes_;
};

}  // namespace wsmt
