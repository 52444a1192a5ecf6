// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "wsmt/rng.hpp"
#include "wsmt/tape.hpp"

using namespace wsmt;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

std::vector<Tensor> random_inputs(const std::vector<std::pair<int, int>>& shapes,
                                  std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Tensor> out;
  for (auto [r, c] : shapes) {
    Tensor t(r, c);
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = rng.normal() * 0.7;
    out.push_back(std::move(t));
  }
  return out;
}

double eval_loss(const Builder& build, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var loss = build(tape, leaves);
  return tape.value(loss)(0, 0);
}

// Central finite differences against backward() for every input entry.
void check_grads(const Builder& build, const std::vector<Tensor>& inputs,
                 double h = 1e-5, double tol = 1e-4) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var loss = build(tape, leaves);
  tape.backward(loss);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor g = tape.grad(leaves[k]);
    REQUIRE(g.rows() == inputs[k].rows());
    REQUIRE(g.cols() == inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < inputs[k].cols(); ++j) {
        std::vector<Tensor> plus = inputs, minus = inputs;
        plus[k](i, j) += h;
        minus[k](i, j) -= h;
        double fd = (eval_loss(build, plus) - eval_loss(build, minus)) / (2.0 * h);
        double an = g(i, j);
        double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
        INFO("input ", k, " entry (", i, ",", j, ") analytic ", an, " fd ", fd);
        CHECK(rel < tol);
      }
    }
  }
}

// Deterministic weighting so the scalar loss depends on every output entry.
Var weighted_sum(Tape& tape, Var v) {
  const Tensor& val = tape.value(v);
  Tensor w(val.rows(), val.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      w(i, j) = 0.3 + 0.1 * static_cast<double>(i) + 0.07 * static_cast<double>(j);
  return tape.sum_all(tape.cmul(v, tape.constant(w)));
}

}  // namespace

TEST_SUITE("tape") {

TEST_CASE("square loss has gradient 2p at p, so p*p*... matches by hand") {
  Tape tape;
  Var p = tape.leaf(Tensor::Constant(1, 1, 3.0));
  Var loss = tape.sum_all(tape.cmul(p, p));
  tape.backward(loss);
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(9.0));
  CHECK(tape.grad(p)(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("loss independent of a parameter has zero gradient for it") {
  Tape tape;
  Var used = tape.leaf(Tensor::Constant(1, 1, 2.0));
  Var unused = tape.leaf(Tensor::Constant(1, 1, 5.0));
  Var loss = tape.sum_all(tape.cmul(used, used));
  tape.backward(loss);
  Tensor g = tape.grad(unused);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant leaves receive no gradient") {
  Tape tape;
  Var a = tape.leaf(Tensor::Constant(1, 2, 1.5));
  Var c = tape.constant(Tensor::Constant(1, 2, 2.0));
  Var loss = tape.sum_all(tape.cmul(a, c));
  tape.backward(loss);
  CHECK(tape.grad(a)(0, 0) == doctest::Approx(2.0));
  CHECK(tape.grad(c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences: add sub cmul scale") {
  auto inputs = random_inputs({{3, 4}, {3, 4}}, 101);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.scale(t.add(v[0], t.sub(v[1], t.cmul(v[0], v[1]))), 1.7));
  }, inputs);
}

TEST_CASE("finite differences: matmul and affine") {
  auto inputs = random_inputs({{2, 3}, {3, 4}, {1, 4}}, 102);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.affine(v[0], v[1], v[2]));
  }, inputs);
}

TEST_CASE("finite differences: add_rowwise") {
  auto inputs = random_inputs({{4, 3}, {1, 3}}, 103);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.add_rowwise(v[0], v[1]));
  }, inputs);
}

TEST_CASE("finite differences: sigmoid and tanh") {
  auto inputs = random_inputs({{3, 3}}, 104);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.tanh(t.sigmoid(v[0])));
  }, inputs);
}

TEST_CASE("finite differences: concat and slice") {
  auto inputs = random_inputs({{2, 3}, {2, 2}}, 105);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    Var cat = t.concat_cols(v[0], v[1]);
    Var left = t.slice_cols(cat, 1, 3);
    return weighted_sum(t, left);
  }, inputs);
}

TEST_CASE("finite differences: rows gather with repeats") {
  auto inputs = random_inputs({{4, 3}}, 106);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.rows(v[0], {2, 0, 2, 3}));
  }, inputs);
}

TEST_CASE("finite differences: repeat_rows") {
  auto inputs = random_inputs({{2, 3}}, 107);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.repeat_rows(v[0], 3));
  }, inputs);
}

TEST_CASE("finite differences: unflatten_col") {
  auto inputs = random_inputs({{6, 1}}, 108);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.unflatten_col(v[0], 2, 3));
  }, inputs);
}

TEST_CASE("finite differences: log_softmax_rows with pick_nll") {
  auto inputs = random_inputs({{3, 5}}, 109);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    Var lp = t.log_softmax_rows(v[0]);
    Eigen::VectorXd w(3);
    w << 1.0, 0.5, 2.0;
    return t.pick_nll(lp, {4, 0, 2}, w);
  }, inputs);
}

TEST_CASE("finite differences: masked_softmax_rows") {
  auto inputs = random_inputs({{2, 4}}, 110);
  Tensor mask(2, 4);
  mask << 1, 1, 0, 1, 0, 1, 1, 0;
  check_grads([mask](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.masked_softmax_rows(v[0], mask));
  }, inputs);
}

TEST_CASE("masked entries get exactly zero probability") {
  Tape tape;
  Tensor scores(1, 3);
  scores << 5.0, 100.0, 1.0;
  Tensor mask(1, 3);
  mask << 1, 0, 1;
  Var p = tape.masked_softmax_rows(tape.leaf(scores), mask);
  CHECK(tape.value(p)(0, 1) == 0.0);
  CHECK(tape.value(p).row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("finite differences: segment_weighted_sum") {
  auto inputs = random_inputs({{2, 3}, {6, 4}}, 111);
  // normalize alpha-like input through a softmax first
  check_grads([](Tape& t, const std::vector<Var>& v) {
    Var alpha = t.masked_softmax_rows(v[0], Tensor::Ones(2, 3));
    return weighted_sum(t, t.segment_weighted_sum(alpha, v[1]));
  }, inputs);
}

TEST_CASE("finite differences: stack_steps") {
  auto inputs = random_inputs({{2, 3}, {2, 3}, {2, 3}}, 112);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.stack_steps({v[0], v[1], v[2]}));
  }, inputs);
}

TEST_CASE("stack_steps interleaves rows by batch then step") {
  Tape tape;
  Tensor a(2, 1), b(2, 1);
  a << 1, 2;
  b << 10, 20;
  Var s = tape.stack_steps({tape.leaf(a), tape.leaf(b)});
  const Tensor& v = tape.value(s);
  REQUIRE(v.rows() == 4);
  CHECK(v(0, 0) == 1);
  CHECK(v(1, 0) == 10);
  CHECK(v(2, 0) == 2);
  CHECK(v(3, 0) == 20);
}

TEST_CASE("finite differences: row_lerp") {
  auto inputs = random_inputs({{3, 2}, {3, 2}}, 113);
  Eigen::VectorXd m(3);
  m << 0.0, 1.0, 0.4;
  check_grads([m](Tape& t, const std::vector<Var>& v) {
    return weighted_sum(t, t.row_lerp(v[0], v[1], m));
  }, inputs);
}

TEST_CASE("finite differences: sum_all composed with everything") {
  auto inputs = random_inputs({{2, 3}, {3, 3}, {1, 3}}, 114);
  check_grads([](Tape& t, const std::vector<Var>& v) {
    Var h = t.tanh(t.affine(v[0], v[1], v[2]));
    Var lp = t.log_softmax_rows(h);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
    Var nll = t.pick_nll(lp, {0, 2}, w);
    Var extra = t.sum_all(t.sigmoid(t.matmul(v[0], v[1])));
    return t.add(nll, t.scale(extra, 0.25));
  }, inputs);
}

TEST_CASE("finite differences: dropout with a fixed stream") {
  auto inputs = random_inputs({{4, 4}}, 115);
  RngStream mask_stream(777);
  check_grads([mask_stream](Tape& t, const std::vector<Var>& v) {
    RngStream local = mask_stream;
    return weighted_sum(t, t.dropout(v[0], 0.5, local, true));
  }, inputs);
}

TEST_CASE("dropout is the identity in eval mode and at p zero") {
  Tape tape;
  Tensor x = Tensor::Constant(2, 2, 3.0);
  RngStream rng(5);
  Var a = tape.dropout(tape.leaf(x), 0.5, rng, false);
  CHECK(tape.value(a) == x);
  Var b = tape.dropout(tape.leaf(x), 0.0, rng, true);
  CHECK(tape.value(b) == x);
}

TEST_CASE("inverted dropout preserves the mean activation") {
  Tensor x = Tensor::Constant(1, 40000, 1.0);
  RngStream rng(6);
  Tape tape;
  Var d = tape.dropout(tape.leaf(x), 0.2, rng, true);
  double mean = tape.value(d).mean();
  CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
  double kept = tape.value(d).cwiseAbs().unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }).mean();
  CHECK(kept == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Var v = tape.leaf(Tensor::Zero(2, 2));
  CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
}

TEST_CASE("gradients accumulate across reuse of a node") {
  Tape tape;
  Var p = tape.leaf(Tensor::Constant(1, 1, 2.0));
  Var loss = tape.sum_all(tape.add(p, p));
  tape.backward(loss);
  CHECK(tape.grad(p)(0, 0) == doctest::Approx(2.0));
}

}
