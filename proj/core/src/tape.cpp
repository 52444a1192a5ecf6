// SPDX-License-Identifier: Apache-2.0
#include "wsmt/tape.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace wsmt {

int Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor value) { return {push(std::move(value), true, nullptr)}; }

Var Tape::constant(Tensor value) { return {push(std::move(value), false, nullptr)}; }

const Tensor& Tape::value(Var v) const {
  assert(v.valid() && v.idx < static_cast<int>(nodes_.size()));
  return nodes_[static_cast<std::size_t>(v.idx)].value;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.idx));
  if (n.grad.size() == 0) return Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor& Tape::grad_ref(int idx) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::add_grad(int idx, const Tensor& g) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.idx >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("backward: invalid loss node");
  const Node& l = nodes_[static_cast<std::size_t>(loss.idx)];
  if (l.value.rows() != 1 || l.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  grad_ref(loss.idx).setOnes();
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.back || !n.requires_grad || n.grad.size() == 0) continue;
    n.back(*this);
  }
}

Var Tape::add(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("add: shape mismatch");
  const bool req = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  const int self = push(va + vb, req, nullptr);
  nodes_[self].back = [a, b, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g);
    t.add_grad(b.idx, g);
  };
  return {self};
}

Var Tape::sub(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("sub: shape mismatch");
  const bool req = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  const int self = push(va - vb, req, nullptr);
  nodes_[self].back = [a, b, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g);
    t.add_grad(b.idx, -g);
  };
  return {self};
}

Var Tape::cmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("cmul: shape mismatch");
  const bool req = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  const int self = push(va.cwiseProduct(vb), req, nullptr);
  nodes_[self].back = [a, b, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g.cwiseProduct(t.value(b)));
    t.add_grad(b.idx, g.cwiseProduct(t.value(a)));
  };
  return {self};
}

Var Tape::scale(Var a, double c) {
  const int self = push(value(a) * c, nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, c, self](Tape& t) {
    t.add_grad(a.idx, t.nodes_[self].grad * c);
  };
  return {self};
}

Var Tape::add_rowwise(Var a, Var bias) {
  const Tensor& va = value(a);
  const Tensor& vb = value(bias);
  if (vb.rows() != 1 || vb.cols() != va.cols())
    throw std::invalid_argument("add_rowwise: bias must be 1 x cols");
  Tensor out = va;
  out.rowwise() += vb.row(0);
  const bool req = nodes_[a.idx].requires_grad || nodes_[bias.idx].requires_grad;
  const int self = push(std::move(out), req, nullptr);
  nodes_[self].back = [a, bias, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g);
    t.add_grad(bias.idx, g.colwise().sum());
  };
  return {self};
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.cols() != vb.rows()) throw std::invalid_argument("matmul: inner dims differ");
  const bool req = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  const int self = push(va * vb, req, nullptr);
  nodes_[self].back = [a, b, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g * t.value(b).transpose());
    t.add_grad(b.idx, t.value(a).transpose() * g);
  };
  return {self};
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a).unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  });
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, self](Tape& t) {
    const Tensor& s = t.nodes_[self].value;
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g.cwiseProduct(s.cwiseProduct(Tensor::Ones(s.rows(), s.cols()) - s)));
  };
  return {self};
}

Var Tape::tanh(Var a) {
  Tensor out = value(a).array().tanh().matrix();
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, self](Tape& t) {
    const Tensor& y = t.nodes_[self].value;
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, (g.array() * (1.0 - y.array().square())).matrix());
  };
  return {self};
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rows() != vb.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Tensor out(va.rows(), va.cols() + vb.cols());
  out << va, vb;
  const bool req = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  const Eigen::Index ca = va.cols();
  const int self = push(std::move(out), req, nullptr);
  nodes_[self].back = [a, b, ca, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a.idx, g.leftCols(ca));
    t.add_grad(b.idx, g.rightCols(g.cols() - ca));
  };
  return {self};
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  const Tensor& va = value(a);
  if (start < 0 || len < 0 || start + len > va.cols())
    throw std::invalid_argument("slice_cols: out of range");
  const int self = push(va.middleCols(start, len), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, start, len, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& va2 = t.value(a);
    Tensor full = Tensor::Zero(va2.rows(), va2.cols());
    full.middleCols(start, len) = g;
    t.add_grad(a.idx, full);
  };
  return {self};
}

Var Tape::rows(Var a, const std::vector<int>& ids) {
  const Tensor& va = value(a);
  Tensor out(static_cast<Eigen::Index>(ids.size()), va.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= va.rows()) throw std::out_of_range("rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = va.row(ids[i]);
  }
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, ids, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& va2 = t.value(a);
    Tensor full = Tensor::Zero(va2.rows(), va2.cols());
    for (std::size_t i = 0; i < ids.size(); ++i)
      full.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
    t.add_grad(a.idx, full);
  };
  return {self};
}

Var Tape::repeat_rows(Var a, Eigen::Index times) {
  const Tensor& va = value(a);
  if (times <= 0) throw std::invalid_argument("repeat_rows: times must be positive");
  Tensor out(va.rows() * times, va.cols());
  for (Eigen::Index r = 0; r < va.rows(); ++r)
    out.middleRows(r * times, times) = va.row(r).replicate(times, 1);
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, times, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& va2 = t.value(a);
    Tensor acc(va2.rows(), va2.cols());
    for (Eigen::Index r = 0; r < va2.rows(); ++r)
      acc.row(r) = g.middleRows(r * times, times).colwise().sum();
    t.add_grad(a.idx, acc);
  };
  return {self};
}

Var Tape::unflatten_col(Var a, Eigen::Index r, Eigen::Index c) {
  const Tensor& va = value(a);
  if (va.cols() != 1 || va.rows() != r * c)
    throw std::invalid_argument("unflatten_col: expected (r*c) x 1 input");
  Tensor out(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) out(i, j) = va(i * c + j, 0);
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, r, c, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor acc(r * c, 1);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) acc(i * c + j, 0) = g(i, j);
    t.add_grad(a.idx, acc);
  };
  return {self};
}

Var Tape::sum_all(Var a) {
  Tensor out(1, 1);
  out(0, 0) = value(a).sum();
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, self](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    const Tensor& va = t.value(a);
    t.add_grad(a.idx, Tensor::Constant(va.rows(), va.cols(), g));
  };
  return {self};
}

Var Tape::log_softmax_rows(Var a) {
  Tensor out = wsmt::log_softmax_rows(value(a));
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, self](Tape& t) {
    const Tensor& lp = t.nodes_[self].value;
    const Tensor& g = t.nodes_[self].grad;
    Tensor gx = g;
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double gsum = g.row(r).sum();
      gx.row(r) -= (lp.row(r).array().exp() * gsum).matrix();
    }
    t.add_grad(a.idx, gx);
  };
  return {self};
}

Var Tape::masked_softmax_rows(Var a, const Tensor& mask) {
  const Tensor& va = value(a);
  if (mask.rows() != va.rows() || mask.cols() != va.cols())
    throw std::invalid_argument("masked_softmax_rows: mask shape mismatch");
  Tensor out(va.rows(), va.cols());
  for (Eigen::Index r = 0; r < va.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < va.cols(); ++j)
      if (mask(r, j) != 0.0 && va(r, j) > m) m = va(r, j);
    if (!std::isfinite(m))
      throw std::invalid_argument("masked_softmax_rows: fully masked row");
    double z = 0.0;
    for (Eigen::Index j = 0; j < va.cols(); ++j) {
      const double e = mask(r, j) != 0.0 ? std::exp(va(r, j) - m) : 0.0;
      out(r, j) = e;
      z += e;
    }
    out.row(r) /= z;
  }
  const int self = push(std::move(out), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, self](Tape& t) {
    const Tensor& p = t.nodes_[self].value;
    const Tensor& g = t.nodes_[self].grad;
    Tensor gx(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dot = g.row(r).cwiseProduct(p.row(r)).sum();
      gx.row(r) = p.row(r).cwiseProduct(g.row(r).array().matrix() -
                                        Eigen::RowVectorXd::Constant(p.cols(), dot));
    }
    t.add_grad(a.idx, gx);
  };
  return {self};
}

Var Tape::segment_weighted_sum(Var alpha, Var ann) {
  const Tensor& al = value(alpha);
  const Tensor& an = value(ann);
  const Eigen::Index b = al.rows(), s = al.cols();
  if (an.rows() != b * s)
    throw std::invalid_argument("segment_weighted_sum: ann rows must be B*S");
  Tensor out = Tensor::Zero(b, an.cols());
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < s; ++j) out.row(i) += al(i, j) * an.row(i * s + j);
  const bool req = nodes_[alpha.idx].requires_grad || nodes_[ann.idx].requires_grad;
  const int self = push(std::move(out), req, nullptr);
  nodes_[self].back = [alpha, ann, b, s, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& al2 = t.value(alpha);
    const Tensor& an2 = t.value(ann);
    Tensor galpha(b, s);
    Tensor gann = Tensor::Zero(an2.rows(), an2.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
      for (Eigen::Index j = 0; j < s; ++j) {
        galpha(i, j) = g.row(i).dot(an2.row(i * s + j));
        gann.row(i * s + j) += al2(i, j) * g.row(i);
      }
    }
    t.add_grad(alpha.idx, galpha);
    t.add_grad(ann.idx, gann);
  };
  return {self};
}

Var Tape::stack_steps(const std::vector<Var>& steps) {
  if (steps.empty()) throw std::invalid_argument("stack_steps: no steps");
  const Eigen::Index s = static_cast<Eigen::Index>(steps.size());
  const Eigen::Index b = value(steps[0]).rows(), c = value(steps[0]).cols();
  Tensor out(b * s, c);
  bool req = false;
  for (Eigen::Index t = 0; t < s; ++t) {
    const Tensor& v = value(steps[static_cast<std::size_t>(t)]);
    if (v.rows() != b || v.cols() != c)
      throw std::invalid_argument("stack_steps: mismatched step shapes");
    for (Eigen::Index i = 0; i < b; ++i) out.row(i * s + t) = v.row(i);
    req = req || nodes_[steps[static_cast<std::size_t>(t)].idx].requires_grad;
  }
  const int self = push(std::move(out), req, nullptr);
  std::vector<Var> inputs = steps;
  nodes_[self].back = [inputs, b, s, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    for (Eigen::Index k = 0; k < s; ++k) {
      Tensor gk(b, g.cols());
      for (Eigen::Index i = 0; i < b; ++i) gk.row(i) = g.row(i * s + k);
      t.add_grad(inputs[static_cast<std::size_t>(k)].idx, gk);
    }
  };
  return {self};
}

Var Tape::row_lerp(Var a, Var b, const Eigen::VectorXd& m) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols() || m.size() != va.rows())
    throw std::invalid_argument("row_lerp: shape mismatch");
  Tensor out(va.rows(), va.cols());
  for (Eigen::Index i = 0; i < va.rows(); ++i)
    out.row(i) = (1.0 - m(i)) * va.row(i) + m(i) * vb.row(i);
  const bool req = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  const int self = push(std::move(out), req, nullptr);
  nodes_[self].back = [a, b, m, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor ga(g.rows(), g.cols());
    Tensor gb(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      ga.row(i) = (1.0 - m(i)) * g.row(i);
      gb.row(i) = m(i) * g.row(i);
    }
    t.add_grad(a.idx, ga);
    t.add_grad(b.idx, gb);
  };
  return {self};
}

Var Tape::pick_nll(Var log_probs, const std::vector<int>& ids,
                   const Eigen::VectorXd& weights) {
  const Tensor& lp = value(log_probs);
  if (static_cast<Eigen::Index>(ids.size()) != lp.rows() || weights.size() != lp.rows())
    throw std::invalid_argument("pick_nll: ids/weights must match rows");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    if (ids[static_cast<std::size_t>(i)] < 0 ||
        ids[static_cast<std::size_t>(i)] >= lp.cols())
      throw std::out_of_range("pick_nll: id out of range");
    acc -= weights(i) * lp(i, ids[static_cast<std::size_t>(i)]);
  }
  Tensor out(1, 1);
  out(0, 0) = acc;
  const int self = push(std::move(out), nodes_[log_probs.idx].requires_grad, nullptr);
  nodes_[self].back = [log_probs, ids, weights, self](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    const Tensor& lp2 = t.value(log_probs);
    Tensor gx = Tensor::Zero(lp2.rows(), lp2.cols());
    for (Eigen::Index i = 0; i < lp2.rows(); ++i)
      gx(i, ids[static_cast<std::size_t>(i)]) -= g * weights(i);
    t.add_grad(log_probs.idx, gx);
  };
  return {self};
}

Var Tape::dropout(Var a, double p, RngStream& stream, bool train) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  const Tensor& va = value(a);
  Tensor mask(va.rows(), va.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < va.rows(); ++i)
    for (Eigen::Index j = 0; j < va.cols(); ++j)
      mask(i, j) = stream.bernoulli(p) ? 0.0 : keep_scale;
  const int self = push(va.cwiseProduct(mask), nodes_[a.idx].requires_grad, nullptr);
  nodes_[self].back = [a, mask, self](Tape& t) {
    t.add_grad(a.idx, t.nodes_[self].grad.cwiseProduct(mask));
  };
  return {self};
}

}  // namespace wsmt
