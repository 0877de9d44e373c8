// Copyright 2026 The stex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parameter store and a small reverse-mode tape over dense matrices. Every
// op records its own hand-written backward rule; there is no symbolic
// differentiation. Layout convention: rows are sequence positions.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stex/common.hpp"

namespace stex::nn {

using Mat = Eigen::MatrixXd;

class ParamStore {
 public:
  struct Param {
    std::string name;
    Mat value;
    Mat grad;
  };

  std::size_t add(std::string name, Mat init) {
    Mat g = Mat::Zero(init.rows(), init.cols());
    params_.push_back({std::move(name), std::move(init), std::move(g)});
    return params_.size() - 1;
  }

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p.value.allFinite()) return false;
    }
    return true;
  }

 private:
  std::vector<Param> params_;
};

// Xavier/Glorot uniform.
inline Mat xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * a;
  return m;
}

inline Mat uniform_init(std::size_t rows, std::size_t cols, double a, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * a;
  return m;
}

inline Mat normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

inline void check_shape(bool ok, const char* op) {
  if (!ok) throw Error(Errc::kDimensionMismatch, std::string("tape: shape mismatch in ") + op);
}

class Tape {
 public:
  using Var = std::size_t;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Drops every node created after `mark`; only valid while not recording.
  void truncate(std::size_t mark) {
    if (record_) throw Error(Errc::kInvalidArgument, "tape: truncate while recording");
    nodes_.resize(mark);
  }

  const Mat& value(Var v) const { return nodes_[v].ref ? *nodes_[v].ref : nodes_[v].value; }
  const Mat& grad(Var v) const { return nodes_[v].grad; }

  Var constant(Mat m) { return push(std::move(m), false); }

  Var param(ParamStore& store, std::size_t index) {
    Node n;
    n.ref = &store[index].value;
    n.param = &store[index];
    n.needs_grad = record_;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  // Rows `ids` of a parameter table.
  Var gather(ParamStore& store, std::size_t index, const std::vector<int>& ids) {
    auto* p = &store[index];
    Mat out(static_cast<Eigen::Index>(ids.size()), p->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= p->value.rows()) throw Error(Errc::kInvalidArgument, "tape: gather id out of range");
      out.row(static_cast<Eigen::Index>(i)) = p->value.row(ids[i]);
    }
    const Var y = push(std::move(out), record_);
    if (record_) {
      on_backward(y, [this, y, p, ids] {
        const Mat& g = nodes_[y].grad;
        for (std::size_t i = 0; i < ids.size(); ++i) p->grad.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
      });
    }
    return y;
  }

  Var matmul(Var a, Var b) {
    check_shape(value(a).cols() == value(b).rows(), "matmul");
    const Var y = push(value(a) * value(b), any(a, b));
    if (needs(y)) {
      on_backward(y, [this, a, b, y] {
        const Mat& g = nodes_[y].grad;
        if (needs(a)) acc(a, g * value(b).transpose());
        if (needs(b)) acc(b, value(a).transpose() * g);
      });
    }
    return y;
  }

  // a * b^T
  Var matmul_nt(Var a, Var b) {
    check_shape(value(a).cols() == value(b).cols(), "matmul_nt");
    const Var y = push(value(a) * value(b).transpose(), any(a, b));
    if (needs(y)) {
      on_backward(y, [this, a, b, y] {
        const Mat& g = nodes_[y].grad;
        if (needs(a)) acc(a, g * value(b));
        if (needs(b)) acc(b, g.transpose() * value(a));
      });
    }
    return y;
  }

  Var add(Var a, Var b) {
    check_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
    const Var y = push(value(a) + value(b), any(a, b));
    if (needs(y)) {
      on_backward(y, [this, a, b, y] {
        if (needs(a)) acc(a, nodes_[y].grad);
        if (needs(b)) acc(b, nodes_[y].grad);
      });
    }
    return y;
  }

  Var sub(Var a, Var b) {
    check_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub");
    const Var y = push(value(a) - value(b), any(a, b));
    if (needs(y)) {
      on_backward(y, [this, a, b, y] {
        if (needs(a)) acc(a, nodes_[y].grad);
        if (needs(b)) acc(b, -nodes_[y].grad);
      });
    }
    return y;
  }

  // Element-wise product.
  Var mul(Var a, Var b) {
    check_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul");
    const Var y = push(value(a).cwiseProduct(value(b)), any(a, b));
    if (needs(y)) {
      on_backward(y, [this, a, b, y] {
        const Mat& g = nodes_[y].grad;
        if (needs(a)) acc(a, g.cwiseProduct(value(b)));
        if (needs(b)) acc(b, g.cwiseProduct(value(a)));
      });
    }
    return y;
  }

  // a + broadcast of the 1 x n row b.
  Var add_row(Var a, Var b) {
    check_shape(value(b).rows() == 1 && value(a).cols() == value(b).cols(), "add_row");
    Mat out = value(a);
    out.rowwise() += value(b).row(0);
    const Var y = push(std::move(out), any(a, b));
    if (needs(y)) {
      on_backward(y, [this, a, b, y] {
        const Mat& g = nodes_[y].grad;
        if (needs(a)) acc(a, g);
        if (needs(b)) acc(b, g.colwise().sum());
      });
    }
    return y;
  }

  // a + c for a constant c (used for attention masks).
  Var add_const(Var a, const Mat& c) {
    check_shape(value(a).rows() == c.rows() && value(a).cols() == c.cols(), "add_const");
    const Var y = push(value(a) + c, needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y] { acc(a, nodes_[y].grad); });
    }
    return y;
  }

  Var scale(Var a, double s) {
    const Var y = push(value(a) * s, needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y, s] { acc(a, nodes_[y].grad * s); });
    }
    return y;
  }

  Var sigmoid(Var a) {
    Mat out = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    const Var y = push(std::move(out), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y] {
        const Mat& s = nodes_[y].value;
        acc(a, nodes_[y].grad.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
      });
    }
    return y;
  }

  Var tanh(Var a) {
    Mat out = value(a).array().tanh().matrix();
    const Var y = push(std::move(out), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y] {
        const Mat& t = nodes_[y].value;
        acc(a, nodes_[y].grad.cwiseProduct((1.0 - t.array().square()).matrix()));
      });
    }
    return y;
  }

  Var relu(Var a) {
    Mat out = value(a).cwiseMax(0.0);
    const Var y = push(std::move(out), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y] {
        const Mat mask = (value(a).array() > 0.0).cast<double>().matrix();
        acc(a, nodes_[y].grad.cwiseProduct(mask));
      });
    }
    return y;
  }

  // x * Phi(x) with the exact normal CDF.
  Var gelu(Var a) {
    Mat out = value(a).unaryExpr([](double x) { return 0.5 * x * std::erfc(-x / std::sqrt(2.0)); });
    const Var y = push(std::move(out), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y] {
        const Mat d = value(a).unaryExpr([](double x) {
          constexpr double kInvSqrt2Pi = 0.3989422804014327;
          return 0.5 * std::erfc(-x / std::sqrt(2.0)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        });
        acc(a, nodes_[y].grad.cwiseProduct(d));
      });
    }
    return y;
  }

  // Row-wise softmax; -inf entries receive probability 0.
  Var softmax_rows(Var a) {
    Mat out = softmax_rows_value(value(a));
    const Var y = push(std::move(out), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y] {
        const Mat& s = nodes_[y].value;
        const Mat& g = nodes_[y].grad;
        const Eigen::VectorXd dots = g.cwiseProduct(s).rowwise().sum();
        Mat dx = g;
        dx.colwise() -= dots;
        acc(a, dx.cwiseProduct(s));
      });
    }
    return y;
  }

  static Mat softmax_rows_value(const Mat& x) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double m = x.row(r).maxCoeff();
      if (!std::isfinite(m)) throw Error(Errc::kInvalidArgument, "softmax: row has no finite entry");
      out.row(r) = (x.row(r).array() - m).exp().matrix();
      out.row(r) /= out.row(r).sum();
    }
    return out;
  }

  // Per-row normalisation followed by gain gamma and bias beta (both 1 x n).
  Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5) {
    const Mat& x = value(a);
    check_shape(value(gamma).cols() == x.cols() && value(beta).cols() == x.cols(), "layer_norm");
    const auto n = static_cast<double>(x.cols());
    Mat xhat(x.rows(), x.cols());
    Eigen::VectorXd inv(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mu = x.row(r).mean();
      const double var = (x.row(r).array() - mu).square().sum() / n;
      inv(r) = 1.0 / std::sqrt(var + eps);
      xhat.row(r) = (x.row(r).array() - mu) * inv(r);
    }
    Mat out = xhat.array().rowwise() * value(gamma).row(0).array();
    out.rowwise() += value(beta).row(0);
    const Var y = push(std::move(out), any(a, gamma) || needs(beta));
    if (needs(y)) {
      on_backward(y, [this, a, gamma, beta, y, xhat, inv, n] {
        const Mat& g = nodes_[y].grad;
        if (needs(gamma)) acc(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (needs(beta)) acc(beta, g.colwise().sum());
        if (needs(a)) {
          const Mat dxhat = g.array().rowwise() * value(gamma).row(0).array();
          Mat dx(dxhat.rows(), dxhat.cols());
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const double m1 = dxhat.row(r).sum() / n;
            const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).sum() / n;
            dx.row(r) = ((dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv(r)).matrix();
          }
          acc(a, dx);
        }
      });
    }
    return y;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error(Errc::kInvalidArgument, "tape: concat of nothing");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    bool ng = false;
    for (Var p : parts) {
      check_shape(value(p).rows() == rows, "concat_cols");
      cols += value(p).cols();
      ng = ng || needs(p);
    }
    Mat out(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
      out.middleCols(c, value(p).cols()) = value(p);
      c += value(p).cols();
    }
    const Var y = push(std::move(out), ng);
    if (needs(y)) {
      on_backward(y, [this, parts, y] {
        Eigen::Index c0 = 0;
        for (Var p : parts) {
          const Eigen::Index w = value(p).cols();
          if (needs(p)) acc(p, nodes_[y].grad.middleCols(c0, w));
          c0 += w;
        }
      });
    }
    return y;
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error(Errc::kInvalidArgument, "tape: concat of nothing");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    bool ng = false;
    for (Var p : parts) {
      check_shape(value(p).cols() == cols, "concat_rows");
      rows += value(p).rows();
      ng = ng || needs(p);
    }
    Mat out(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
      out.middleRows(r, value(p).rows()) = value(p);
      r += value(p).rows();
    }
    const Var y = push(std::move(out), ng);
    if (needs(y)) {
      on_backward(y, [this, parts, y] {
        Eigen::Index r0 = 0;
        for (Var p : parts) {
          const Eigen::Index h = value(p).rows();
          if (needs(p)) acc(p, nodes_[y].grad.middleRows(r0, h));
          r0 += h;
        }
      });
    }
    return y;
  }

  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    check_shape(start >= 0 && count >= 0 && start + count <= value(a).cols(), "slice_cols");
    const Var y = push(value(a).middleCols(start, count), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y, start, count] {
        Mat g = Mat::Zero(value(a).rows(), value(a).cols());
        g.middleCols(start, count) = nodes_[y].grad;
        acc(a, g);
      });
    }
    return y;
  }

  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    check_shape(start >= 0 && count >= 0 && start + count <= value(a).rows(), "slice_rows");
    const Var y = push(value(a).middleRows(start, count), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y, start, count] {
        Mat g = Mat::Zero(value(a).rows(), value(a).cols());
        g.middleRows(start, count) = nodes_[y].grad;
        acc(a, g);
      });
    }
    return y;
  }

  // Inverted dropout; identity when p == 0.
  Var dropout(Var a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw Error(Errc::kInvalidArgument, "tape: dropout probability must be < 1");
    Mat mask(value(a).rows(), value(a).cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : 1.0 / (1.0 - p);
    const Var y = push(value(a).cwiseProduct(mask), needs(a));
    if (needs(y)) {
      on_backward(y, [this, a, y, mask] { acc(a, nodes_[y].grad.cwiseProduct(mask)); });
    }
    return y;
  }

  // Mean token cross-entropy of row-wise logits against target ids (1 x 1).
  Var cross_entropy(Var logits, const std::vector<int>& targets) {
    const Mat& z = value(logits);
    check_shape(static_cast<std::size_t>(z.rows()) == targets.size() && !targets.empty(), "cross_entropy");
    Mat probs = softmax_rows_value(z);
    double loss = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t] < 0 || targets[t] >= z.cols()) throw Error(Errc::kInvalidArgument, "cross_entropy: bad target id");
      loss -= std::log(std::max(probs(static_cast<Eigen::Index>(t), targets[t]), std::numeric_limits<double>::min()));
    }
    const double n = static_cast<double>(targets.size());
    Mat out(1, 1);
    out(0, 0) = loss / n;
    const Var y = push(std::move(out), needs(logits));
    if (needs(y)) {
      on_backward(y, [this, logits, y, targets, n, probs = std::move(probs)]() mutable {
        Mat g = probs;
        for (std::size_t t = 0; t < targets.size(); ++t) g(static_cast<Eigen::Index>(t), targets[t]) -= 1.0;
        acc(logits, g * (nodes_[y].grad(0, 0) / n));
      });
    }
    return y;
  }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse.
  // Parameter gradients are accumulated into their store.
  void backward(Var loss) {
    if (!record_) throw Error(Errc::kInvalidArgument, "tape: backward on a non-recording tape");
    check_shape(value(loss).size() == 1, "backward");
    if (!needs(loss)) return;
    acc(loss, Mat::Ones(1, 1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      if (nodes_[it->out].grad.size() == 0) continue;
      it->fn();
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    const Mat* ref = nullptr;
    ParamStore::Param* param = nullptr;
    bool needs_grad = false;
  };
  struct Op {
    Var out;
    std::function<void()> fn;
  };

  bool needs(Var v) const { return nodes_[v].needs_grad; }
  bool any(Var a, Var b) const { return needs(a) || needs(b); }

  Var push(Mat value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = record_ && needs_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  void on_backward(Var out, std::function<void()> fn) { ops_.push_back({out, std::move(fn)}); }

  template <typename E>
  void acc(Var v, const E& g) {
    Node& n = nodes_[v];
    if (!n.needs_grad) return;
    if (n.param) {
      n.param->grad += g;
    } else if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  bool record_;
  std::vector<Node> nodes_;
  std::vector<Op> ops_;
};

}  // namespace stex::nn
