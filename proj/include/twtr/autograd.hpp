// Copyright 2026 The twtr Authors
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

#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass as a node holding its
// value and a closure that pushes the node's gradient to its inputs.
// Parameters enter as leaves that reference caller-owned storage and add
// their gradient into a caller-owned sink during `backward`, so the same
// sink can accumulate over a batch of tapes.

#include <cmath>
#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include "twtr/types.hpp"

namespace twtr::ag {

template <class Scalar>
class Tape;

template <class Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const MatrixX<Scalar>& value() const { return tape->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <class Scalar>
class Tape {
 public:
  using Mat = MatrixX<Scalar>;
  using VarT = Var<Scalar>;
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  VarT constant(Mat value) { return push(std::move(value), nullptr, nullptr, false, {}); }

  /// Leaf referencing `value`, which must outlive the tape. When `sink` is
  /// non-null the leaf's gradient is added into it by `backward`.
  VarT parameter(const Mat& value, Mat* sink) { return push(Mat(), &value, sink, sink != nullptr, {}); }

  /// Interior node. `backward` runs only when some input requires a gradient.
  VarT node(Mat value, std::initializer_list<VarT> inputs, Backward backward) {
    return node_impl(std::move(value), inputs.begin(), inputs.end(), std::move(backward));
  }
  VarT node(Mat value, const std::vector<VarT>& inputs, Backward backward) {
    return node_impl(std::move(value), inputs.begin(), inputs.end(), std::move(backward));
  }

  const Mat& value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds `g` into the gradient of node `id`; a no-op for constants.
  /// Parameter leaves add straight into their sink.
  template <class Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.sink) {
      n.sink->noalias() += g;
      n.has_grad = true;
    } else if (!n.has_grad) {
      n.grad.noalias() = g;
      n.has_grad = true;
    } else {
      n.grad.noalias() += g;
    }
  }

  const Mat& grad(std::size_t id) const { return nodes_[id].grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates to every sink.
  void backward(VarT loss) {
    if (value(loss.id).size() != 1) throw Error("backward needs a scalar loss");
    accumulate(loss.id, Mat::Ones(1, 1));
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat* sink = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    Mat grad;
    Backward backward;
  };

  template <class It>
  VarT node_impl(Mat value, It first, It last, Backward backward) {
    bool needs = false;
    for (; first != last; ++first) needs = needs || nodes_[first->id].requires_grad;
    return push(std::move(value), nullptr, nullptr, needs, needs ? std::move(backward) : Backward{});
  }

  VarT push(Mat value, const Mat* external, Mat* sink, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), external, sink, requires_grad, false, Mat(), std::move(backward)});
    return VarT{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <class Scalar>
void check_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace detail

template <class Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) throw Error("matmul: inner dimensions differ");
  auto& t = *a.tape;
  MatrixX<Scalar> out = a.value() * b.value();
  return t.node(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.requires_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

template <class Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "add");
  auto& t = *a.tape;
  return t.node(a.value() + b.value(), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self));
    t.accumulate(b.id, t.grad(self));
  });
}

template <class Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "sub");
  auto& t = *a.tape;
  return t.node(a.value() - b.value(), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self));
    t.accumulate(b.id, -t.grad(self));
  });
}

/// Adds a 1 x n row to every row of `a`.
template <class Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error("add_row: bias shape mismatch");
  auto& t = *a.tape;
  MatrixX<Scalar> out = a.value().rowwise() + row.value().row(0);
  return t.node(std::move(out), {a, row}, [a, row](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self));
    t.accumulate(row.id, t.grad(self).colwise().sum());
  });
}

template <class Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "hadamard");
  auto& t = *a.tape;
  return t.node(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
    if (t.requires_grad(b.id)) t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
  });
}

template <class Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  auto& t = *a.tape;
  return t.node(a.value() * s, {a},
                [a, s](Tape<Scalar>& t, std::size_t self) { t.accumulate(a.id, t.grad(self) * s); });
}

template <class Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  auto& t = *a.tape;
  MatrixX<Scalar> out = a.value().array().tanh().matrix();
  return t.node(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self);
    t.accumulate(a.id, (t.grad(self).array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <class Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  auto& t = *a.tape;
  MatrixX<Scalar> out = a.value().unaryExpr([](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
  return t.node(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self);
    t.accumulate(a.id, (t.grad(self).array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

/// Tanh-approximated GELU.
template <class Scalar>
Var<Scalar> gelu(Var<Scalar> a) {
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  const Scalar k = Scalar(0.044715);
  auto& t = *a.tape;
  MatrixX<Scalar> out = a.value().unaryExpr(
      [=](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + k * x * x * x))); });
  return t.node(std::move(out), {a}, [a, c, k](Tape<Scalar>& t, std::size_t self) {
    MatrixX<Scalar> d = t.value(a.id).unaryExpr([=](Scalar x) {
      const Scalar th = std::tanh(c * (x + k * x * x * x));
      return Scalar(0.5) * (Scalar(1) + th) +
             Scalar(0.5) * x * (Scalar(1) - th * th) * c * (Scalar(1) + Scalar(3) * k * x * x);
    });
    t.accumulate(a.id, t.grad(self).cwiseProduct(d));
  });
}

template <class Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw Error("concat_rows: nothing to concatenate");
  auto& t = *parts.front().tape;
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw Error("concat_rows: column mismatch");
    rows += p.rows();
  }
  MatrixX<Scalar> out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.node(std::move(out), parts, [parts](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      const auto n = t.value(p.id).rows();
      t.accumulate(p.id, g.middleRows(r, n));
      r += n;
    }
  });
}

template <class Scalar>
Var<Scalar> concat_cols(Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows()) throw Error("concat_cols: row mismatch");
  auto& t = *a.tape;
  MatrixX<Scalar> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return t.node(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto ac = t.value(a.id).cols();
    t.accumulate(a.id, g.leftCols(ac));
    t.accumulate(b.id, g.rightCols(g.cols() - ac));
  });
}

template <class Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.rows()) throw Error("slice_rows: out of range");
  auto& t = *a.tape;
  return t.node(a.value().middleRows(start, n), {a}, [a, start, n](Tape<Scalar>& t, std::size_t self) {
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(t.value(a.id).rows(), t.value(a.id).cols());
    g.middleRows(start, n) = t.grad(self);
    t.accumulate(a.id, g);
  });
}

/// out.row(i) = table.row(indices[i]).
template <class Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::vector<int> indices) {
  auto& t = *table.tape;
  MatrixX<Scalar> out(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table.rows()) throw Error("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(indices[i]);
  }
  return t.node(std::move(out), {table}, [table, indices = std::move(indices)](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    MatrixX<Scalar> d = MatrixX<Scalar>::Zero(t.value(table.id).rows(), t.value(table.id).cols());
    for (std::size_t i = 0; i < indices.size(); ++i) d.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(table.id, d);
  });
}

/// Replaces rows with mask == false by exact zeros; no gradient flows to them.
template <class Scalar>
Var<Scalar> mask_rows(Var<Scalar> a, const Mask& mask) {
  if (mask.size() != a.rows()) throw Error("mask_rows: mask length mismatch");
  auto& t = *a.tape;
  MatrixX<Scalar> out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!mask(i)) out.row(i).setZero();
  }
  return t.node(std::move(out), {a}, [a, mask](Tape<Scalar>& t, std::size_t self) {
    MatrixX<Scalar> g = t.grad(self);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (!mask(i)) g.row(i).setZero();
    }
    t.accumulate(a.id, g);
  });
}

/// Mean of the rows with mask == true, as a 1 x n row.
template <class Scalar>
Var<Scalar> masked_mean_rows(Var<Scalar> a, const Mask& mask) {
  if (mask.size() != a.rows()) throw Error("masked_mean_rows: mask length mismatch");
  const auto count = mask.count();
  if (count == 0) throw Error("masked_mean_rows: every row is masked");
  auto& t = *a.tape;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(1, a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (mask(i)) out += a.value().row(i);
  }
  out /= Scalar(count);
  return t.node(std::move(out), {a}, [a, mask, count](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    MatrixX<Scalar> d = MatrixX<Scalar>::Zero(t.value(a.id).rows(), t.value(a.id).cols());
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (mask(i)) d.row(i) = g.row(0) / Scalar(count);
    }
    t.accumulate(a.id, d);
  });
}

/// Row-wise layer normalization with learned 1 x n gain and bias.
template <class Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias, Scalar eps = Scalar(1e-5)) {
  const auto n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw Error("layer_norm: parameter shape mismatch");
  }
  auto& t = *x.tape;
  auto normed = std::make_shared<MatrixX<Scalar>>(x.rows(), n);
  auto inv_std = std::make_shared<VectorX<Scalar>>(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.value().row(i);
    const Scalar mean = row.mean();
    const Scalar var = (row.array() - mean).square().mean();
    (*inv_std)(i) = Scalar(1) / std::sqrt(var + eps);
    normed->row(i) = (row.array() - mean) * (*inv_std)(i);
  }
  MatrixX<Scalar> out = (normed->array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return t.node(std::move(out), {x, gain, bias}, [x, gain, bias, normed, inv_std](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    t.accumulate(gain.id, g.cwiseProduct(*normed).colwise().sum());
    t.accumulate(bias.id, g.colwise().sum());
    if (!t.requires_grad(x.id)) return;
    MatrixX<Scalar> dn = (g.array().rowwise() * t.value(gain.id).row(0).array()).matrix();
    MatrixX<Scalar> dx(dn.rows(), dn.cols());
    for (Eigen::Index i = 0; i < dn.rows(); ++i) {
      const Scalar m1 = dn.row(i).mean();
      const Scalar m2 = dn.row(i).cwiseProduct(normed->row(i)).mean();
      dx.row(i) = (*inv_std)(i) * (dn.row(i).array() - m1 - normed->row(i).array() * m2).matrix();
    }
    t.accumulate(x.id, dx);
  });
}

/// Contiguous row ranges (start, length) of independent sequences packed
/// into one matrix.
using Blocks = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

namespace detail {

inline Blocks whole(Eigen::Index rows) { return Blocks{{0, rows}}; }

inline void check_blocks(const Blocks& blocks, Eigen::Index rows, const char* op) {
  Eigen::Index next = 0;
  for (const auto& [start, len] : blocks) {
    if (start != next || len < 1) throw Error(std::string(op) + ": blocks must tile the rows in order");
    next = start + len;
  }
  if (next != rows) throw Error(std::string(op) + ": blocks must tile the rows in order");
}

}  // namespace detail

/// Scaled dot-product attention split over `heads` column blocks. Keys with
/// key_mask == false receive zero weight. With `blocks`, each row range is
/// an independent sequence whose queries see only its own keys.
template <class Scalar>
Var<Scalar> multi_head_attention(Var<Scalar> q, Var<Scalar> k, Var<Scalar> v, const Mask& key_mask, int heads,
                                 Blocks blocks = {}) {
  const auto d = q.cols();
  if (heads < 1 || d % heads != 0) throw Error("attention: width not divisible by head count");
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) throw Error("attention: shape mismatch");
  if (key_mask.size() != k.rows()) throw Error("attention: mask length mismatch");
  if (blocks.empty()) {
    if (!key_mask.any()) throw Error("attention: every key is masked");
  } else {
    if (q.rows() != k.rows()) throw Error("attention: blocked attention needs as many queries as keys");
    detail::check_blocks(blocks, k.rows(), "attention");
    for (const auto& [start, len] : blocks) {
      if (!key_mask.segment(start, len).any()) throw Error("attention: every key is masked");
    }
  }
  const auto dh = d / heads;
  const Scalar s = Scalar(1) / std::sqrt(Scalar(dh));
  auto& t = *q.tape;
  const std::size_t nb = blocks.empty() ? 1 : blocks.size();
  // probs[b * heads + h]: attention weights of block b, head h.
  auto probs = std::make_shared<std::vector<MatrixX<Scalar>>>(nb * static_cast<std::size_t>(heads));
  auto layout = std::make_shared<std::vector<std::array<Eigen::Index, 4>>>();  // q start, q len, k start, k len
  if (blocks.empty()) {
    layout->push_back({0, q.rows(), 0, k.rows()});
  } else {
    for (const auto& [start, len] : blocks) layout->push_back({start, len, start, len});
  }
  MatrixX<Scalar> out(q.rows(), d);
  for (std::size_t bi = 0; bi < nb; ++bi) {
    const auto [qs, ql, ks, kl] = (*layout)[bi];
    for (int h = 0; h < heads; ++h) {
      MatrixX<Scalar> scores =
          s * q.value().block(qs, h * dh, ql, dh) * k.value().block(ks, h * dh, kl, dh).transpose();
      for (Eigen::Index i = 0; i < ql; ++i) {
        Scalar mx = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index j = 0; j < kl; ++j) {
          if (key_mask(ks + j)) mx = std::max(mx, scores(i, j));
        }
        Scalar total = 0;
        for (Eigen::Index j = 0; j < kl; ++j) {
          scores(i, j) = key_mask(ks + j) ? std::exp(scores(i, j) - mx) : Scalar(0);
          total += scores(i, j);
        }
        scores.row(i) /= total;
      }
      out.block(qs, h * dh, ql, dh).noalias() = scores * v.value().block(ks, h * dh, kl, dh);
      (*probs)[bi * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)] = std::move(scores);
    }
  }
  return t.node(std::move(out), {q, k, v}, [q, k, v, probs, layout, heads, dh, s](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& qv = t.value(q.id);
    const auto& kv = t.value(k.id);
    const auto& vv = t.value(v.id);
    MatrixX<Scalar> dq = MatrixX<Scalar>::Zero(qv.rows(), qv.cols());
    MatrixX<Scalar> dk = MatrixX<Scalar>::Zero(kv.rows(), kv.cols());
    MatrixX<Scalar> dv = MatrixX<Scalar>::Zero(vv.rows(), vv.cols());
    for (std::size_t bi = 0; bi < layout->size(); ++bi) {
      const auto [qs, ql, ks, kl] = (*layout)[bi];
      for (int h = 0; h < heads; ++h) {
        const auto& p = (*probs)[bi * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
        const auto go = g.block(qs, h * dh, ql, dh);
        dv.block(ks, h * dh, kl, dh).noalias() += p.transpose() * go;
        MatrixX<Scalar> dp = go * vv.block(ks, h * dh, kl, dh).transpose();
        VectorX<Scalar> row_dot = dp.cwiseProduct(p).rowwise().sum();
        MatrixX<Scalar> ds = (p.array() * (dp.colwise() - row_dot).array()).matrix();
        dq.block(qs, h * dh, ql, dh).noalias() += s * ds * kv.block(ks, h * dh, kl, dh);
        dk.block(ks, h * dh, kl, dh).noalias() += s * ds.transpose() * qv.block(qs, h * dh, ql, dh);
      }
    }
    t.accumulate(q.id, dq);
    t.accumulate(k.id, dk);
    t.accumulate(v.id, dv);
  });
}

/// Row i of the result is the mean of block i's rows.
template <class Scalar>
Var<Scalar> block_mean_rows(Var<Scalar> a, const Blocks& blocks) {
  detail::check_blocks(blocks, a.rows(), "block_mean_rows");
  auto& t = *a.tape;
  MatrixX<Scalar> out(static_cast<Eigen::Index>(blocks.size()), a.cols());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto [start, len] = blocks[i];
    out.row(static_cast<Eigen::Index>(i)) = a.value().middleRows(start, len).colwise().sum() / Scalar(len);
  }
  return t.node(std::move(out), {a}, [a, blocks](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    MatrixX<Scalar> d(t.value(a.id).rows(), t.value(a.id).cols());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto [start, len] = blocks[i];
      d.middleRows(start, len).rowwise() = g.row(static_cast<Eigen::Index>(i)) / Scalar(len);
    }
    t.accumulate(a.id, d);
  });
}

/// Sum of the cross-entropies of an n x 1 column of probabilities against
/// 0/1 targets, each probability clamped to [clamp, 1 - clamp]. Clamped
/// entries get no gradient.
template <class Scalar>
Var<Scalar> binary_cross_entropy_sum(Var<Scalar> p, std::vector<Scalar> targets, Scalar clamp = Scalar(1e-7)) {
  if (p.cols() != 1 || p.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw Error("binary_cross_entropy_sum: expected one probability per target");
  }
  auto& t = *p.tape;
  const auto n = p.rows();
  auto slope = std::make_shared<MatrixX<Scalar>>(n, 1);
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(1, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar raw = p.value()(i, 0);
    const Scalar pc = std::clamp(raw, clamp, Scalar(1) - clamp);
    const Scalar y = targets[static_cast<std::size_t>(i)];
    out(0, 0) -= y * std::log(pc) + (Scalar(1) - y) * std::log(Scalar(1) - pc);
    (*slope)(i, 0) = pc != raw ? Scalar(0) : -(y / pc) + (Scalar(1) - y) / (Scalar(1) - pc);
  }
  return t.node(std::move(out), {p}, [p, slope](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(p.id, *slope * t.grad(self)(0, 0));
  });
}

/// Cross-entropy of a 1x1 probability against a 0/1 target, with the
/// probability clamped to [clamp, 1 - clamp]. Clamped inputs get no gradient.
template <class Scalar>
Var<Scalar> binary_cross_entropy(Var<Scalar> p, Scalar target, Scalar clamp = Scalar(1e-7)) {
  if (p.rows() != 1 || p.cols() != 1) throw Error("binary_cross_entropy: expected a 1x1 probability");
  auto& t = *p.tape;
  const Scalar raw = p.value()(0, 0);
  const Scalar pc = std::clamp(raw, clamp, Scalar(1) - clamp);
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = -(target * std::log(pc) + (Scalar(1) - target) * std::log(Scalar(1) - pc));
  const bool clamped = pc != raw;
  return t.node(std::move(out), {p}, [p, pc, target, clamped](Tape<Scalar>& t, std::size_t self) {
    if (clamped) return;
    MatrixX<Scalar> d(1, 1);
    d(0, 0) = t.grad(self)(0, 0) * (-(target / pc) + (Scalar(1) - target) / (Scalar(1) - pc));
    t.accumulate(p.id, d);
  });
}

}  // namespace twtr::ag
