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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "support/fixtures.hpp"
#include "twtr/autograd.hpp"

namespace twtr::ag {
namespace {

using T = Tape<double>;
using V = Var<double>;
using Fn = std::function<V(T&, const std::vector<V>&)>;

V weighted_sum(T& t, V out, const Matrix& w) {
  V ones_r = t.constant(Matrix::Ones(1, out.rows()));
  V ones_c = t.constant(Matrix::Ones(out.cols(), 1));
  return matmul(matmul(ones_r, hadamard(out, t.constant(w))), ones_c);
}

double evaluate(const Fn& f, const std::vector<Matrix>& inputs, const Matrix& w) {
  T t;
  std::vector<V> vars;
  for (const auto& m : inputs) vars.push_back(t.constant(m));
  return weighted_sum(t, f(t, vars), w).value()(0, 0);
}

// Central differences against the tape for every input entry.
void expect_gradients(const Fn& f, std::vector<Matrix> inputs, double tol = 1e-7, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Matrix w;
  {
    T t;
    std::vector<V> vars;
    for (const auto& m : inputs) vars.push_back(t.constant(m));
    const V out = f(t, vars);
    w = twtr::testing::random_matrix(out.rows(), out.cols(), rng);
  }
  std::vector<Matrix> grads;
  for (const auto& m : inputs) grads.push_back(Matrix::Zero(m.rows(), m.cols()));
  {
    T t;
    std::vector<V> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(t.parameter(inputs[i], &grads[i]));
    t.backward(weighted_sum(t, f(t, vars), w));
  }
  const double h = 1e-6;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index j = 0; j < inputs[i].size(); ++j) {
      auto plus = inputs;
      auto minus = inputs;
      plus[i].data()[j] += h;
      minus[i].data()[j] -= h;
      const double numeric = (evaluate(f, plus, w) - evaluate(f, minus, w)) / (2 * h);
      const double analytic = grads[i].data()[j];
      EXPECT_NEAR(analytic, numeric, tol * std::max(1.0, std::abs(numeric))) << "input " << i << " entry " << j;
    }
  }
}

Matrix rnd(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  return twtr::testing::random_matrix(r, c, rng, scale);
}

TEST(Gradients, Elementwise) {
  expect_gradients([](T&, const std::vector<V>& x) { return tanh(x[0]); }, {rnd(3, 4, 1)});
  expect_gradients([](T&, const std::vector<V>& x) { return sigmoid(x[0]); }, {rnd(3, 4, 2)});
  expect_gradients([](T&, const std::vector<V>& x) { return gelu(x[0]); }, {rnd(3, 4, 3)});
  expect_gradients([](T&, const std::vector<V>& x) { return scale(x[0], -2.5); }, {rnd(2, 2, 4)});
  expect_gradients([](T&, const std::vector<V>& x) { return hadamard(x[0], x[1]); }, {rnd(2, 3, 5), rnd(2, 3, 6)});
  expect_gradients([](T&, const std::vector<V>& x) { return x[0] - x[1] + x[0]; }, {rnd(2, 3, 7), rnd(2, 3, 8)});
}

TEST(Gradients, Linear) {
  expect_gradients([](T&, const std::vector<V>& x) { return matmul(x[0], x[1]); }, {rnd(3, 4, 1), rnd(4, 2, 2)});
  expect_gradients([](T&, const std::vector<V>& x) { return add_row(x[0], x[1]); }, {rnd(3, 4, 3), rnd(1, 4, 4)});
}

TEST(Gradients, Reshaping) {
  expect_gradients([](T&, const std::vector<V>& x) { return concat_rows<double>({x[0], x[1], x[0]}); },
                   {rnd(2, 3, 1), rnd(1, 3, 2)});
  expect_gradients([](T&, const std::vector<V>& x) { return concat_cols(x[0], x[1]); }, {rnd(2, 3, 3), rnd(2, 1, 4)});
  expect_gradients([](T&, const std::vector<V>& x) { return slice_rows(x[0], 1, 2); }, {rnd(4, 3, 5)});
  expect_gradients([](T&, const std::vector<V>& x) { return gather_rows(x[0], {2, 0, 2, 2}); }, {rnd(3, 2, 6)});
  Mask m(4);
  m << true, false, true, true;
  expect_gradients([m](T&, const std::vector<V>& x) { return mask_rows(x[0], m); }, {rnd(4, 3, 7)});
  expect_gradients([m](T&, const std::vector<V>& x) { return masked_mean_rows(x[0], m); }, {rnd(4, 3, 8)});
  expect_gradients([](T&, const std::vector<V>& x) { return block_mean_rows(x[0], {{0, 1}, {1, 3}, {4, 1}}); },
                   {rnd(5, 2, 9)});
}

TEST(Gradients, LayerNorm) {
  expect_gradients([](T&, const std::vector<V>& x) { return layer_norm(x[0], x[1], x[2]); },
                   {rnd(3, 5, 1), rnd(1, 5, 2), rnd(1, 5, 3)}, 1e-6);
}

TEST(Gradients, Attention) {
  Mask all = Mask::Constant(5, true);
  Mask some = all;
  some(1) = false;
  for (int heads : {1, 2}) {
    expect_gradients([&](T&, const std::vector<V>& x) { return multi_head_attention(x[0], x[1], x[2], all, heads); },
                     {rnd(3, 4, 1), rnd(5, 4, 2), rnd(5, 4, 3)});
    expect_gradients([&](T&, const std::vector<V>& x) { return multi_head_attention(x[0], x[1], x[2], some, heads); },
                     {rnd(3, 4, 4), rnd(5, 4, 5), rnd(5, 4, 6)});
    expect_gradients(
        [&](T&, const std::vector<V>& x) {
          return multi_head_attention(x[0], x[1], x[2], all, heads, {{0, 2}, {2, 3}});
        },
        {rnd(5, 4, 7), rnd(5, 4, 8), rnd(5, 4, 9)});
  }
}

TEST(Gradients, CrossEntropy) {
  Matrix p(3, 1);
  p << 0.2, 0.7, 0.55;
  expect_gradients([](T&, const std::vector<V>& x) { return binary_cross_entropy_sum(x[0], {1.0, 0.0, 1.0}); }, {p},
                   1e-6);
  expect_gradients([](T&, const std::vector<V>& x) { return binary_cross_entropy(x[0], 0.0); },
                   {Matrix::Constant(1, 1, 0.3)}, 1e-6);
}

TEST(Values, AttentionMatchesSoftmaxFormula) {
  const Matrix q = rnd(2, 4, 11), k = rnd(3, 4, 12), v = rnd(3, 4, 13);
  Mask mask(3);
  mask << true, false, true;
  T t;
  const Matrix got = multi_head_attention(t.constant(q), t.constant(k), t.constant(v), mask, 2).value();
  for (int h = 0; h < 2; ++h) {
    for (int i = 0; i < 2; ++i) {
      double e[3], total = 0;
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int c = 0; c < 2; ++c) s += q(i, 2 * h + c) * k(j, 2 * h + c);
        e[j] = mask(j) ? std::exp(s / std::sqrt(2.0)) : 0.0;
        total += e[j];
      }
      for (int c = 0; c < 2; ++c) {
        double want = 0;
        for (int j = 0; j < 3; ++j) want += e[j] / total * v(j, 2 * h + c);
        EXPECT_NEAR(got(i, 2 * h + c), want, 1e-14);
      }
    }
  }
}

TEST(Values, BlockedAttentionEqualsSeparateRuns) {
  const Matrix q = rnd(5, 4, 21), k = rnd(5, 4, 22), v = rnd(5, 4, 23);
  T t;
  const Matrix packed =
      multi_head_attention(t.constant(q), t.constant(k), t.constant(v), Mask::Constant(5, true), 2, {{0, 2}, {2, 3}})
          .value();
  const Matrix a = multi_head_attention(t.constant(q.topRows(2)), t.constant(k.topRows(2)), t.constant(v.topRows(2)),
                                        Mask::Constant(2, true), 2)
                       .value();
  const Matrix b = multi_head_attention(t.constant(q.bottomRows(3)), t.constant(k.bottomRows(3)),
                                        t.constant(v.bottomRows(3)), Mask::Constant(3, true), 2)
                       .value();
  EXPECT_LT((packed.topRows(2) - a).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((packed.bottomRows(3) - b).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(multi_head_attention(t.constant(q), t.constant(k), t.constant(v), Mask::Constant(5, true), 2, {{0, 2}}),
               Error);
}

TEST(Values, LayerNormAndGelu) {
  Matrix x(1, 4);
  x << 1, 2, 3, 6;
  T t;
  const Matrix y = layer_norm(t.constant(x), t.constant(Matrix::Ones(1, 4)), t.constant(Matrix::Zero(1, 4))).value();
  const double mean = 3.0, var = (4 + 1 + 0 + 9) / 4.0;
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(y(0, j), (x(0, j) - mean) / std::sqrt(var + 1e-5), 1e-14);
  const double g = gelu(t.constant(Matrix::Constant(1, 1, 0.7))).value()(0, 0);
  const double want = 0.5 * 0.7 * (1 + std::tanh(std::sqrt(2 / std::numbers::pi) * (0.7 + 0.044715 * 0.343)));
  EXPECT_NEAR(g, want, 1e-15);
}

TEST(Values, CrossEntropyClampHasNoGradient) {
  Matrix p(2, 1);
  p << 0.0, 0.25;
  Matrix grad = Matrix::Zero(2, 1);
  T t;
  const V loss = binary_cross_entropy_sum(t.parameter(p, &grad), {1.0, 0.0});
  EXPECT_NEAR(loss.value()(0, 0), -std::log(1e-7) - std::log(0.75), 1e-12);
  t.backward(loss);
  EXPECT_EQ(grad(0, 0), 0.0);
  EXPECT_NEAR(grad(1, 0), 1 / 0.75, 1e-14);
}

TEST(Tape, ConstantsGetNoGradientAndSinksAccumulate) {
  Matrix a = rnd(2, 2, 31);
  Matrix ga = Matrix::Constant(2, 2, 1.0);
  T t;
  const V pa = t.parameter(a, &ga);
  const V c = t.constant(rnd(2, 2, 32));
  EXPECT_FALSE(t.requires_grad(c.id));
  const V s = matmul(matmul(t.constant(Matrix::Ones(1, 2)), hadamard(pa, c) + pa), t.constant(Matrix::Ones(2, 1)));
  t.backward(s);
  EXPECT_EQ(ga, (Matrix::Constant(2, 2, 2.0) + c.value()));
  EXPECT_FALSE(t.has_grad(c.id));
  EXPECT_THROW(t.backward(pa), Error);
}

}  // namespace
}  // namespace twtr::ag
