// Copyright 2026 The lfsr Authors
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

#include "grad_check.hpp"
#include "lfsr/blocks.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace lfsr {
namespace {

using testing::grad_check;

Matrix<double> random_input(Index rows, Index cols, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, amp);
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TEST(Snake, ZeroMapsToZero) {
  for (double alpha : {0.1, 1.0, 3.7, 25.0}) EXPECT_EQ(nn::snake(0.0, alpha), 0.0);
}

TEST(Snake, PeriodicityIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(-5.0, 5.0), a(0.2, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double xi = x(rng), ai = a(rng), period = std::numbers::pi / ai;
    EXPECT_NEAR(nn::snake(xi + period, ai) - nn::snake(xi, ai), period, 1e-12);
  }
}

TEST(Snake, DerivativeMatchesFiniteDifference) {
  ad::Tape<double> tape;
  const auto x = tape.variable(Matrix<double>::Constant(1, 1, 0.3));
  const auto log_alpha = tape.constant(Matrix<double>::Zero(1, 1));
  tape.backward(ops::snake(x, log_alpha));
  const double h = 1e-6;
  const double fd = (nn::snake(0.3 + h, 1.0) - nn::snake(0.3 - h, 1.0)) / (2 * h);
  EXPECT_NEAR(x.grad()(0, 0), fd, 1e-4 * std::abs(fd));
  EXPECT_NEAR(x.grad()(0, 0), 1.0 + std::sin(0.6), 1e-12);
}

TEST(Mish, ExamplesAndAsymptote) {
  EXPECT_EQ(nn::mish(0.0), 0.0);
  EXPECT_NEAR(nn::mish(20.0), 20.0, 1e-6);
  EXPECT_TRUE(std::isfinite(nn::mish(-1e4)));
  EXPECT_TRUE(std::isfinite(nn::mish(1e4)));
}

TEST(Mish, DerivativeMatchesFiniteDifference) {
  ad::Tape<double> tape;
  const auto x = tape.variable(Matrix<double>::Constant(1, 1, -1.0));
  tape.backward(ops::mish(x));
  const double h = 1e-6;
  const double fd = (nn::mish(-1.0 + h) - nn::mish(-1.0 - h)) / (2 * h);
  EXPECT_NEAR(x.grad()(0, 0), fd, 1e-4 * std::abs(fd));
}

TEST(TimeEmbedding, DeterministicAndDistinct) {
  ParameterStore<double> store;
  Rng rng(5);
  nn::TimeEmbedding<double> embed(store, "time", 64, rng);
  ad::Tape<double> tape(false);
  const Matrix<double> a = embed(tape, 0.5).value();
  const Matrix<double> b = embed(tape, 0.5).value();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows(), 64);
  EXPECT_GT((embed(tape, 0.0).value() - embed(tape, 1.0).value()).norm(), 0.0);

  std::vector<Matrix<double>> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(embed(tape, 0.1 * i).value());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) EXPECT_GT((grid[i] - grid[j]).norm(), 0.0) << i << "," << j;
  }
}

TEST(TimeEmbedding, FeaturesInjectiveOnUnitInterval) {
  // The lowest-frequency pair alone separates any two distinct t in [0, 1].
  const auto f0 = nn::sinusoidal_features(0.0, 2), f1 = nn::sinusoidal_features(1.0, 2);
  EXPECT_GT((f0 - f1).norm(), 0.5);
  EXPECT_THROW(nn::sinusoidal_features(0.5, 3), std::invalid_argument);
}

TEST(WeightNorm, EffectiveWeightIsDirectionTimesMagnitude) {
  ParameterStore<double> store;
  Rng rng(9);
  nn::Conv1d<double> conv(store, "c", 3, 5, ops::Conv1dGeometry{3, 1, 1, 1}, true, rng);
  auto* v = store.find("c.v");
  auto* g = store.find("c.g");
  ASSERT_NE(v, nullptr);
  ASSERT_NE(g, nullptr);
  // Scale the magnitudes away from their initial norms.
  g->value = g->value.array() * Eigen::ArrayXd::LinSpaced(5, 0.5, 2.5);
  ad::Tape<double> tape(false);
  const Matrix<double> w = conv.weight(tape).value();
  for (Index r = 0; r < 5; ++r) {
    const Matrix<double> expected = g->value(r, 0) * v->value.row(r) / v->value.row(r).norm();
    EXPECT_LT((w.row(r) - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(w.row(r).norm(), g->value(r, 0), 1e-12);
  }
  // Rescaling the direction leaves the effective weight unchanged.
  v->value *= 7.0;
  EXPECT_LT((conv.weight(tape).value() - w).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Blocks, ShapeContracts) {
  ParameterStore<double> store;
  Rng rng(2);
  nn::UNetResBlock<double> res(store, "res", 8, 16, 32, rng);
  nn::TransformerBlock<double> attn(store, "attn", 16, 2, rng);
  nn::ResBlock1d<double> codec(store, "codec", 8, 3, 7, rng);
  nn::TimeEmbedding<double> embed(store, "time", 32, rng);
  ad::Tape<double> tape(false);
  const auto x = tape.constant(random_input(8, 12, 1));
  const auto h = res(tape, x, embed(tape, 0.3));
  EXPECT_EQ(h.rows(), 16);
  EXPECT_EQ(h.cols(), 12);
  const auto y = attn(tape, h);
  EXPECT_EQ(y.rows(), 16);
  EXPECT_EQ(y.cols(), 12);
  const auto z = codec(tape, x);
  EXPECT_EQ(z.rows(), 8);
  EXPECT_EQ(z.cols(), 12);
  EXPECT_THROW(nn::GroupNorm<double>(store, "bad", 12), std::invalid_argument);
}

TEST(Blocks, TransformerIsPermutationEquivariantInTime) {
  ParameterStore<double> store;
  Rng rng(4);
  nn::TransformerBlock<double> attn(store, "attn", 8, 2, rng);
  const Matrix<double> x = random_input(8, 6, 11);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  ad::Tape<double> tape(false);
  const Matrix<double> y = attn(tape, tape.constant(x)).value();
  const Matrix<double> yp = attn(tape, tape.constant(x * perm)).value();
  EXPECT_LT((y * perm - yp).cwiseAbs().maxCoeff(), 1e-12);
}

// Scalar-loop reference for pre-norm multi-head attention plus feed-forward.
Matrix<double> naive_transformer(const ParameterStore<double>& s, const std::string& n, const Matrix<double>& x,
                                 Index heads) {
  const Index c = x.rows(), T = x.cols(), dh = c / heads;
  const auto p = [&](const std::string& k) { return s.find(n + "." + k)->value; };
  const auto layer_norm = [&](const Matrix<double>& in, const std::string& k) {
    Matrix<double> out(c, T);
    for (Index t = 0; t < T; ++t) {
      double mu = 0, var = 0;
      for (Index i = 0; i < c; ++i) mu += in(i, t) / double(c);
      for (Index i = 0; i < c; ++i) var += (in(i, t) - mu) * (in(i, t) - mu) / double(c);
      for (Index i = 0; i < c; ++i)
        out(i, t) = p(k + ".gamma")(i, 0) * (in(i, t) - mu) / std::sqrt(var + 1e-5) + p(k + ".beta")(i, 0);
    }
    return out;
  };
  const auto linear = [&](const Matrix<double>& in, const std::string& k) {
    const Matrix<double> w = p(k + ".weight"), b = p(k + ".bias");
    Matrix<double> out(w.rows(), in.cols());
    for (Index t = 0; t < in.cols(); ++t) {
      for (Index o = 0; o < w.rows(); ++o) {
        double acc = b(o, 0);
        for (Index i = 0; i < w.cols(); ++i) acc += w(o, i) * in(i, t);
        out(o, t) = acc;
      }
    }
    return out;
  };
  const Matrix<double> qkv = linear(layer_norm(x, "norm1"), "qkv");
  Matrix<double> att(c, T);
  for (Index h = 0; h < heads; ++h) {
    for (Index q = 0; q < T; ++q) {
      std::vector<double> score(T);
      double top = -1e300, z = 0;
      for (Index k = 0; k < T; ++k) {
        double dot = 0;
        for (Index d = 0; d < dh; ++d) dot += qkv(h * dh + d, q) * qkv(c + h * dh + d, k);
        score[k] = dot / std::sqrt(double(dh));
        top = std::max(top, score[k]);
      }
      for (Index k = 0; k < T; ++k) z += (score[k] = std::exp(score[k] - top));
      for (Index d = 0; d < dh; ++d) {
        double acc = 0;
        for (Index k = 0; k < T; ++k) acc += score[k] / z * qkv(2 * c + h * dh + d, k);
        att(h * dh + d, q) = acc;
      }
    }
  }
  const Matrix<double> y = x + linear(att, "proj");
  Matrix<double> hidden = linear(layer_norm(y, "norm2"), "ff1");
  for (Index i = 0; i < hidden.size(); ++i) hidden.data()[i] = nn::mish(hidden.data()[i]);
  return y + linear(hidden, "ff2");
}

TEST(Blocks, TransformerMatchesScalarReference) {
  ParameterStore<double> store;
  Rng rng(12);
  nn::TransformerBlock<double> attn(store, "attn", 8, 2, rng);
  for (const auto& p : store.items()) p->value.setRandom();
  const Matrix<double> x = random_input(8, 5, 13);
  ad::Tape<double> tape(false);
  const Matrix<double> y = attn(tape, tape.constant(x)).value();
  EXPECT_LT((y - naive_transformer(store, "attn", x, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Blocks, SnakeOutputFiniteForLargeInput) {
  ParameterStore<double> store;
  nn::Snake<double> act(store, "act", 2);
  ad::Tape<double> tape(false);
  Matrix<double> x(2, 3);
  x << 1e6, -1e6, 0, 3e3, -7, 1e-9;
  EXPECT_TRUE(act(tape, tape.constant(x)).value().allFinite());
}

// Gradient checks on micro instances. Widths carrying GroupNorm use 8
// channels, the smallest multiple of the group count.

TEST(Gradients, Snake) {
  ParameterStore<double> store;
  nn::Snake<double> act(store, "act", 4);
  store.find("act.log_alpha")->value << 0.3, -0.2, 0.7, 0.1;
  const auto r = grad_check(store, random_input(4, 8, 21),
                            [&](auto& tape, const auto& x) { return act(tape, x); }, 24, 1);
  EXPECT_GE(r.checked, 20);
  EXPECT_LT(r.worst, 1e-3);
}

TEST(Gradients, Mish) {
  ParameterStore<double> store;
  const auto r = grad_check(store, random_input(4, 8, 22, 2.0),
                            [&](auto&, const auto& x) { return ops::mish(x); }, 24, 2);
  EXPECT_GE(r.checked, 20);
  EXPECT_LT(r.worst, 1e-3);
}

TEST(Gradients, UNetResBlock) {
  ParameterStore<double> store;
  Rng rng(7);
  nn::UNetResBlock<double> res(store, "res", 4, 8, 16, rng);
  nn::TimeEmbedding<double> embed(store, "time", 16, rng);
  const auto r = grad_check(store, random_input(4, 8, 23),
                            [&](auto& tape, const auto& x) { return res(tape, x, embed(tape, 0.37)); }, 40, 3);
  EXPECT_GE(r.checked, 20);
  EXPECT_LT(r.worst, 1e-3);
}

TEST(Gradients, TransformerBlock) {
  ParameterStore<double> store;
  Rng rng(8);
  nn::TransformerBlock<double> attn(store, "attn", 8, 2, rng);
  const auto r = grad_check(store, random_input(8, 8, 24),
                            [&](auto& tape, const auto& x) { return attn(tape, x); }, 40, 4);
  EXPECT_GE(r.checked, 20);
  EXPECT_LT(r.worst, 1e-3);
}

TEST(Gradients, CodecResBlock) {
  ParameterStore<double> store;
  Rng rng(9);
  nn::ResBlock1d<double> block(store, "codec", 4, 3, 7, rng);
  const auto r = grad_check(store, random_input(4, 8, 25),
                            [&](auto& tape, const auto& x) { return block(tape, x); }, 30, 5);
  EXPECT_GE(r.checked, 20);
  EXPECT_LT(r.worst, 1e-3);
}

}  // namespace
}  // namespace lfsr
