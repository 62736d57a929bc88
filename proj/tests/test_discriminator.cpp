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

#include "lfsr/discriminator.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace lfsr {
namespace {

using Maps = std::vector<LogitMap<double>>;

Maps constant_maps(ad::Tape<double>& tape, std::vector<std::vector<double>> values) {
  Maps maps;
  for (auto& v : values) {
    Matrix<double> m(1, Index(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m(0, Index(i)) = v[i];
    maps.push_back(LogitMap<double>{tape.constant(m), 1, Index(v.size())});
  }
  return maps;
}

double scalar(const ad::Var<double>& v) { return v.value()(0, 0); }

// Scalar reference: per-logit hinge averaged over every logit of every map.
double brute_hinge(const std::vector<std::vector<double>>& maps, double sign) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& m : maps) {
    for (double d : m) {
      sum += std::max(0.0, 1.0 + sign * d);
      ++n;
    }
  }
  return sum / double(n);
}

std::vector<std::vector<double>> random_logits(std::mt19937_64& rng, const std::vector<std::size_t>& sizes) {
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<std::vector<double>> out;
  for (std::size_t s : sizes) {
    out.emplace_back(s);
    for (double& d : out.back()) d = n(rng);
  }
  return out;
}

TEST(HingeLoss, GeneratorExamples) {
  ad::Tape<double> tape(false);
  EXPECT_EQ(scalar(loss_g(constant_maps(tape, {{0, 0, 0}, {0}}))), 1.0);
  EXPECT_EQ(scalar(loss_g(constant_maps(tape, {{1, 2}, {5, 1}}))), 0.0);
  EXPECT_EQ(scalar(loss_g(constant_maps(tape, {{-1, 3}}))), 1.0);
}

TEST(HingeLoss, DiscriminatorExamples) {
  ad::Tape<double> tape(false);
  EXPECT_EQ(scalar(loss_d(constant_maps(tape, {{2, 2}}), constant_maps(tape, {{-2, -2}}))), 0.0);
  EXPECT_EQ(scalar(loss_d(constant_maps(tape, {{0, 0}}), constant_maps(tape, {{0, 0}}))), 2.0);
  EXPECT_EQ(scalar(loss_d(constant_maps(tape, {{0.5}}), constant_maps(tape, {{-0.5}}))), 1.0);
  EXPECT_THROW(loss_d(constant_maps(tape, {{0, 0}}), constant_maps(tape, {{0}})), std::invalid_argument);
  EXPECT_THROW(loss_d(constant_maps(tape, {{0}, {0}}), constant_maps(tape, {{0}})), std::invalid_argument);
}

TEST(HingeLoss, RandomSetsMatchBruteForce) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<std::size_t> sizes{1 + rng() % 40, 1 + rng() % 40, 1 + rng() % 40};
    const auto real = random_logits(rng, sizes), fake = random_logits(rng, sizes);
    ad::Tape<double> tape(false);
    const double lg = scalar(loss_g(constant_maps(tape, fake)));
    const double ld = scalar(loss_d(constant_maps(tape, real), constant_maps(tape, fake)));
    EXPECT_NEAR(lg, brute_hinge(fake, -1.0), 1e-12);
    EXPECT_NEAR(ld, brute_hinge(real, -1.0) + brute_hinge(fake, 1.0), 1e-12);
    EXPECT_GE(lg, 0.0);
    EXPECT_GE(ld, 0.0);
  }
}

TEST(HingeLoss, ZeroExactlyWhenMarginsHold) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> above(1.0, 4.0);
  std::vector<std::vector<double>> real(2, std::vector<double>(7)), fake = real;
  for (auto& m : real) for (double& d : m) d = above(rng);
  for (auto& m : fake) for (double& d : m) d = -above(rng);
  ad::Tape<double> tape(false);
  EXPECT_EQ(scalar(loss_g(constant_maps(tape, real))), 0.0);
  EXPECT_EQ(scalar(loss_d(constant_maps(tape, real), constant_maps(tape, fake))), 0.0);
  real[1][3] = 0.999;
  EXPECT_GT(scalar(loss_d(constant_maps(tape, real), constant_maps(tape, fake))), 0.0);
}

TEST(L1Loss, Examples) {
  ad::Tape<double> tape(false);
  Matrix<double> x(1, 2), z = Matrix<double>::Zero(1, 2);
  x << 1, -1;
  EXPECT_EQ(scalar(loss_r(tape.constant(x), tape.constant(z))), 1.0);
  EXPECT_EQ(scalar(loss_r(tape.constant(x), tape.constant(x))), 0.0);
  const Matrix<double> w = Matrix<double>::Random(1, 64);
  EXPECT_NEAR(scalar(loss_r(tape.constant(w), tape.constant((w.array() + 0.1).matrix()))), 0.1, 1e-12);
  EXPECT_THROW(loss_r(tape.constant(x), tape.constant(Matrix<double>::Zero(1, 3))), std::invalid_argument);
}

TEST(L1Loss, MetricPropertiesOnRandomTriples) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index len = 1 + Index(rng() % 50);
    Matrix<double> a(1, len), b(1, len), c(1, len);
    for (Index i = 0; i < len; ++i) a(0, i) = n(rng), b(0, i) = n(rng), c(0, i) = n(rng);
    ad::Tape<double> tape(false);
    const auto d = [&](const Matrix<double>& p, const Matrix<double>& q) {
      return scalar(loss_r(tape.constant(p), tape.constant(q)));
    };
    EXPECT_EQ(d(a, b), d(b, a));
    EXPECT_LE(d(a, c), d(a, b) + d(b, c) + 1e-12);
    EXPECT_GT(d(a, b), 0.0);
    EXPECT_EQ(d(a, a), 0.0);
  }
}

TEST(Discriminator, LogitShapeMatchesHandArithmetic) {
  // n_fft 512, hop 128, 16384 samples: 129 frames of 257 bins. Three (5,3)
  // convs with stride (2,1) and pad (2,1) halve the bins: 257 -> 129 -> 65 -> 33.
  // The two 3x3 same-padded convs keep 33 x 129.
  DiscriminatorConfig cfg;
  Discriminator<float> d(cfg, 1);
  const auto shape = d.critics()[0].output_shape(16384);
  EXPECT_EQ(d.critics()[0].n_fft(), 512);
  EXPECT_EQ(shape.first, 33);
  EXPECT_EQ(shape.second, 129);

  ad::Tape<float> tape(false);
  const auto maps = d(tape, tape.constant(testing::noise(8000, 16384, 2).samples.transpose().cast<float>()));
  ASSERT_EQ(maps.size(), 3u);
  EXPECT_EQ(maps[0].height, 33);
  EXPECT_EQ(maps[0].width, 129);
  EXPECT_EQ(maps[0].logits.cols(), 33 * 129);
  // n_fft 256: 129 bins -> 65 -> 33 -> 17 over 257 frames; n_fft 128: 65 -> 33 -> 17 -> 9 over 513.
  EXPECT_EQ(maps[1].height, 17);
  EXPECT_EQ(maps[1].width, 257);
  EXPECT_EQ(maps[2].height, 9);
  EXPECT_EQ(maps[2].width, 513);
}

TEST(Discriminator, DeterministicAndLengthChecked) {
  Discriminator<float> d(DiscriminatorConfig{}, 3), e(DiscriminatorConfig{}, 3);
  const Matrix<float> x = testing::noise(8000, 2048, 4).samples.transpose().cast<float>();
  ad::Tape<float> tape(false);
  const auto a = d(tape, tape.constant(x)), b = d(tape, tape.constant(x)), c = e(tape, tape.constant(x));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].logits.value(), b[i].logits.value());
    EXPECT_EQ(a[i].logits.value(), c[i].logits.value());
  }
  EXPECT_THROW(d(tape, tape.constant(Matrix<float>::Zero(1, 511))), std::invalid_argument);
}

TEST(Discriminator, StaysUnderParameterBudget) {
  Discriminator<float> d(DiscriminatorConfig{}, 1);
  EXPECT_LT(d.parameters().scalar_count(), 1000000);
  DiscriminatorConfig bad;
  bad.resolutions.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace lfsr
