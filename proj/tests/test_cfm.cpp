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

#include "lfsr/cfm.hpp"
#include "lfsr/errors.hpp"
#include "lfsr/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace lfsr {
namespace {

using L = Latent<double>;
using Model = VelocityModel<double>;
using testing::operator+;

L random_latent(Index rows, Index cols, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, amp);
  L m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Model field(std::function<L(const L&, double, const L&)> f) {
  return [f](ad::Tape<double>& tape, const ad::Var<double>& s, double t, const ad::Var<double>& c) {
    return tape.constant(f(s.value(), t, c.value()));
  };
}

double scalar(const ad::Var<double>& v) { return v.value()(0, 0); }

TEST(FlowPath, EndpointsAreExact) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const L l0 = random_latent(5, 7, seed, 1e3), l1 = random_latent(5, 7, seed + 100, 1e-3);
    EXPECT_EQ(make_path(l0, l1, 0.0).lt, l0);
    EXPECT_EQ(make_path(l0, l1, 1.0).lt, l1);
    const auto f0 = make_path<float>(l0.cast<float>(), l1.cast<float>(), 0.0f);
    EXPECT_EQ(f0.lt, l0.cast<float>());
  }
}

TEST(FlowPath, MidpointArithmetic) {
  const auto p = make_path<double>(L::Zero(3, 4), L::Constant(3, 4, 2.0), 0.5);
  EXPECT_EQ(p.lt, L::Constant(3, 4, 1.0));
  EXPECT_EQ(p.v_target, L::Constant(3, 4, 2.0));
}

TEST(FlowPath, TargetVelocityIndependentOfTime) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const L l0 = random_latent(4, 6, 1), l1 = random_latent(4, 6, 2);
  const L v = make_path(l0, l1, 0.0).v_target;
  for (int i = 0; i < 100; ++i) EXPECT_EQ(make_path(l0, l1, u(rng)).v_target, v);
}

TEST(FlowPath, SampleDrawsFreshNoiseAndChecksTime) {
  Rng rng(3);
  const L l1 = random_latent(4, 8, 5);
  const auto a = sample_path(l1, rng, 0.3), b = sample_path(l1, rng, 0.3);
  EXPECT_NE(a.l0, b.l0);
  EXPECT_TRUE(a.lt.isApprox(0.7 * a.l0 + 0.3 * l1));
  EXPECT_EQ(a.v_target, l1 - a.l0);
  EXPECT_THROW(sample_path(l1, rng, -0.01), std::invalid_argument);
  EXPECT_THROW(sample_path(l1, rng, 1.01), std::invalid_argument);
  EXPECT_THROW(sample_path(l1, rng, std::nan("")), std::invalid_argument);
  EXPECT_THROW(make_path<double>(L::Zero(2, 2), L::Zero(2, 3), 0.5), std::invalid_argument);
}

TEST(FlowPath, StandardNormalStatistics) {
  Rng rng(6);
  const L z = standard_normal<double>(64, 1000, rng);
  EXPECT_NEAR(z.mean(), 0.0, 4.0 / std::sqrt(double(z.size())));
  EXPECT_NEAR((z.array() - z.mean()).square().mean(), 1.0, 0.02);
}

TEST(CfmLoss, OracleVelocityGivesZero) {
  Rng rng(7);
  std::vector<FlowPath<double>> paths;
  std::vector<L> conds;
  for (int i = 0; i < 8; ++i) {
    paths.push_back(sample_path(random_latent(6, 4, 10 + i), rng, double(i) / 7.0));
    conds.push_back(random_latent(6, 4, 30 + i));
  }
  std::size_t next = 0;
  const Model oracle = [&](ad::Tape<double>& tape, const ad::Var<double>&, double, const ad::Var<double>&) {
    return tape.constant(paths[next++].v_target);
  };
  ad::Tape<double> tape;
  EXPECT_LT(scalar(cfm_loss(tape, oracle, paths, conds)), 1e-12);
}

TEST(CfmLoss, ConstantOffsetGivesOne) {
  Rng rng(8);
  std::vector<FlowPath<double>> paths{sample_path(random_latent(3, 5, 1), rng, 0.2),
                                      sample_path(random_latent(3, 5, 2), rng, 0.9)};
  std::size_t next = 0;
  const Model offset = [&](ad::Tape<double>& tape, const ad::Var<double>&, double, const ad::Var<double>&) {
    return tape.constant((paths[next++].v_target.array() + 1.0).matrix());
  };
  ad::Tape<double> tape;
  EXPECT_NEAR(scalar(cfm_loss(tape, offset, paths, {L::Zero(3, 5), L::Zero(3, 5)})), 1.0, 1e-12);
}

TEST(CfmLoss, MatchesScalarBruteForceOn2x3) {
  // A non-trivial field that reads state, time and condition elementwise.
  const auto f = [](const L& s, double t, const L& c) {
    L out(s.rows(), s.cols());
    for (Index i = 0; i < s.size(); ++i) out.data()[i] = std::tanh(s.data()[i]) * t + 0.5 * c.data()[i] - 0.2;
    return out;
  };
  Rng rng(9);
  const L l1 = random_latent(2, 3, 11), cond = random_latent(2, 3, 12);
  std::vector<FlowPath<double>> paths;
  ad::Tape<double> tape;
  const double loss = scalar(cfm_loss(tape, field(f), l1, cond, rng, 5, &paths));
  ASSERT_EQ(paths.size(), 5u);

  double sum = 0;
  int n = 0;
  for (const auto& p : paths) {
    for (Index r = 0; r < 2; ++r) {
      for (Index c = 0; c < 3; ++c) {
        const double l0 = p.l0(r, c), target = l1(r, c);
        const double lt = (1 - p.t) * l0 + p.t * target;
        const double pred = std::tanh(lt) * p.t + 0.5 * cond(r, c) - 0.2;
        const double diff = pred - (target - l0);
        sum += diff * diff;
        ++n;
      }
    }
  }
  EXPECT_NEAR(loss, sum / n, 1e-10);
  EXPECT_GE(loss, 0.0);
}

TEST(CfmLoss, InvariantUnderJointElementPermutation) {
  const auto f = [](const L& s, double t, const L&) { return L((0.3 * s.array() + 0.1 * t).matrix()); };
  std::mt19937_64 shuffle_rng(13);
  const L l0 = random_latent(4, 6, 14), l1 = random_latent(4, 6, 15);
  std::vector<Index> perm(24);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), shuffle_rng);
  const auto permute = [&](const L& m) {
    L out(m.rows(), m.cols());
    for (Index i = 0; i < m.size(); ++i) out.data()[i] = m.data()[perm[std::size_t(i)]];
    return out;
  };
  ad::Tape<double> tape;
  const double a = scalar(cfm_loss(tape, field(f), {make_path(l0, l1, 0.35)}, {L::Zero(4, 6)}));
  const double b = scalar(cfm_loss(tape, field(f), {make_path(permute(l0), permute(l1), 0.35)}, {L::Zero(4, 6)}));
  EXPECT_NEAR(a, b, 1e-14 * a);
}

TEST(CfmLoss, DifferentiableThroughVelocityNet) {
  VelocityNetConfig cfg{4, 8, 2, 16};
  VelocityNet<double> net(cfg, 1);
  Rng rng(2);
  ad::Tape<double> tape;
  const auto loss = cfm_loss(tape, as_model(net), random_latent(4, 8, 3), random_latent(4, 8, 4), rng, 2);
  net.parameters().zero_grad();
  tape.backward(loss);
  double norm = 0;
  for (const auto& p : net.parameters().items()) norm += p->grad.squaredNorm();
  EXPECT_GT(norm, 0.0);
  EXPECT_THROW(cfm_loss(tape, as_model(net), random_latent(4, 8, 3), random_latent(4, 8, 4), rng, 0),
               std::invalid_argument);
}

TEST(Euler, ConstantFieldSingleStepLandsOnTarget) {
  const L l0 = random_latent(3, 4, 1), l1 = random_latent(3, 4, 2);
  const L out = euler_solve<double>(field([&](const L&, double, const L&) { return L(l1 - l0); }), l0, L::Zero(3, 4),
                            SolverConfig{1});
  EXPECT_LT((out - l1).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Euler, SingleStepClosedFormWithNetwork) {
  VelocityNet<double> net(VelocityNetConfig{4, 8, 2, 16}, 3);
  const L l0 = random_latent(4, 8, 5), cond = random_latent(4, 8, 6);
  const L out = euler_solve<double>(as_model(net), l0, cond, SolverConfig{1});
  EXPECT_EQ(out, L(l0 + net.evaluate(l0, 0.0, cond)));
}

TEST(Euler, FirstOrderConvergenceOnDecay) {
  const Model decay = field([](const L& s, double, const L&) { return L(-s); });
  const double exact = std::exp(-1.0);
  EXPECT_NEAR(exact, 0.367879, 1e-6);
  const auto error = [&](int n) {
    return std::abs(euler_solve<double>(decay, L::Ones(1, 1), L::Zero(1, 1), SolverConfig{n})(0, 0) - exact);
  };
  for (int n : {16, 32, 64}) {
    const double ratio = error(n) / error(2 * n);
    EXPECT_GE(ratio, 1.8) << n;
    EXPECT_LE(ratio, 2.2) << n;
  }
}

TEST(Euler, LeftEndpointRiemannSum) {
  const Model ramp = field([](const L& s, double t, const L&) { return L(L::Constant(s.rows(), s.cols(), 2 * t)); });
  const L l0 = random_latent(2, 2, 7);
  const L out = euler_solve<double>(ramp, l0, L::Zero(2, 2), SolverConfig{4});
  L brute = l0;
  for (int n = 0; n < 4; ++n) brute.array() += 0.25 * 2.0 * (n * 0.25);
  EXPECT_LT((out - brute).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out - (l0.array() + 0.75).matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Euler, ReportsFailingStep) {
  const Model blowup = field([](const L& s, double t, const L&) {
    return t >= 0.5 ? L(L::Constant(s.rows(), s.cols(), std::numeric_limits<double>::infinity())) : L(s);
  });
  try {
    euler_solve<double>(blowup, L::Ones(2, 2), L::Zero(2, 2), SolverConfig{4});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 2);
  }
  EXPECT_THROW(euler_solve<double>(blowup, L::Ones(2, 2), L::Zero(2, 2), SolverConfig{0}), std::invalid_argument);
}

class SuperResolve : public ::testing::Test {
 protected:
  static AutoencoderConfig ae_config() {
    AutoencoderConfig c;
    c.base_width = 8;
    return c;
  }
  Autoencoder<float> ae_{ae_config(), 1};
  VelocityNet<float> net_{VelocityNetConfig{64, 8, 2, 16}, 2};
  AudioClip source_ = testing::faded(testing::sine(440.0, 2000, 2000) + testing::sine(730.0, 2000, 2000, 0.2), 100);
};

TEST_F(SuperResolve, OutputContract) {
  const AudioClip out = super_resolve(source_, ae_, net_, SuperResolveConfig{8000, 1, 0});
  EXPECT_EQ(out.rate, 8000);
  EXPECT_EQ(out.size(), 8000);
  const AudioClip odd{source_.samples.head(1234), 2000};
  EXPECT_EQ(super_resolve(odd, ae_, net_, SuperResolveConfig{8000, 1, 0}).size(), std::lround(1234 * 4.0));
}

TEST_F(SuperResolve, LowBandFollowsUpsampledInput) {
  // Broadband input; the top tenth below the source Nyquist is the resampler's transition band.
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.2);
  Eigen::VectorXd x(2000);
  for (auto& v : x) v = n(rng);
  const AudioClip noisy{x, 2000};
  const AudioClip out = super_resolve(noisy, ae_, net_, SuperResolveConfig{8000, 1, 5});
  EXPECT_LT(lsd_lf(resample(noisy, 8000), out, 900.0), 0.05);
}

TEST_F(SuperResolve, SeedDeterminesOutput) {
  const AudioClip a = super_resolve(source_, ae_, net_, SuperResolveConfig{8000, 2, 9});
  const AudioClip b = super_resolve(source_, ae_, net_, SuperResolveConfig{8000, 2, 9});
  const AudioClip c = super_resolve(source_, ae_, net_, SuperResolveConfig{8000, 2, 10});
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST_F(SuperResolve, RejectsBadRates) {
  EXPECT_THROW(super_resolve(AudioClip{source_.samples, 8000}, ae_, net_, SuperResolveConfig{8000, 1, 0}),
               std::invalid_argument);
  EXPECT_THROW(super_resolve(AudioClip{Eigen::VectorXd(), 2000}, ae_, net_, SuperResolveConfig{8000, 1, 0}),
               std::invalid_argument);
}

}  // namespace
}  // namespace lfsr
