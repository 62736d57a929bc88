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


#include "lfsr/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <complex>
#include <sstream>

namespace lfsr {
namespace {

using testing::noise;
using testing::scratch_dir;
using testing::sine;

// Independent scalar-loop LSD: naive DFT, explicit window, explicit centring.
double brute_force_lsd(const Eigen::VectorXd& ref, const Eigen::VectorXd& est, int n_fft, int hop,
                       double eps, double lo_hz, double hi_hz, int rate) {
  const long len = ref.size();
  const long frames = 1 + len / hop;
  double total = 0.0;
  for (long f = 0; f < frames; ++f) {
    double acc = 0.0;
    int count = 0;
    for (int k = 0; k <= n_fft / 2; ++k) {
      const double freq = double(k) * rate / n_fft;
      if (!(freq > lo_hz && freq <= hi_hz)) continue;
      std::complex<double> a(0, 0), b(0, 0);
      for (int n = 0; n < n_fft; ++n) {
        const long at = f * hop - n_fft / 2 + n;
        if (at < 0 || at >= len) continue;
        const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / n_fft));
        const std::complex<double> e = std::polar(1.0, -2.0 * M_PI * double(k) * n / n_fft);
        a += ref[at] * w * e;
        b += est[at] * w * e;
      }
      const double d = std::log10(std::norm(b) + eps) - std::log10(std::norm(a) + eps);
      acc += d * d;
      ++count;
    }
    total += std::sqrt(acc / count);
  }
  return total / frames;
}

TEST(Lsd, IdenticalIsZero) {
  const AudioClip x = noise(8000, 4000, 1);
  EXPECT_EQ(lsd(x, x), 0.0);
  EXPECT_EQ(lsd_hf(x, x, 1000.0), 0.0);
}

TEST(Lsd, TenfoldAmplitudeIsTwo) {
  const AudioClip x = noise(8000, 4000, 2);
  AudioClip y = x;
  y.samples *= 10.0;
  EXPECT_NEAR(lsd(x, y), 2.0, 1e-6);
}

TEST(Lsd, MatchesBruteForce) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const AudioClip a = noise(8000, 1200, seed);
    const AudioClip b = noise(8000, 1200, seed + 100, 0.1);
    LsdConfig cfg;
    cfg.n_fft = 128;
    cfg.hop = 32;
    EXPECT_NEAR(lsd(a, b, cfg), brute_force_lsd(a.samples, b.samples, 128, 32, 1e-10, -1.0, 1e9, 8000), 1e-9);
    EXPECT_NEAR(lsd_hf(a, b, 1000.0, cfg),
                brute_force_lsd(a.samples, b.samples, 128, 32, 1e-10, 1000.0, 1e9, 8000), 1e-9);
  }
}

TEST(Lsd, Symmetric) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AudioClip a = noise(8000, 3000, seed);
    const AudioClip b = noise(8000, 3000, seed + 7, 0.05);
    EXPECT_EQ(lsd(a, b), lsd(b, a));
  }
}

TEST(Lsd, HighBandOnlySeesHighBand) {
  const AudioClip base = sine(3000.0, 8000, 8000, 0.3);
  const AudioClip a = testing::operator+(base, sine(300.0, 8000, 8000, 0.3));
  const AudioClip b = testing::operator+(base, sine(500.0, 8000, 8000, 0.1));
  // differences confined below 1 kHz leave leakage well under the floor above 2 kHz
  EXPECT_GT(lsd(a, b), 0.0);
  EXPECT_LT(lsd_hf(a, b, 2000.0), lsd(a, b));
}

TEST(Lsd, HighBandZeroWhenDifferenceIsBelowCutoff) {
  const AudioClip a = noise(8000, 4000, 3);
  Spectrogram sa = stft(a);
  Spectrogram sb = sa;
  for (Eigen::Index k = 0; k < sb.bins.rows(); ++k) {
    if (sb.bin_frequency(k) <= 1000.0) sb.bins.row(k) *= 0.5;
  }
  const AudioClip b = istft(sb);
  // istft then stft is not bin-exact for a modified spectrogram, so compare on the modified spectrum
  const AudioClip a2 = istft(sa);
  EXPECT_GT(lsd(a2, b), 0.1);
  EXPECT_LT(lsd_hf(a2, b, 1500.0), 0.05);
}

TEST(Lsd, BandDecompositionIdentity) {
  const AudioClip a = noise(8000, 4000, 4);
  const AudioClip b = noise(8000, 4000, 5, 0.2);
  const Eigen::MatrixXd sq = log_spectral_error(a, b);
  const double cutoff = 1000.0;
  const Spectrogram geom = stft(a);
  Eigen::Index low = 0;
  while (geom.bin_frequency(low) <= cutoff) ++low;
  const Eigen::Index high = sq.rows() - low;
  for (Eigen::Index f = 0; f < sq.cols(); ++f) {
    const double full = sq.col(f).mean();
    const double lo = sq.col(f).head(low).mean();
    const double hi = sq.col(f).tail(high).mean();
    EXPECT_NEAR(full, (low * lo + high * hi) / double(sq.rows()), 1e-9);
  }
}

TEST(Lsd, CircularShiftByHopMultiplesForPeriodicSignals) {
  // period 64 samples divides the hop of 128
  const AudioClip a = testing::operator+(sine(125.0, 8000, 4096, 0.4), sine(375.0, 8000, 4096, 0.2));
  const AudioClip b = sine(250.0, 8000, 4096, 0.3);
  const double base = lsd(a, b);
  for (int shift : {128, 256, 1024}) {
    AudioClip as = a, bs = b;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      as.samples[i] = a.samples[(i + shift) % a.size()];
      bs.samples[i] = b.samples[(i + shift) % b.size()];
    }
    EXPECT_NEAR(lsd(as, bs), base, 1e-6);
  }
}

TEST(Lsd, TrimsMismatchedLengths) {
  const AudioClip a = noise(8000, 4000, 6);
  AudioClip b = a;
  b.samples.conservativeResize(3900);
  AudioClip a_trim = a;
  a_trim.samples.conservativeResize(3900);
  EXPECT_EQ(lsd(a, b), lsd(a_trim, b));
}

TEST(Lsd, Errors) {
  const AudioClip a = noise(8000, 1000, 1);
  EXPECT_THROW(lsd(a, noise(16000, 1000, 1)), std::invalid_argument);
  EXPECT_THROW(lsd_hf(a, a, 0.0), std::invalid_argument);
  EXPECT_THROW(lsd_hf(a, a, 4000.0), std::invalid_argument);
  // cutoff leaving a single bin (Nyquist)
  EXPECT_THROW(lsd_hf(a, a, 3990.0), std::invalid_argument);
}

TEST(EvalDir, IdenticalDirectoriesGiveZeros) {
  auto dir = scratch_dir("eval_same");
  for (int i = 0; i < 3; ++i) save_wav(noise(8000, 4000, i), dir / ("f" + std::to_string(i) + ".wav"));
  const EvalReport r = eval_dir(dir, dir, 2000, {}, 2);
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.lsd, 0.0);
    EXPECT_EQ(row.lsd_hf, 0.0);
  }
  EXPECT_EQ(r.mean_lsd, 0.0);
}

TEST(EvalDir, MeansAndUnpaired) {
  auto ref = scratch_dir("eval_ref");
  auto est = scratch_dir("eval_est");
  for (int i = 0; i < 4; ++i) {
    const std::string name = "f" + std::to_string(i) + ".wav";
    save_wav(noise(8000, 4000, i), ref / name);
    save_wav(noise(8000, 4000, i + 50, 0.1), est / name);
  }
  save_wav(noise(8000, 100, 9), ref / "only_ref.wav");
  save_wav(noise(8000, 100, 9), est / "only_est.wav");
  const EvalReport r = eval_dir(ref, est, 2000);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.unpaired.size(), 2u);
  double m = 0.0, mh = 0.0;
  for (const auto& row : r.rows) {
    m += row.lsd;
    mh += row.lsd_hf;
  }
  EXPECT_NEAR(r.mean_lsd, m / 4.0, 1e-12);
  EXPECT_NEAR(r.mean_lsd_hf, mh / 4.0, 1e-12);

  std::ostringstream jsonl, table;
  r.write_jsonl(jsonl);
  r.write_table(table);
  EXPECT_NE(jsonl.str().find("\"file\":\"mean\""), std::string::npos);
  EXPECT_NE(table.str().find("LSD-HF"), std::string::npos);
}

}  // namespace
}  // namespace lfsr
