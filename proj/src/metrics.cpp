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

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>

namespace lfsr {

namespace {

double frame_mean_rms(const Eigen::MatrixXd& sq, Eigen::Index first_bin, Eigen::Index bins) {
  if (bins < 2) throw std::invalid_argument("lsd: cutoff leaves fewer than 2 bins");
  const Eigen::MatrixXd band = sq.middleRows(first_bin, bins);
  return (band.colwise().mean().array().sqrt()).mean();
}

// Bins 0..n-1 of an (n_fft/2 + 1)-row spectrogram lie at or below cutoff_hz.
Eigen::Index bins_at_or_below(Eigen::Index rows, int rate, double cutoff_hz) {
  const double n_fft = double(rows - 1) * 2.0;
  Eigen::Index n = 0;
  while (n < rows && double(n) * rate / n_fft <= cutoff_hz) ++n;
  return n;
}

void check_cutoff(const AudioClip& clip, double cutoff_hz) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= 0.5 * clip.rate) {
    throw std::invalid_argument("lsd: cutoff must lie in (0, rate/2)");
  }
}

Spectrogram analyse(const AudioClip& clip, const LsdConfig& cfg) {
  const int n_fft = cfg.n_fft > 0 ? cfg.n_fft : default_n_fft(clip.rate);
  const int hop = cfg.hop > 0 ? cfg.hop : n_fft / 4;
  return stft(clip, n_fft, hop);
}

}  // namespace

Eigen::MatrixXd log_spectral_error(const AudioClip& ref, const AudioClip& est, const LsdConfig& cfg) {
  if (ref.rate != est.rate) {
    throw std::invalid_argument("lsd: rate mismatch (" + std::to_string(ref.rate) + " vs " +
                                std::to_string(est.rate) + ")");
  }
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("lsd: eps must be positive");
  AudioClip a = ref, b = est;
  if (a.size() != b.size()) {
    const Eigen::Index n = std::min(a.size(), b.size());
    std::cerr << "warning: lsd trimming lengths " << a.size() << " and " << b.size() << " to " << n << "\n";
    a.samples.conservativeResize(n);
    b.samples.conservativeResize(n);
  }
  const Spectrogram sa = analyse(a, cfg);
  const Spectrogram sb = analyse(b, cfg);
  const Eigen::ArrayXXd la = (sa.bins.array().abs2() + cfg.eps).log10();
  const Eigen::ArrayXXd lb = (sb.bins.array().abs2() + cfg.eps).log10();
  return (lb - la).square().matrix();
}

double lsd(const AudioClip& ref, const AudioClip& est, const LsdConfig& cfg) {
  const Eigen::MatrixXd sq = log_spectral_error(ref, est, cfg);
  return frame_mean_rms(sq, 0, sq.rows());
}

double lsd_hf(const AudioClip& ref, const AudioClip& est, double cutoff_hz, const LsdConfig& cfg) {
  check_cutoff(ref, cutoff_hz);
  const Eigen::MatrixXd sq = log_spectral_error(ref, est, cfg);
  const Eigen::Index low = bins_at_or_below(sq.rows(), ref.rate, cutoff_hz);
  return frame_mean_rms(sq, low, sq.rows() - low);
}

double lsd_lf(const AudioClip& ref, const AudioClip& est, double cutoff_hz, const LsdConfig& cfg) {
  check_cutoff(ref, cutoff_hz);
  const Eigen::MatrixXd sq = log_spectral_error(ref, est, cfg);
  return frame_mean_rms(sq, 0, bins_at_or_below(sq.rows(), ref.rate, cutoff_hz));
}

void EvalReport::write_jsonl(std::ostream& out) const {
  for (const auto& r : rows) {
    out << nlohmann::json{{"file", r.file}, {"lsd", r.lsd}, {"lsd_hf", r.lsd_hf}}.dump() << "\n";
  }
  for (const auto& u : unpaired) out << nlohmann::json{{"file", u}, {"unpaired", true}}.dump() << "\n";
  out << nlohmann::json{{"file", "mean"}, {"lsd", mean_lsd}, {"lsd_hf", mean_lsd_hf}, {"count", rows.size()}}
             .dump()
      << "\n";
}

void EvalReport::write_table(std::ostream& out) const {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.file.size());
  auto line = [&](const std::string& name, const std::string& a, const std::string& b) {
    out << std::left << std::setw(int(width)) << name << "  " << std::right << std::setw(8) << a << "  "
        << std::setw(8) << b << "\n";
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  line("file", "LSD", "LSD-HF");
  for (const auto& r : rows) line(r.file, fmt(r.lsd), fmt(r.lsd_hf));
  line("mean", fmt(mean_lsd), fmt(mean_lsd_hf));
  for (const auto& u : unpaired) out << "unpaired: " << u << "\n";
}

EvalReport eval_dir(const std::filesystem::path& ref_dir, const std::filesystem::path& est_dir,
                    int source_rate, const LsdConfig& cfg, int workers) {
  namespace fs = std::filesystem;
  auto list = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("eval: not a directory: " + dir.string());
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") names.insert(e.path().filename().string());
    }
    return names;
  };
  const auto refs = list(ref_dir);
  const auto ests = list(est_dir);

  EvalReport report;
  std::vector<std::string> paired;
  for (const auto& n : refs) (ests.count(n) ? paired : report.unpaired).push_back(n);
  for (const auto& n : ests) {
    if (!refs.count(n)) report.unpaired.push_back(n);
  }

  auto score = [&](const std::string& name) {
    const AudioClip ref = load_wav(ref_dir / name);
    const AudioClip est = load_wav(est_dir / name);
    return EvalRow{name, lsd(ref, est, cfg), lsd_hf(ref, est, 0.5 * source_rate, cfg)};
  };
  report.rows.resize(paired.size());
  const std::size_t n_workers = std::max<std::size_t>(1, std::min<std::size_t>(workers, paired.size()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < n_workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < paired.size(); i += n_workers) report.rows[i] = score(paired[i]);
    }));
  }
  for (auto& j : jobs) j.get();

  for (const auto& r : report.rows) {
    report.mean_lsd += r.lsd;
    report.mean_lsd_hf += r.lsd_hf;
  }
  if (!report.rows.empty()) {
    report.mean_lsd /= double(report.rows.size());
    report.mean_lsd_hf /= double(report.rows.size());
  }
  return report;
}

}  // namespace lfsr
