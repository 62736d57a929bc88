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


// Log-spectral distance over the full band and above a cutoff, plus
// directory-level evaluation reports.
//
//   LSD = mean_frames sqrt( mean_bins ( log10(|S_est|^2 + eps) - log10(|S_ref|^2 + eps) )^2 )

#pragma once

#include "lfsr/signal.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lfsr {

struct LsdConfig {
  int n_fft = 0;  // 0: default_n_fft(rate)
  int hop = 0;    // 0: n_fft / 4
  double eps = 1e-10;
};

/// Squared per-frame log-spectral terms, (bins x frames); exposed for band decompositions.
Eigen::MatrixXd log_spectral_error(const AudioClip& ref, const AudioClip& est, const LsdConfig& cfg = {});

double lsd(const AudioClip& ref, const AudioClip& est, const LsdConfig& cfg = {});
/// Bins with centre frequency strictly above cutoff_hz.
double lsd_hf(const AudioClip& ref, const AudioClip& est, double cutoff_hz, const LsdConfig& cfg = {});
/// Bins with centre frequency at or below cutoff_hz.
double lsd_lf(const AudioClip& ref, const AudioClip& est, double cutoff_hz, const LsdConfig& cfg = {});

struct EvalRow {
  std::string file;
  double lsd = 0.0;
  double lsd_hf = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<std::string> unpaired;
  double mean_lsd = 0.0;
  double mean_lsd_hf = 0.0;

  /// One JSON object per row followed by a {"file": "mean", ...} summary line.
  void write_jsonl(std::ostream& out) const;
  /// Aligned console table in the order file | LSD | LSD-HF.
  void write_table(std::ostream& out) const;
};

/// Pairs .wav files by name; unpaired files are listed and excluded from the means.
EvalReport eval_dir(const std::filesystem::path& ref_dir, const std::filesystem::path& est_dir,
                    int source_rate, const LsdConfig& cfg = {}, int workers = 1);

}  // namespace lfsr
