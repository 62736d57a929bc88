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


// Waveform I/O, band-limited resampling, STFT/ISTFT and low-band replacement.
// All functions are pure; they may be called concurrently.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <filesystem>
#include <string>

namespace lfsr {

struct AudioClip {
  Eigen::VectorXd samples;
  int rate = 0;

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return double(samples.size()) / rate; }
};

enum class WavEncoding { pcm16, float32 };

struct SaveReport {
  bool clipped = false;
  Eigen::Index clipped_samples = 0;
};

/// PCM-16 or float32 RIFF/WAVE; multi-channel input is averaged to mono.
AudioClip load_wav(const std::filesystem::path& path);
/// Samples outside [-1, 1] are saturated and reported.
SaveReport save_wav(const AudioClip& clip, const std::filesystem::path& path,
                    WavEncoding encoding = WavEncoding::float32);

/// Kaiser-windowed sinc (beta 8.6) with cutoff at 0.9x the lower Nyquist.
/// Output length is round(len * new_rate / rate); equal rates return a copy.
AudioClip resample(const AudioClip& clip, int new_rate);

/// Round trip through `source_rate`, trimmed or padded to the input length.
AudioClip make_lr(const AudioClip& hr, int source_rate);

struct Spectrogram {
  Eigen::MatrixXcd bins;  // (n_fft/2 + 1) x frames
  int n_fft = 0;
  int hop = 0;
  int rate = 0;
  Eigen::Index length = 0;  // samples of the analysed signal

  double bin_frequency(Eigen::Index k) const { return double(k) * rate / n_fft; }
};

/// Power of two nearest a 46 ms window at `rate` (2048 at 44.1 kHz).
int default_n_fft(int rate);

/// Centred (zero-padded by n_fft/2) periodic-Hann STFT with 1 + len/hop frames.
/// Requires n_fft a power of two, n_fft % hop == 0 and hop <= n_fft/2.
Spectrogram stft(const AudioClip& clip, int n_fft, int hop);
Spectrogram stft(const AudioClip& clip);
/// Weighted overlap-add inverse of stft().
AudioClip istft(const Spectrogram& spec);

/// Copies every bin with centre frequency <= cutoff_hz from `input` into `generated`.
Spectrogram replace_low_band_bins(const Spectrogram& generated, const Spectrogram& input,
                                  double cutoff_hz);
/// STFT both clips at the default resolution, swap the low band, invert.
AudioClip replace_low_band(const AudioClip& generated, const AudioClip& input_lr, double cutoff_hz);

}  // namespace lfsr
