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


#include "lfsr/signal.hpp"

#include "lfsr/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lfsr {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void write_le(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

std::string chunk_id(const std::vector<char>& bytes, std::size_t offset) {
  return std::string(bytes.data() + offset, 4);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

constexpr double kKaiserBeta = 8.6;
constexpr double kZeroCrossings = 128.0;
constexpr long kMaxPhaseTable = 4096;

class SincKernel {
 public:
  // cutoff is in cycles per input sample.
  explicit SincKernel(double cutoff)
      : cutoff_(cutoff),
        half_width_(kZeroCrossings / (2.0 * cutoff)),
        norm_(1.0 / std::cyl_bessel_i(0.0, kKaiserBeta)) {}

  double half_width() const { return half_width_; }

  double operator()(double tau) const {
    const double r = tau / half_width_;
    if (std::abs(r) >= 1.0) return 0.0;
    const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) * norm_;
    return 2.0 * cutoff_ * sinc(2.0 * cutoff_ * tau) * window;
  }

 private:
  double cutoff_;
  double half_width_;
  double norm_;
};

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

Eigen::VectorXd hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

void check_stft_geometry(int n_fft, int hop) {
  if (!is_power_of_two(n_fft)) {
    throw std::invalid_argument("stft: n_fft must be a power of two, got " + std::to_string(n_fft));
  }
  if (hop <= 0 || hop > n_fft / 2 || n_fft % hop != 0) {
    throw std::invalid_argument("stft: hop " + std::to_string(hop) +
                                " breaks perfect reconstruction for n_fft " + std::to_string(n_fft));
  }
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || chunk_id(bytes, 0) != "RIFF") {
    throw FormatError("RIFF", path.string() + ": missing or truncated RIFF header");
  }
  if (chunk_id(bytes, 8) != "WAVE") throw FormatError("WAVE", path.string() + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_offset = 0, data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = chunk_id(bytes, pos);
    const std::uint32_t size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw FormatError(id, path.string() + ": chunk extends past end of file");
    }
    if (id == "fmt ") {
      if (size < 16) throw FormatError(id, path.string() + ": fmt chunk too short");
      format = read_le<std::uint16_t>(bytes, body);
      channels = read_le<std::uint16_t>(bytes, body + 2);
      rate = read_le<std::uint32_t>(bytes, body + 4);
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw FormatError(id, path.string() + ": extensible fmt chunk too short");
        format = read_le<std::uint16_t>(bytes, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_offset = body;
      data_size = size;
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError("fmt ", path.string() + ": no fmt chunk");
  if (!have_data) throw FormatError("data", path.string() + ": no data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw FormatError("fmt ", path.string() + ": unsupported encoding (format " +
                                  std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }
  if (channels == 0 || rate == 0) throw FormatError("fmt ", path.string() + ": zero channels or rate");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  AudioClip clip;
  clip.rate = static_cast<int>(rate);
  clip.samples = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = data_offset + (f * channels + c) * width;
      acc += pcm16 ? read_le<std::int16_t>(bytes, at) / 32768.0 : double(read_le<float>(bytes, at));
    }
    clip.samples[static_cast<Eigen::Index>(f)] = acc / channels;
  }
  if (!clip.samples.allFinite()) throw FormatError("data", path.string() + ": non-finite samples");
  return clip;
}

SaveReport save_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
  if (clip.rate <= 0) throw std::invalid_argument("save_wav: rate must be positive");
  if (!clip.samples.allFinite()) throw std::invalid_argument("save_wav: non-finite samples");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  const bool pcm = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(clip.size() * block);

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.rate) * block);
  write_le<std::uint16_t>(out, block);
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);

  SaveReport report;
  for (Eigen::Index i = 0; i < clip.size(); ++i) {
    double x = clip.samples[i];
    if (x > 1.0 || x < -1.0) {
      x = std::clamp(x, -1.0, 1.0);
      ++report.clipped_samples;
    }
    if (pcm) {
      write_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(std::lround(x * 32768.0), -32768L, 32767L)));
    } else {
      write_le<float>(out, static_cast<float>(x));
    }
  }
  report.clipped = report.clipped_samples > 0;
  if (!out) throw IoError("write failed for " + path.string());
  return report;
}

AudioClip resample(const AudioClip& clip, int new_rate) {
  if (new_rate <= 0) throw std::invalid_argument("resample: new_rate must be positive");
  if (clip.rate <= 0) throw std::invalid_argument("resample: clip rate must be positive");
  if (new_rate == clip.rate) return clip;

  const long g = std::gcd(static_cast<long>(clip.rate), static_cast<long>(new_rate));
  const long up = new_rate / g;
  const long down = clip.rate / g;
  const double cutoff_hz = 0.9 * 0.5 * std::min(clip.rate, new_rate);
  const SincKernel kernel(cutoff_hz / clip.rate);
  const long taps = static_cast<long>(std::ceil(kernel.half_width()));

  const Eigen::Index in_len = clip.size();
  const auto out_len = static_cast<Eigen::Index>(std::llround(double(in_len) * new_rate / clip.rate));

  // coeff(p, j) = h(p/up - j) for tap offsets j in [-taps + 1, taps].
  const bool tabulate = up <= kMaxPhaseTable;
  Eigen::MatrixXd table;
  if (tabulate) {
    table.resize(2 * taps, up);
    for (long p = 0; p < up; ++p) {
      for (long j = -taps + 1; j <= taps; ++j) table(j + taps - 1, p) = kernel(double(p) / up - j);
    }
  }

  AudioClip out;
  out.rate = new_rate;
  out.samples = Eigen::VectorXd::Zero(out_len);
  for (Eigen::Index n = 0; n < out_len; ++n) {
    const long num = static_cast<long>(n) * down;
    const long base = num / up;
    const long phase = num % up;
    double acc = 0.0;
    const long lo = std::max(-taps + 1, -base);
    const long hi = std::min(taps, static_cast<long>(in_len) - 1 - base);
    for (long j = lo; j <= hi; ++j) {
      const double c = tabulate ? table(j + taps - 1, phase) : kernel(double(phase) / up - j);
      acc += c * clip.samples[base + j];
    }
    out.samples[n] = acc;
  }
  return out;
}

AudioClip make_lr(const AudioClip& hr, int source_rate) {
  if (source_rate <= 0 || source_rate >= hr.rate) {
    throw std::invalid_argument("make_lr: source rate " + std::to_string(source_rate) +
                                " must be positive and below the clip rate " + std::to_string(hr.rate));
  }
  AudioClip lr = resample(resample(hr, source_rate), hr.rate);
  const Eigen::Index len = hr.size();
  if (lr.size() != len) {
    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(len);
    const Eigen::Index keep = std::min(len, lr.size());
    fitted.head(keep) = lr.samples.head(keep);
    lr.samples = std::move(fitted);
  }
  return lr;
}

int default_n_fft(int rate) {
  if (rate <= 0) throw std::invalid_argument("default_n_fft: rate must be positive");
  const double exponent = std::round(std::log2(rate * 2048.0 / 44100.0));
  return 1 << static_cast<int>(std::max(4.0, exponent));
}

Spectrogram stft(const AudioClip& clip, int n_fft, int hop) {
  check_stft_geometry(n_fft, hop);
  const Eigen::Index len = clip.size();
  const Eigen::Index frames = 1 + len / hop;
  const int bins = n_fft / 2 + 1;
  const Eigen::VectorXd window = hann(n_fft);

  Spectrogram spec;
  spec.n_fft = n_fft;
  spec.hop = hop;
  spec.rate = clip.rate;
  spec.length = len;
  spec.bins.resize(bins, frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> out;
  for (Eigen::Index f = 0; f < frames; ++f) {
    const Eigen::Index start = f * hop - n_fft / 2;
    for (int i = 0; i < n_fft; ++i) {
      const Eigen::Index at = start + i;
      frame[i] = (at >= 0 && at < len) ? clip.samples[at] * window[i] : 0.0;
    }
    fft.fwd(out, frame);
    for (int k = 0; k < bins; ++k) spec.bins(k, f) = out[k];
  }
  return spec;
}

Spectrogram stft(const AudioClip& clip) {
  const int n_fft = default_n_fft(clip.rate);
  return stft(clip, n_fft, n_fft / 4);
}

AudioClip istft(const Spectrogram& spec) {
  check_stft_geometry(spec.n_fft, spec.hop);
  const int n_fft = spec.n_fft;
  if (spec.bins.rows() != n_fft / 2 + 1) throw std::invalid_argument("istft: bin count does not match n_fft");
  const Eigen::VectorXd window = hann(n_fft);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.length);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(spec.length);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(n_fft / 2 + 1);
  std::vector<double> frame;
  for (Eigen::Index f = 0; f < spec.bins.cols(); ++f) {
    for (int k = 0; k <= n_fft / 2; ++k) half[k] = spec.bins(k, f);
    fft.inv(frame, half, n_fft);
    const Eigen::Index start = f * spec.hop - n_fft / 2;
    for (int i = 0; i < n_fft; ++i) {
      const Eigen::Index at = start + i;
      if (at < 0 || at >= spec.length) continue;
      acc[at] += window[i] * frame[i];
      norm[at] += window[i] * window[i];
    }
  }
  AudioClip clip;
  clip.rate = spec.rate;
  clip.samples = Eigen::VectorXd::Zero(spec.length);
  for (Eigen::Index i = 0; i < spec.length; ++i) {
    if (norm[i] > 1e-12) clip.samples[i] = acc[i] / norm[i];
  }
  return clip;
}

Spectrogram replace_low_band_bins(const Spectrogram& generated, const Spectrogram& input,
                                  double cutoff_hz) {
  if (generated.bins.rows() != input.bins.rows() || generated.bins.cols() != input.bins.cols() ||
      generated.rate != input.rate || generated.n_fft != input.n_fft || generated.hop != input.hop) {
    throw std::invalid_argument("replace_low_band: spectrogram geometries differ");
  }
  Spectrogram out = generated;
  for (Eigen::Index k = 0; k < out.bins.rows(); ++k) {
    if (out.bin_frequency(k) <= cutoff_hz) out.bins.row(k) = input.bins.row(k);
  }
  return out;
}

AudioClip replace_low_band(const AudioClip& generated, const AudioClip& input_lr, double cutoff_hz) {
  if (generated.rate != input_lr.rate) {
    throw std::invalid_argument("replace_low_band: rates differ (" + std::to_string(generated.rate) +
                                " vs " + std::to_string(input_lr.rate) + ")");
  }
  if (generated.size() != input_lr.size()) {
    throw std::invalid_argument("replace_low_band: lengths differ (" + std::to_string(generated.size()) +
                                " vs " + std::to_string(input_lr.size()) + ")");
  }
  if (cutoff_hz <= 0.0 || cutoff_hz >= 0.5 * generated.rate) {
    throw std::invalid_argument("replace_low_band: cutoff must lie in (0, rate/2)");
  }
  return istft(replace_low_band_bins(stft(generated), stft(input_lr), cutoff_hz));
}

}  // namespace lfsr
