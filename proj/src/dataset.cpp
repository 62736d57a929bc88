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


#include "lfsr/dataset.hpp"

#include "lfsr/errors.hpp"

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lfsr {

namespace {

using Rng = std::mt19937_64;

Rng seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Attack-decay envelope over [start, start + len).
double envelope(Eigen::Index i, Eigen::Index len, double attack, double decay_rate, int rate) {
  const double t = double(i) / rate;
  const double a = std::min(1.0, t / attack);
  const double tail = std::min(1.0, double(len - i) / (0.01 * rate));
  return a * std::exp(-decay_rate * t) * std::max(0.0, tail);
}

void add_note(Eigen::VectorXd& out, Eigen::Index start, Eigen::Index len, int rate, Rng& rng) {
  const double f0 = std::exp(uniform(rng, std::log(80.0), std::log(800.0)));
  const int max_harmonic = static_cast<int>(std::floor(0.45 * rate / f0));
  const int partials = std::min(uniform_int(rng, 3, 12), max_harmonic);
  std::vector<int> harmonics;
  for (int j = 0; j < partials; ++j) {
    const double h = partials == 1 ? 1.0 : 1.0 + double(j) * (max_harmonic - 1) / double(partials - 1);
    harmonics.push_back(static_cast<int>(std::lround(h)));
  }
  harmonics.erase(std::unique(harmonics.begin(), harmonics.end()), harmonics.end());
  const double attack = uniform(rng, 0.005, 0.05);
  const double decay = uniform(rng, 0.2, 3.0);
  const double gain = uniform(rng, 0.4, 1.0);
  for (int h : harmonics) {
    const double amp = uniform(rng, 0.3, 1.0);
    const double phase = uniform(rng, 0.0, kTwoPi);
    const double f = f0 * h;
    for (Eigen::Index i = 0; i < len && start + i < out.size(); ++i) {
      out[start + i] += gain * amp * envelope(i, len, attack, decay, rate) *
                        std::sin(kTwoPi * f * double(i) / rate + phase);
    }
  }
}

void add_chirp(Eigen::VectorXd& out, int rate, Rng& rng) {
  const Eigen::Index len = out.size();
  const Eigen::Index seg = std::min<Eigen::Index>(len, static_cast<Eigen::Index>(uniform(rng, 0.3, 1.2) * rate));
  const Eigen::Index start = len > seg ? uniform_int(rng, 0, static_cast<int>(len - seg)) : 0;
  const double f_a = uniform(rng, 100.0, 0.45 * rate);
  const double f_b = uniform(rng, 100.0, 0.45 * rate);
  const double amp = uniform(rng, 0.2, 0.6);
  const double dur = double(seg) / rate;
  for (Eigen::Index i = 0; i < seg; ++i) {
    const double t = double(i) / rate;
    const double phase = kTwoPi * (f_a * t + 0.5 * (f_b - f_a) * t * t / dur);
    const double w = std::sin(std::numbers::pi * double(i) / double(seg));
    out[start + i] += amp * w * std::sin(phase);
  }
}

void add_noise_burst(Eigen::VectorXd& out, int rate, Rng& rng) {
  const Eigen::Index len = out.size();
  Eigen::Index n = 1;
  while (n < std::min<Eigen::Index>(len, static_cast<Eigen::Index>(uniform(rng, 0.1, 0.5) * rate))) n *= 2;
  n = std::min(n, len);
  const Eigen::Index start = len > n ? uniform_int(rng, 0, static_cast<int>(len - n)) : 0;
  const double lo = uniform(rng, 0.125, 0.35) * rate;
  const double hi = std::min(0.49 * rate, lo + uniform(rng, 0.05, 0.2) * rate);
  const double amp = uniform(rng, 0.1, 0.4);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(static_cast<std::size_t>(n));
  for (auto& w : white) w = normal(rng);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = double(k) * rate / double(n);
    if (f < lo || f > hi) spec[k] = 0.0;
  }
  std::vector<double> band;
  fft.inv(band, spec, static_cast<std::size_t>(n));
  double rms = 0.0;
  for (double b : band) rms += b * b;
  rms = std::sqrt(rms / double(n)) + 1e-12;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = std::sin(std::numbers::pi * double(i) / double(n));
    out[start + i] += amp * w * w * band[static_cast<std::size_t>(i)] / rms;
  }
}

std::filesystem::path manifest_file(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) ? p / "manifest.jsonl" : p;
}

}  // namespace

void PairManifest::validate() const {
  if (target_rate <= 0) throw std::invalid_argument("manifest: target_rate must be positive");
  if (source_rates.empty()) throw std::invalid_argument("manifest: no source rates");
  for (int s : source_rates) {
    if (s <= 0 || s >= target_rate) {
      throw std::invalid_argument("manifest: source rate " + std::to_string(s) + " must be in (0, target_rate)");
    }
  }
  for (const auto& e : entries) {
    if (!std::filesystem::exists(resolve(e))) throw IoError("manifest: missing file " + resolve(e).string());
  }
}

void PairManifest::write(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + file.string());
  out << nlohmann::json{{"target_rate", target_rate}, {"source_rates", source_rates}}.dump() << "\n";
  for (const auto& e : entries) {
    out << nlohmann::json{{"path", e.path}, {"duration_s", e.duration_s}, {"rate", e.rate}}.dump() << "\n";
  }
  if (!out) throw IoError("write failed for manifest " + file.string());
}

PairManifest PairManifest::read(const std::filesystem::path& path) {
  const auto file = manifest_file(path);
  std::ifstream in(file);
  if (!in) throw IoError("cannot open manifest " + file.string());
  PairManifest m;
  m.root = file.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!header) {
        m.target_rate = j.at("target_rate").get<int>();
        m.source_rates = j.at("source_rates").get<std::vector<int>>();
        header = true;
      } else {
        m.entries.push_back(
            ManifestEntry{j.at("path").get<std::string>(), j.at("duration_s").get<double>(), j.at("rate").get<int>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(line_no), file.string() + ": " + e.what());
    }
  }
  if (!header) throw FormatError("header", file.string() + ": empty manifest");
  return m;
}

AudioClip synth_toy_item(std::uint64_t seed, std::uint64_t index, double duration_s, int rate) {
  if (duration_s <= 0.0) throw std::invalid_argument("synth: duration must be positive");
  Rng rng = seeded({seed, index});
  const auto len = static_cast<Eigen::Index>(std::llround(duration_s * rate));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(len);

  Eigen::Index pos = 0;
  while (pos < len) {
    const auto note = static_cast<Eigen::Index>(uniform(rng, 0.25, 1.0) * rate);
    const int voices = uniform_int(rng, 1, 2);
    for (int v = 0; v < voices; ++v) add_note(x, pos, note, rate, rng);
    pos += note;
  }
  if (uniform(rng, 0.0, 1.0) < 0.5) add_chirp(x, rate, rng);
  if (uniform(rng, 0.0, 1.0) < 0.5) add_noise_burst(x, rate, rng);

  const double peak = x.cwiseAbs().maxCoeff();
  if (peak > 0.0) x *= 0.8 / peak;
  return AudioClip{std::move(x), rate};
}

PairManifest synth_toy_corpus(const std::filesystem::path& out_dir, std::uint64_t seed, int n_items,
                              double duration_s, int rate, std::vector<int> source_rates) {
  if (n_items < 1) throw std::invalid_argument("synth: n_items must be >= 1");
  if (rate != 8000 && rate != 16000 && rate != 44100) {
    throw std::invalid_argument("synth: rate must be one of 8000, 16000, 44100");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create " + out_dir.string());

  PairManifest m;
  m.target_rate = rate;
  m.source_rates = source_rates.empty() ? std::vector<int>{rate / 4} : std::move(source_rates);
  m.root = out_dir;
  for (int i = 0; i < n_items; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "item_%04d.wav", i);
    const AudioClip clip = synth_toy_item(seed, static_cast<std::uint64_t>(i), duration_s, rate);
    save_wav(clip, out_dir / name, WavEncoding::float32);
    m.entries.push_back(ManifestEntry{name, clip.duration(), rate});
  }
  m.validate();
  m.write(out_dir / "manifest.jsonl");
  return m;
}

ChunkStream::ChunkStream(const PairManifest& manifest, int source_rate, Eigen::Index chunk_len,
                         std::uint64_t seed, int worker, int workers)
    : source_rate_(source_rate), chunk_len_(chunk_len), seed_(seed), worker_(worker), workers_(workers) {
  if (chunk_len <= 0 || chunk_len % kFrameSamples != 0) {
    throw std::invalid_argument("chunk_len must be a positive multiple of " + std::to_string(kFrameSamples));
  }
  if (workers < 1 || worker < 0 || worker >= workers) throw std::invalid_argument("invalid worker partition");
  if (source_rate <= 0 || source_rate >= manifest.target_rate) {
    throw std::invalid_argument("source rate must be in (0, target_rate)");
  }
  if (manifest.entries.empty()) throw std::invalid_argument("manifest has no entries");
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    AudioClip clip = load_wav(manifest.resolve(manifest.entries[i]));
    if (clip.rate != manifest.target_rate) clip = resample(clip, manifest.target_rate);
    const Eigen::Index visits = std::max<Eigen::Index>(1, clip.size() / chunk_len);
    for (Eigen::Index v = 0; v < visits; ++v) slot_items_.push_back(i);
    clips_.push_back(std::move(clip));
  }
}

std::size_t ChunkStream::worker_epoch_size() const {
  const std::size_t n = slot_items_.size();
  const auto w = static_cast<std::size_t>(worker_);
  return n > w ? (n - w + workers_ - 1) / workers_ : 0;
}

TrainingChunk ChunkStream::chunk(std::uint64_t epoch, std::size_t slot) const {
  if (slot >= slot_items_.size()) throw std::out_of_range("chunk slot out of range");
  std::vector<std::size_t> order = slot_items_;
  Rng perm = seeded({seed_, epoch});
  std::shuffle(order.begin(), order.end(), perm);

  TrainingChunk c;
  c.item = order[slot];
  c.source_rate = source_rate_;
  const AudioClip& clip = clips_[c.item];
  Rng crop = seeded({seed_, epoch, slot + 1});
  const Eigen::Index slack = clip.size() - chunk_len_;
  c.offset = slack > 0 ? std::uniform_int_distribution<Eigen::Index>(0, slack)(crop) : 0;

  c.hr.rate = clip.rate;
  c.hr.samples = Eigen::VectorXd::Zero(chunk_len_);
  const Eigen::Index keep = std::min(chunk_len_, clip.size() - c.offset);
  c.hr.samples.head(keep) = clip.samples.segment(c.offset, keep);
  c.lr = make_lr(c.hr, source_rate_);
  return c;
}

TrainingChunk ChunkStream::next() {
  if (cursor_ >= worker_epoch_size()) {
    cursor_ = 0;
    ++epoch_;
  }
  const std::size_t slot = static_cast<std::size_t>(worker_) + cursor_ * static_cast<std::size_t>(workers_);
  ++cursor_;
  return chunk(epoch_, slot);
}

}  // namespace lfsr
