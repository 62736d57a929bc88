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


// Training pairs: a line-delimited manifest of HR files, seeded random crops
// with per-chunk LR construction, and a synthetic toy corpus.
//
// Manifest layout (manifest.jsonl):
//   {"target_rate": 8000, "source_rates": [2000]}        header line
//   {"path": "item_0000.wav", "duration_s": 4.0, "rate": 8000}
//   ...
// Paths are relative to the manifest's directory.

#pragma once

#include "lfsr/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lfsr {

/// Waveform samples per latent frame; chunk lengths must be multiples of it.
inline constexpr Eigen::Index kFrameSamples = 512;

struct ManifestEntry {
  std::string path;
  double duration_s = 0.0;
  int rate = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct PairManifest {
  int target_rate = 0;
  std::vector<int> source_rates;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory the entry paths are relative to

  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
  /// Rates consistent and every referenced file present.
  void validate() const;
  void write(const std::filesystem::path& file) const;
  static PairManifest read(const std::filesystem::path& file);
};

/// One deterministic toy item: harmonic notes (f0 80-800 Hz, 3-12 partials
/// spread up to 0.45x the rate), optional chirps and band-limited noise
/// bursts, peak-normalised to 0.8.
AudioClip synth_toy_item(std::uint64_t seed, std::uint64_t index, double duration_s, int rate);

/// Writes n_items WAV files plus manifest.jsonl into out_dir. Source rates
/// default to {rate / 4}.
PairManifest synth_toy_corpus(const std::filesystem::path& out_dir, std::uint64_t seed, int n_items,
                              double duration_s, int rate, std::vector<int> source_rates = {});

struct TrainingChunk {
  AudioClip hr;
  AudioClip lr;
  int source_rate = 0;
  std::size_t item = 0;
  Eigen::Index offset = 0;  // crop start in the HR file
};

/// Seeded random crops over a manifest. Each epoch visits every file
/// max(1, len / chunk_len) times in a seeded order; files shorter than a chunk
/// are zero-padded and visited once. Chunk (epoch, slot) is a pure function of
/// (seed, epoch, slot), so workers can split slots as slot % workers == worker.
class ChunkStream {
 public:
  ChunkStream(const PairManifest& manifest, int source_rate, Eigen::Index chunk_len, std::uint64_t seed,
              int worker = 0, int workers = 1);

  /// Slots per epoch across all workers.
  std::size_t epoch_size() const { return slot_items_.size(); }
  /// Slots handled by this worker in one epoch.
  std::size_t worker_epoch_size() const;
  TrainingChunk chunk(std::uint64_t epoch, std::size_t slot) const;
  /// The next chunk for this worker, advancing through epochs indefinitely.
  TrainingChunk next();
  std::uint64_t epoch() const { return epoch_; }
  Eigen::Index chunk_length() const { return chunk_len_; }

 private:
  std::vector<AudioClip> clips_;
  std::vector<std::size_t> slot_items_;  // item index per slot, before shuffling
  int source_rate_;
  Eigen::Index chunk_len_;
  std::uint64_t seed_;
  int worker_, workers_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;  // position within this worker's share of the epoch
};

}  // namespace lfsr
