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

// Two-stage training.
//
// Stage 1 (AeTrainer): per batch, one discriminator step on L_D followed by
// one generator step on L_G + L_R, with noise injected on the decoder input.
// Stage 2 (CfmTrainer): the autoencoder is frozen; HR and LR chunks are
// encoded noise-free and the velocity net minimises the flow-matching loss.
//
// Sample s of a run is chunk (s / epoch_size, s % epoch_size) of the stream,
// so a run resumed from a checkpoint sees exactly the data it would have seen.

#pragma once

#include "lfsr/autoencoder.hpp"
#include "lfsr/checkpoint.hpp"
#include "lfsr/dataset.hpp"
#include "lfsr/discriminator.hpp"
#include "lfsr/optimizer.hpp"
#include "lfsr/run_config.hpp"
#include "lfsr/velocity_net.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>

namespace lfsr {

/// lr for the step following `completed_steps` finished steps.
double lr_at_step(const OptimizerConfig& opt, long completed_steps, int batch, std::size_t epoch_size);

class AeTrainer {
 public:
  AeTrainer(const PairManifest& manifest, const RunConfig& cfg);

  /// Parameters, optimizer moments, rng and step counter from an AE checkpoint.
  void restore(const Checkpoint& ckpt);
  /// One D-then-G batch. Returns {step, l_d, l_g, l_r, l_gen, lr, phases, wall_ms};
  /// phases lists the updates in the order they ran.
  /// Throws NumericError when a loss is non-finite, after rolling the trainer back.
  nlohmann::json step();
  Checkpoint checkpoint() const;

  long steps_done() const { return step_; }
  double current_lr() const;
  std::size_t epoch_size() const { return stream_.epoch_size(); }
  Autoencoder<float>& autoencoder() { return ae_; }
  Discriminator<float>& discriminator() { return disc_; }

 private:
  std::vector<TrainingChunk> batch_chunks() const;
  nlohmann::json step_impl();

  RunConfig cfg_;
  int source_rate_;
  int target_rate_;
  ChunkStream stream_;
  Autoencoder<float> ae_;
  Discriminator<float> disc_;
  AdamW<float> opt_g_, opt_d_;
  std::mt19937_64 rng_;
  long step_ = 0;
};

class CfmTrainer {
 public:
  /// Throws config::ConfigError when the AE checkpoint does not fit cfg.ae.
  CfmTrainer(const PairManifest& manifest, const Checkpoint& ae_ckpt, const RunConfig& cfg);

  void restore(const Checkpoint& ckpt);
  /// Returns {step, l_cfm, lr, wall_ms}.
  nlohmann::json step();
  Checkpoint checkpoint() const;

  long steps_done() const { return step_; }
  double current_lr() const;
  std::size_t epoch_size() const { return stream_.epoch_size(); }
  const Autoencoder<float>& autoencoder() const { return ae_; }
  VelocityNet<float>& velocity_net() { return net_; }

  struct LatentPair {
    Latent<float> hr, lr;
  };
  /// Noise-free latents of training sample s (cached when cache_epochs > 0).
  LatentPair latents(std::uint64_t sample);

 private:
  RunConfig cfg_;
  int source_rate_;
  int target_rate_;
  ChunkStream stream_;
  Autoencoder<float> ae_;
  std::uint64_t ae_fingerprint_;
  VelocityNet<float> net_;
  AdamW<float> opt_;
  std::mt19937_64 rng_;
  long step_ = 0;
  std::map<std::uint64_t, LatentPair> cache_;
};

/// AE or velocity-net weights alone, for inference.
Autoencoder<float> load_autoencoder(const Checkpoint& ckpt);
VelocityNet<float> load_velocity_net(const Checkpoint& ckpt);

struct RunOptions {
  std::filesystem::path out_dir;  // receives checkpoint/ and train_log.jsonl
  long total_steps = -1;          // -1 uses the stage config
  long log_every = -1;            // -1 uses the stage config
  long checkpoint_every = -1;     // -1 uses the stage config
  std::function<void(const nlohmann::json&)> on_log;
};

/// Steps `trainer` until total_steps, appending log records and writing
/// periodic checkpoints to out_dir/checkpoint. A NumericError propagates with
/// the last good checkpoint left on disk.
template <typename Trainer>
Checkpoint run_training(Trainer& trainer, const StageConfig& stage, const RunOptions& opts);

}  // namespace lfsr
