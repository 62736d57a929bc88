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

// The nested run configuration shared by the trainers and the command line.

#pragma once

#include "lfsr/autoencoder.hpp"
#include "lfsr/discriminator.hpp"
#include "lfsr/optimizer.hpp"
#include "lfsr/velocity_net.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace lfsr {

struct DataConfig {
  std::string manifest;  // manifest file or corpus directory
  int source_rate = 0;   // 0 picks the manifest's first source rate
  int workers = 1;
};

/// Shared by both training stages.
struct StageConfig {
  long steps = 0;
  int batch = 16;
  Index chunk_len = 16384;
  std::uint64_t seed = 0;
  long log_every = 10;
  long checkpoint_every = 1000;  // 0 writes only the final checkpoint
  OptimizerConfig optimizer;
};

struct AeStageConfig : StageConfig {
  AeStageConfig() { steps = 5000; }
};

struct CfmStageConfig : StageConfig {
  CfmStageConfig() { steps = 20000; }
  /// Distinct epochs whose latents are cached in memory; 0 encodes on the fly.
  long cache_epochs = 0;
};

struct EvalConfig {
  Index n_fft = 0;  // 0 picks the rate default
  Index hop = 0;    // 0 means n_fft / 4
  double eps = 1e-10;
  int n_steps = 1;
  std::uint64_t seed = 0;
};

struct RunConfig {
  DataConfig data;
  AutoencoderConfig ae;
  DiscriminatorConfig discriminator;
  VelocityNetConfig vnet;
  CfmStageConfig cfm;
  AeStageConfig train;
  EvalConfig eval;

  /// Collects every invalid value into one config::ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Strict: unknown keys anywhere raise config::ConfigError listing every dotted path.
void from_json(const nlohmann::json& j, RunConfig& c);

/// Parses, reads and validates a JSON config file. IoError if unreadable.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lfsr
