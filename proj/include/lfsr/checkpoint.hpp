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

// Checkpoint directories: manifest.json (format_version, module, config echo,
// array directory, rng state, step) next to payload.bin (little-endian float32).

#pragma once

#include "lfsr/blocks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace lfsr {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string module;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, Eigen::MatrixXf> arrays;
  std::string rng_state;
  long step = 0;

  /// Copies every parameter as "<prefix><name>".
  template <typename Scalar>
  void put(const std::string& prefix, const ParameterStore<Scalar>& store);
  /// Inverse of put. Missing arrays or shape mismatches raise config::ConfigError.
  template <typename Scalar>
  void get(const std::string& prefix, ParameterStore<Scalar>& store) const;
};

/// Writes payload.bin then manifest.json into `dir` (created if needed).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// IoError when files are missing, UnsupportedVersionError on a foreign
/// format_version, IntegrityError when an array falls outside the payload or
/// fails its checksum.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace lfsr
