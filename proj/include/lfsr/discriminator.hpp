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


// Multi-resolution complex-STFT critic and the adversarial/reconstruction
// losses of autoencoder training:
//   L_G = mean max(0, 1 - D(x~))
//   L_D = mean max(0, 1 - D(x)) + mean max(0, 1 + D(x~))
//   L_R = mean |x - x~|
// Means run over every logit of every sub-critic pooled together.

#pragma once

#include "lfsr/blocks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <vector>

namespace lfsr {

struct DiscriminatorConfig {
  std::vector<Index> resolutions{512, 256, 128};  // n_fft per sub-critic; hop = n_fft / 4
  Index channels = 8;
  double slope = 0.2;

  void validate() const;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// Logit map of one sub-critic together with its spatial shape.
template <typename Scalar>
struct LogitMap {
  ad::Var<Scalar> logits;  // (1 x height*width)
  Index height = 0;
  Index width = 0;
};

/// Conv2d stack over (re, im) x (bins x frames):
///   3 x [conv (5,3) stride (2,1) pad (2,1) -> LeakyReLU]
///   conv 3x3 -> LeakyReLU -> conv 3x3 to one channel.
template <typename Scalar>
class StftCritic {
 public:
  StftCritic(ParameterStore<Scalar>& store, const std::string& name, Index n_fft, Index channels,
             double slope, Rng& rng);
  LogitMap<Scalar> operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const;
  Index n_fft() const { return n_fft_; }
  /// Logit-map (height, width) for a waveform of `length` samples.
  std::pair<Index, Index> output_shape(Index length) const;

 private:
  Index n_fft_;
  Scalar slope_;
  std::vector<nn::Conv2d<Scalar>> layers_;
};

template <typename Scalar>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return cfg_; }
  ParameterStore<Scalar>& parameters() { return *store_; }
  const ParameterStore<Scalar>& parameters() const { return *store_; }
  const std::vector<StftCritic<Scalar>>& critics() const { return critics_; }

  /// One logit map per sub-critic. Throws if the waveform is shorter than the largest n_fft.
  std::vector<LogitMap<Scalar>> operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const;

 private:
  DiscriminatorConfig cfg_;
  std::unique_ptr<ParameterStore<Scalar>> store_;
  std::vector<StftCritic<Scalar>> critics_;
};

template <typename Scalar>
ad::Var<Scalar> loss_g(const std::vector<LogitMap<Scalar>>& fake);
/// Throws std::invalid_argument if the logit sets differ in shape.
template <typename Scalar>
ad::Var<Scalar> loss_d(const std::vector<LogitMap<Scalar>>& real, const std::vector<LogitMap<Scalar>>& fake);
/// Throws std::invalid_argument on a length mismatch.
template <typename Scalar>
ad::Var<Scalar> loss_r(const ad::Var<Scalar>& x, const ad::Var<Scalar>& x_tilde);

}  // namespace lfsr
