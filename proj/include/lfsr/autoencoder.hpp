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

// Waveform autoencoder: 512x temporal compression into 64-channel latents.
//
// Encoder: conv(k7) -> 4 x [3 ResBlock1d, Snake, strided conv (k = 2*stride)]
//          -> Snake -> conv(k3) to latent channels -> per-frame LayerNorm.
// Decoder: conv(k7) -> 4 x [Snake, transposed conv (k = 2*stride), 3 ResBlock1d]
//          -> Snake -> conv(k7) -> tanh.
// Widths double per encoder stage (W, 2W, 4W, 8W, then 16W into the
// projection); the decoder mirrors them. All convolutions are weight-normed.

#pragma once

#include "lfsr/blocks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <vector>

namespace lfsr {

struct AutoencoderConfig {
  std::vector<Index> strides{2, 4, 8, 8};
  Index base_width = 32;
  Index latent_channels = 64;
  std::vector<Index> dilations{1, 3, 9};
  Index residual_kernel = 7;
  double noise_scale = 1.0;

  /// Waveform samples per latent frame (product of strides).
  Index hop() const;
  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

void to_json(nlohmann::json& j, const AutoencoderConfig& c);
/// Rejects unknown keys.
void from_json(const nlohmann::json& j, AutoencoderConfig& c);

template <typename Scalar>
using Latent = Matrix<Scalar>;  // channels x frames

template <typename Scalar>
struct Encoded {
  Latent<Scalar> latent;
  Index pad = 0;  // zeros appended to reach a multiple of the hop
};

template <typename Scalar>
class Encoder {
 public:
  Encoder(ParameterStore<Scalar>& store, const AutoencoderConfig& cfg, Rng& rng);
  ad::Var<Scalar> operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const;
  double macs(Index length) const;

 private:
  struct Stage {
    std::vector<nn::ResBlock1d<Scalar>> blocks;
    nn::Snake<Scalar> act;
    nn::Conv1d<Scalar> down;
  };
  nn::Conv1d<Scalar> entry_;
  std::vector<Stage> stages_;
  nn::Snake<Scalar> post_act_;
  nn::Conv1d<Scalar> post_conv_;
  nn::LayerNorm<Scalar> norm_;
};

template <typename Scalar>
class Decoder {
 public:
  Decoder(ParameterStore<Scalar>& store, const AutoencoderConfig& cfg, Rng& rng);
  ad::Var<Scalar> operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& latent) const;
  double macs(Index frames) const;

 private:
  struct Stage {
    nn::Snake<Scalar> act;
    nn::ConvTranspose1d<Scalar> up;
    std::vector<nn::ResBlock1d<Scalar>> blocks;
  };
  Index latent_channels_;
  nn::Conv1d<Scalar> entry_;
  std::vector<Stage> stages_;
  nn::Snake<Scalar> post_act_;
  nn::Conv1d<Scalar> post_conv_;
};

template <typename Scalar>
class Autoencoder {
 public:
  Autoencoder(const AutoencoderConfig& cfg, std::uint64_t seed);

  const AutoencoderConfig& config() const { return cfg_; }
  ParameterStore<Scalar>& parameters() { return *store_; }
  const ParameterStore<Scalar>& parameters() const { return *store_; }

  /// (1 x L) waveform with L a multiple of hop() -> (C x L/hop) latent.
  ad::Var<Scalar> encode(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const;
  /// (C x T) latent -> (1 x T*hop) waveform in (-1, 1).
  ad::Var<Scalar> decode(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& latent) const;

  /// Right-pads with zeros to a multiple of the hop. Throws on empty input.
  Encoded<Scalar> encode(const Eigen::VectorXd& samples) const;
  /// Throws std::invalid_argument on a wrong channel count.
  Eigen::VectorXd decode(const Latent<Scalar>& latent) const;

  double encoder_macs(Index length) const { return encoder_->macs(length); }
  double decoder_macs(Index frames) const { return decoder_->macs(frames); }

 private:
  AutoencoderConfig cfg_;
  std::unique_ptr<ParameterStore<Scalar>> store_;
  std::unique_ptr<Encoder<Scalar>> encoder_;
  std::unique_ptr<Decoder<Scalar>> decoder_;
};

/// Adds scale * N(0, I) noise to latents; active only during autoencoder training.
class NoiseInjector {
 public:
  NoiseInjector(double scale, std::uint64_t seed);
  double scale() const { return scale_; }

  /// Fresh draw per call; the input is not modified.
  template <typename Scalar>
  Latent<Scalar> operator()(const Latent<Scalar>& latent);
  /// The noise term alone (scale * delta), for use on a tape.
  template <typename Scalar>
  Latent<Scalar> draw(Index rows, Index cols);

 private:
  double scale_;
  Rng rng_;
};

}  // namespace lfsr
