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

#include "lfsr/autoencoder.hpp"

#include "lfsr/config_util.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace lfsr {

namespace {

ops::Conv1dGeometry strided(Index stride) {
  return ops::Conv1dGeometry{2 * stride, stride, 1, (stride + 1) / 2, 0};
}

ops::Conv1dGeometry transposed(Index stride) {
  return ops::Conv1dGeometry{2 * stride, stride, 1, (stride + 1) / 2, stride % 2};
}

ops::Conv1dGeometry same(Index kernel) { return ops::Conv1dGeometry{kernel, 1, 1, kernel / 2, 0}; }

}  // namespace

Index AutoencoderConfig::hop() const {
  return std::accumulate(strides.begin(), strides.end(), Index{1}, std::multiplies<>());
}

void AutoencoderConfig::validate() const {
  if (strides.empty()) throw std::invalid_argument("ae.strides: must not be empty");
  for (Index s : strides) {
    if (s < 1) throw std::invalid_argument("ae.strides: entries must be positive");
  }
  if (base_width < 8 || base_width % 8 != 0) {
    throw std::invalid_argument("ae.base_width: must be a positive multiple of 8");
  }
  if (latent_channels < 1) throw std::invalid_argument("ae.latent_channels: must be positive");
  if (dilations.empty()) throw std::invalid_argument("ae.dilations: must not be empty");
  if (residual_kernel < 1 || residual_kernel % 2 == 0) {
    throw std::invalid_argument("ae.residual_kernel: must be odd");
  }
  if (noise_scale < 0) throw std::invalid_argument("ae.noise_scale: must be >= 0");
}

void to_json(nlohmann::json& j, const AutoencoderConfig& c) {
  j = nlohmann::json{{"strides", c.strides},
                     {"base_width", c.base_width},
                     {"latent_channels", c.latent_channels},
                     {"dilations", c.dilations},
                     {"residual_kernel", c.residual_kernel},
                     {"noise_scale", c.noise_scale}};
}

void from_json(const nlohmann::json& j, AutoencoderConfig& c) {
  config::KeyReader r(j, "ae");
  r.read("strides", c.strides);
  r.read("base_width", c.base_width);
  r.read("latent_channels", c.latent_channels);
  r.read("dilations", c.dilations);
  r.read("residual_kernel", c.residual_kernel);
  r.read("noise_scale", c.noise_scale);
  r.finish();
}

template <typename Scalar>
Encoder<Scalar>::Encoder(ParameterStore<Scalar>& store, const AutoencoderConfig& cfg, Rng& rng)
    : entry_(store, "encoder.entry", 1, cfg.base_width, same(7), true, rng),
      post_act_(store, "encoder.post.act", cfg.base_width << cfg.strides.size()),
      post_conv_(store, "encoder.post.conv", cfg.base_width << cfg.strides.size(),
                 cfg.latent_channels, same(3), true, rng),
      norm_(store, "encoder.norm", cfg.latent_channels, 1e-8) {
  Index width = cfg.base_width;
  for (std::size_t s = 0; s < cfg.strides.size(); ++s) {
    const std::string name = "encoder.stage" + std::to_string(s);
    std::vector<nn::ResBlock1d<Scalar>> blocks;
    for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
      blocks.emplace_back(store, name + ".res" + std::to_string(b), width, cfg.dilations[b],
                          cfg.residual_kernel, rng);
    }
    stages_.push_back(Stage{std::move(blocks), nn::Snake<Scalar>(store, name + ".act", width),
                            nn::Conv1d<Scalar>(store, name + ".down", width, 2 * width,
                                               strided(cfg.strides[s]), true, rng)});
    width *= 2;
  }
}

template <typename Scalar>
ad::Var<Scalar> Encoder<Scalar>::operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const {
  auto h = entry_(tape, wave);
  for (const auto& stage : stages_) {
    for (const auto& block : stage.blocks) h = block(tape, h);
    h = stage.down(tape, stage.act(tape, h));
  }
  h = post_conv_(tape, post_act_(tape, h));
  return norm_(tape, h);
}

template <typename Scalar>
double Encoder<Scalar>::macs(Index length) const {
  double total = entry_.macs(length);
  Index len = length;
  for (const auto& stage : stages_) {
    for (const auto& block : stage.blocks) total += block.macs(len);
    total += stage.down.macs(len);
    len = stage.down.out_length(len);
  }
  return total + post_conv_.macs(len);
}

template <typename Scalar>
Decoder<Scalar>::Decoder(ParameterStore<Scalar>& store, const AutoencoderConfig& cfg, Rng& rng)
    : latent_channels_(cfg.latent_channels),
      entry_(store, "decoder.entry", cfg.latent_channels, cfg.base_width << cfg.strides.size(),
             same(7), true, rng),
      post_act_(store, "decoder.post.act", cfg.base_width),
      post_conv_(store, "decoder.post.conv", cfg.base_width, 1, same(7), true, rng) {
  Index width = cfg.base_width << cfg.strides.size();
  for (std::size_t s = 0; s < cfg.strides.size(); ++s) {
    const Index stride = cfg.strides[cfg.strides.size() - 1 - s];
    const std::string name = "decoder.stage" + std::to_string(s);
    nn::Snake<Scalar> act(store, name + ".act", width);
    nn::ConvTranspose1d<Scalar> up(store, name + ".up", width, width / 2, transposed(stride), true, rng);
    width /= 2;
    std::vector<nn::ResBlock1d<Scalar>> blocks;
    for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
      blocks.emplace_back(store, name + ".res" + std::to_string(b), width, cfg.dilations[b],
                          cfg.residual_kernel, rng);
    }
    stages_.push_back(Stage{std::move(act), std::move(up), std::move(blocks)});
  }
}

template <typename Scalar>
ad::Var<Scalar> Decoder<Scalar>::operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& latent) const {
  if (latent.rows() != latent_channels_) {
    throw std::invalid_argument("decode: expected " + std::to_string(latent_channels_) +
                                " latent channels, got " + std::to_string(latent.rows()));
  }
  auto h = entry_(tape, latent);
  for (const auto& stage : stages_) {
    h = stage.up(tape, stage.act(tape, h));
    for (const auto& block : stage.blocks) h = block(tape, h);
  }
  return ops::tanh(post_conv_(tape, post_act_(tape, h)));
}

template <typename Scalar>
double Decoder<Scalar>::macs(Index frames) const {
  double total = entry_.macs(frames);
  Index len = frames;
  for (const auto& stage : stages_) {
    total += stage.up.macs(len);
    len = stage.up.out_length(len);
    for (const auto& block : stage.blocks) total += block.macs(len);
  }
  return total + post_conv_.macs(len);
}

template <typename Scalar>
Autoencoder<Scalar>::Autoencoder(const AutoencoderConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParameterStore<Scalar>>()) {
  cfg_.validate();
  Rng rng(seed);
  encoder_ = std::make_unique<Encoder<Scalar>>(*store_, cfg_, rng);
  decoder_ = std::make_unique<Decoder<Scalar>>(*store_, cfg_, rng);
}

template <typename Scalar>
ad::Var<Scalar> Autoencoder<Scalar>::encode(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const {
  if (wave.rows() != 1 || wave.cols() == 0 || wave.cols() % cfg_.hop() != 0) {
    throw std::invalid_argument("encode: expected a (1 x L) waveform with L a multiple of " +
                                std::to_string(cfg_.hop()));
  }
  return (*encoder_)(tape, wave);
}

template <typename Scalar>
ad::Var<Scalar> Autoencoder<Scalar>::decode(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& latent) const {
  return (*decoder_)(tape, latent);
}

template <typename Scalar>
Encoded<Scalar> Autoencoder<Scalar>::encode(const Eigen::VectorXd& samples) const {
  if (samples.size() == 0) throw std::invalid_argument("encode: empty input");
  const Index hop = cfg_.hop();
  const Index padded = (samples.size() + hop - 1) / hop * hop;
  Matrix<Scalar> wave = Matrix<Scalar>::Zero(1, padded);
  wave.leftCols(samples.size()) = samples.transpose().cast<Scalar>();
  ad::Tape<Scalar> tape(false);
  auto latent = encode(tape, tape.constant(std::move(wave)));
  return Encoded<Scalar>{latent.value(), padded - samples.size()};
}

template <typename Scalar>
Eigen::VectorXd Autoencoder<Scalar>::decode(const Latent<Scalar>& latent) const {
  ad::Tape<Scalar> tape(false);
  auto wave = decode(tape, tape.constant(latent));
  return wave.value().row(0).transpose().template cast<double>();
}

NoiseInjector::NoiseInjector(double scale, std::uint64_t seed) : scale_(scale), rng_(seed) {
  if (scale < 0) throw std::invalid_argument("noise scale must be >= 0");
}

template <typename Scalar>
Latent<Scalar> NoiseInjector::draw(Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Latent<Scalar> noise(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) noise(i, j) = static_cast<Scalar>(scale_ * normal(rng_));
  }
  return noise;
}

template <typename Scalar>
Latent<Scalar> NoiseInjector::operator()(const Latent<Scalar>& latent) {
  if (scale_ == 0.0) return latent;
  return latent + draw<Scalar>(latent.rows(), latent.cols());
}

template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class Autoencoder<float>;
template class Autoencoder<double>;
template Latent<float> NoiseInjector::draw<float>(Index, Index);
template Latent<double> NoiseInjector::draw<double>(Index, Index);
template Latent<float> NoiseInjector::operator()<float>(const Latent<float>&);
template Latent<double> NoiseInjector::operator()<double>(const Latent<double>&);

}  // namespace lfsr
