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


#include "lfsr/discriminator.hpp"

#include "lfsr/config_util.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lfsr {

namespace {

constexpr ops::Conv2dGeometry kDownGeometry{5, 3, 2, 1, 2, 1};
constexpr ops::Conv2dGeometry kSameGeometry{3, 3, 1, 1, 1, 1};
constexpr int kStridedLayers = 3;

template <typename Scalar>
Index logit_count(const std::vector<LogitMap<Scalar>>& maps) {
  Index n = 0;
  for (const auto& m : maps) n += m.logits.cols();
  return n;
}

// mean over all pooled logits of max(0, 1 + sign * D)
template <typename Scalar>
ad::Var<Scalar> pooled_hinge(const std::vector<LogitMap<Scalar>>& maps, Scalar sign) {
  if (maps.empty()) throw std::invalid_argument("hinge loss: empty logit set");
  const Scalar weight = Scalar(1) / Scalar(logit_count(maps));
  ad::Var<Scalar> total;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    auto h = ops::relu(ops::add_scalar(ops::scale(maps[i].logits, sign), Scalar(1)));
    auto part = ops::scale(ops::sum(h), weight);
    total = i == 0 ? part : ops::add(total, part);
  }
  return total;
}

}  // namespace

void DiscriminatorConfig::validate() const {
  if (resolutions.empty()) throw std::invalid_argument("discriminator.resolutions: need at least one sub-critic");
  for (Index n : resolutions) {
    if (n < 16 || (n & (n - 1)) != 0) {
      throw std::invalid_argument("discriminator.resolutions: n_fft must be a power of two >= 16");
    }
  }
  if (channels < 1) throw std::invalid_argument("discriminator.channels: must be positive");
  if (slope < 0.0 || slope >= 1.0) throw std::invalid_argument("discriminator.slope: must be in [0, 1)");
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = nlohmann::json{{"resolutions", c.resolutions}, {"channels", c.channels}, {"slope", c.slope}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  config::KeyReader r(j, "discriminator");
  r.read("resolutions", c.resolutions);
  r.read("channels", c.channels);
  r.read("slope", c.slope);
  r.finish();
}

template <typename Scalar>
StftCritic<Scalar>::StftCritic(ParameterStore<Scalar>& store, const std::string& name, Index n_fft,
                               Index channels, double slope, Rng& rng)
    : n_fft_(n_fft), slope_(static_cast<Scalar>(slope)) {
  Index in = 2;
  for (int l = 0; l < kStridedLayers; ++l) {
    layers_.emplace_back(store, name + ".conv" + std::to_string(l), in, channels, kDownGeometry, rng);
    in = channels;
  }
  layers_.emplace_back(store, name + ".conv" + std::to_string(kStridedLayers), channels, channels,
                       kSameGeometry, rng);
  layers_.emplace_back(store, name + ".out", channels, 1, kSameGeometry, rng);
}

template <typename Scalar>
std::pair<Index, Index> StftCritic<Scalar>::output_shape(Index length) const {
  Index h = n_fft_ / 2 + 1;
  Index w = ops::stft_frames(length, n_fft_ / 4);
  for (const auto& layer : layers_) {
    h = layer.geometry().out_h(h);
    w = layer.geometry().out_w(w);
  }
  return {h, w};
}

template <typename Scalar>
LogitMap<Scalar> StftCritic<Scalar>::operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& wave) const {
  Index h = n_fft_ / 2 + 1;
  Index w = ops::stft_frames(wave.cols(), n_fft_ / 4);
  auto x = ops::stft(wave, n_fft_, n_fft_ / 4);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = layers_[l](tape, x, h, w);
    h = layers_[l].geometry().out_h(h);
    w = layers_[l].geometry().out_w(w);
    if (l + 1 < layers_.size()) x = ops::leaky_relu(x, slope_);
  }
  return LogitMap<Scalar>{x, h, w};
}

template <typename Scalar>
Discriminator<Scalar>::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParameterStore<Scalar>>()) {
  cfg_.validate();
  Rng rng(seed);
  for (std::size_t i = 0; i < cfg_.resolutions.size(); ++i) {
    critics_.emplace_back(*store_, "critic" + std::to_string(i), cfg_.resolutions[i], cfg_.channels, cfg_.slope,
                          rng);
  }
}

template <typename Scalar>
std::vector<LogitMap<Scalar>> Discriminator<Scalar>::operator()(ad::Tape<Scalar>& tape,
                                                               const ad::Var<Scalar>& wave) const {
  const Index longest = *std::max_element(cfg_.resolutions.begin(), cfg_.resolutions.end());
  if (wave.rows() != 1 || wave.cols() < longest) {
    throw std::invalid_argument("discriminator: waveform of " + std::to_string(wave.cols()) +
                                " samples is shorter than n_fft " + std::to_string(longest));
  }
  std::vector<LogitMap<Scalar>> out;
  for (const auto& c : critics_) out.push_back(c(tape, wave));
  return out;
}

template <typename Scalar>
ad::Var<Scalar> loss_g(const std::vector<LogitMap<Scalar>>& fake) {
  return pooled_hinge(fake, Scalar(-1));
}

template <typename Scalar>
ad::Var<Scalar> loss_d(const std::vector<LogitMap<Scalar>>& real, const std::vector<LogitMap<Scalar>>& fake) {
  if (real.size() != fake.size()) throw std::invalid_argument("loss_d: sub-critic counts differ");
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i].logits.cols() != fake[i].logits.cols() || real[i].logits.rows() != fake[i].logits.rows()) {
      throw std::invalid_argument("loss_d: logit map " + std::to_string(i) + " shapes differ");
    }
  }
  return ops::add(pooled_hinge(real, Scalar(-1)), pooled_hinge(fake, Scalar(1)));
}

template <typename Scalar>
ad::Var<Scalar> loss_r(const ad::Var<Scalar>& x, const ad::Var<Scalar>& x_tilde) {
  if (x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols()) {
    throw std::invalid_argument("loss_r: waveform shapes differ");
  }
  return ops::mean(ops::abs(ops::sub(x, x_tilde)));
}

#define LFSR_INSTANTIATE_DISCRIMINATOR(S)                                                               \
  template class StftCritic<S>;                                                                        \
  template class Discriminator<S>;                                                                     \
  template ad::Var<S> loss_g(const std::vector<LogitMap<S>>&);                                          \
  template ad::Var<S> loss_d(const std::vector<LogitMap<S>>&, const std::vector<LogitMap<S>>&);         \
  template ad::Var<S> loss_r(const ad::Var<S>&, const ad::Var<S>&);

LFSR_INSTANTIATE_DISCRIMINATOR(float)
LFSR_INSTANTIATE_DISCRIMINATOR(double)

#undef LFSR_INSTANTIATE_DISCRIMINATOR

}  // namespace lfsr
