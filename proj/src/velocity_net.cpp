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


#include "lfsr/velocity_net.hpp"

#include "lfsr/config_util.hpp"

#include <stdexcept>
#include <string>

namespace lfsr {

namespace {

constexpr ops::Conv1dGeometry kSame3{3, 1, 1, 1, 0};
constexpr ops::Conv1dGeometry kPointwise{1, 1, 1, 0, 0};
constexpr ops::Conv1dGeometry kDown{3, 2, 1, 1, 0};
constexpr ops::Conv1dGeometry kUp{4, 2, 1, 1, 0};
constexpr Index kFrameMultiple = 4;

// Reflection padding on the right; a single frame has nothing to reflect and is zero-padded.
template <typename Scalar>
ad::Var<Scalar> pad_frames(const ad::Var<Scalar>& x, Index extra) {
  ad::Var<Scalar> out = x;
  while (extra > 0) {
    if (out.cols() == 1) return ops::zero_pad_right(out, extra);
    const Index step = std::min(extra, out.cols() - 1);
    out = ops::reflect_pad_right(out, step);
    extra -= step;
  }
  return out;
}

}  // namespace

void VelocityNetConfig::validate() const {
  if (latent_channels < 1) throw std::invalid_argument("vnet.latent_channels: must be positive");
  if (base_width < 8 || base_width % 8 != 0) {
    throw std::invalid_argument("vnet.base_width: must be a positive multiple of 8");
  }
  if (heads < 1 || base_width % heads != 0) {
    throw std::invalid_argument("vnet.heads: must divide base_width");
  }
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw std::invalid_argument("vnet.time_embed_dim: must be even and >= 2");
  }
}

void to_json(nlohmann::json& j, const VelocityNetConfig& c) {
  j = nlohmann::json{{"latent_channels", c.latent_channels},
                     {"base_width", c.base_width},
                     {"heads", c.heads},
                     {"time_embed_dim", c.time_embed_dim}};
}

void from_json(const nlohmann::json& j, VelocityNetConfig& c) {
  config::KeyReader r(j, "vnet");
  r.read("latent_channels", c.latent_channels);
  r.read("base_width", c.base_width);
  r.read("heads", c.heads);
  r.read("time_embed_dim", c.time_embed_dim);
  r.finish();
}

template <typename Scalar>
VelocityNet<Scalar>::VelocityNet(const VelocityNetConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParameterStore<Scalar>>()) {
  cfg_.validate();
  Rng rng(seed);
  auto& s = *store_;
  const Index c = cfg_.latent_channels, w = cfg_.base_width, td = cfg_.time_embed_dim, h = cfg_.heads;
  time_ = std::make_unique<nn::TimeEmbedding<Scalar>>(s, "time", td, rng);
  entry_ = std::make_unique<nn::Conv1d<Scalar>>(s, "entry", 2 * c, w, kSame3, false, rng);

  const Index down_in[2] = {w, w}, down_out[2] = {w, 2 * w};
  for (int i = 0; i < 2; ++i) {
    const std::string n = "down" + std::to_string(i);
    down_.push_back(Stage{nn::UNetResBlock<Scalar>(s, n + ".res", down_in[i], down_out[i], td, rng),
                          nn::TransformerBlock<Scalar>(s, n + ".attn", down_out[i], h, rng)});
    down_convs_.emplace_back(s, n + ".down", down_out[i], down_out[i], kDown, false, rng);
  }
  for (int i = 0; i < 2; ++i) {
    const std::string n = "mid" + std::to_string(i);
    middle_.push_back(Stage{nn::UNetResBlock<Scalar>(s, n + ".res", 2 * w, 2 * w, td, rng),
                            nn::TransformerBlock<Scalar>(s, n + ".attn", 2 * w, h, rng)});
  }
  const Index up_in[2] = {4 * w, 2 * w}, up_out[2] = {2 * w, w};
  for (int i = 0; i < 2; ++i) {
    const std::string n = "up" + std::to_string(i);
    up_.push_back(Stage{nn::UNetResBlock<Scalar>(s, n + ".res", up_in[i], up_out[i], td, rng),
                        nn::TransformerBlock<Scalar>(s, n + ".attn", up_out[i], h, rng)});
    up_convs_.emplace_back(s, n + ".up", up_out[i], w, kUp, false, rng);
  }
  head_conv_ = std::make_unique<nn::Conv1d<Scalar>>(s, "head.conv", w, w, kSame3, false, rng);
  head_norm_ = std::make_unique<nn::GroupNorm<Scalar>>(s, "head.norm", w);
  head_out_ = std::make_unique<nn::Conv1d<Scalar>>(s, "head.out", w, c, kPointwise, false, rng);
}

template <typename Scalar>
ad::Var<Scalar> VelocityNet<Scalar>::operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& state, Scalar t,
                                                const ad::Var<Scalar>& cond) const {
  if (state.rows() != cond.rows() || state.cols() != cond.cols()) {
    throw std::invalid_argument("vnet: state and condition shapes differ");
  }
  if (state.rows() != cfg_.latent_channels) {
    throw std::invalid_argument("vnet: expected " + std::to_string(cfg_.latent_channels) + " channels, got " +
                                std::to_string(state.rows()));
  }
  if (state.cols() < 1) throw std::invalid_argument("vnet: empty latent");
  const Index frames = state.cols();
  const Index extra = (kFrameMultiple - frames % kFrameMultiple) % kFrameMultiple;

  auto temb = (*time_)(tape, t);
  auto x = pad_frames(ops::concat_rows(state, cond), extra);
  x = (*entry_)(tape, x);

  std::vector<ad::Var<Scalar>> skips;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    x = down_[i].attn(tape, down_[i].res(tape, x, temb));
    x = down_convs_[i](tape, x);
    skips.push_back(x);
  }
  for (const auto& stage : middle_) x = stage.attn(tape, stage.res(tape, x, temb));
  for (std::size_t i = 0; i < up_.size(); ++i) {
    x = ops::concat_rows(x, skips[skips.size() - 1 - i]);
    x = up_[i].attn(tape, up_[i].res(tape, x, temb));
    x = up_convs_[i](tape, x);
  }
  x = ops::mish((*head_norm_)(tape, (*head_conv_)(tape, x)));
  x = (*head_out_)(tape, x);
  return extra > 0 ? ops::slice_cols(x, 0, frames) : x;
}

template <typename Scalar>
Matrix<Scalar> VelocityNet<Scalar>::evaluate(const Matrix<Scalar>& state, Scalar t, const Matrix<Scalar>& cond) const {
  ad::Tape<Scalar> tape(false);
  return (*this)(tape, tape.constant(state), t, tape.constant(cond)).value();
}

template <typename Scalar>
double VelocityNet<Scalar>::macs(Index frames) const {
  if (frames < kFrameMultiple || frames % kFrameMultiple != 0) {
    throw std::invalid_argument("vnet.macs: frames must be a positive multiple of 4");
  }
  double total = time_->macs() + entry_->macs(frames);
  Index len = frames;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    total += down_[i].res.macs(len) + down_[i].attn.linear_macs(len) + down_[i].attn.attention_macs(len);
    total += down_convs_[i].macs(len);
    len = down_convs_[i].out_length(len);
  }
  for (const auto& stage : middle_) {
    total += stage.res.macs(len) + stage.attn.linear_macs(len) + stage.attn.attention_macs(len);
  }
  for (std::size_t i = 0; i < up_.size(); ++i) {
    total += up_[i].res.macs(len) + up_[i].attn.linear_macs(len) + up_[i].attn.attention_macs(len);
    total += up_convs_[i].macs(len);
    len = up_convs_[i].out_length(len);
  }
  return total + head_conv_->macs(len) + head_out_->macs(len);
}

template <typename Scalar>
MacPolynomial VelocityNet<Scalar>::mac_polynomial() const {
  // Exact quadratic through T = 4, 8, 12 (second differences are constant on multiples of 4).
  const double m4 = macs(4), m8 = macs(8), m12 = macs(12);
  MacPolynomial p;
  p.quadratic = (m12 - 2.0 * m8 + m4) / (2.0 * 16.0);
  p.linear = (m8 - m4) / 4.0 - p.quadratic * 12.0;
  p.constant = m4 - p.linear * 4.0 - p.quadratic * 16.0;
  return p;
}

template <typename Scalar>
double VelocityNet<Scalar>::flops_per_second(int target_rate, Index hop) const {
  if (target_rate <= 0 || hop <= 0) throw std::invalid_argument("flops_per_second: rate and hop must be positive");
  return 2.0 * mac_polynomial()(double(target_rate) / double(hop));
}

template class VelocityNet<float>;
template class VelocityNet<double>;

}  // namespace lfsr
