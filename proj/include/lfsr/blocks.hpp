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

// Layers shared by the autoencoder, discriminator and velocity network.
//
// Every layer registers its parameters into a ParameterStore under a dotted
// name and keeps raw pointers to them; the store owns the storage and outlives
// the layers. Forward passes are const and take the Tape to record on, so a
// model can be evaluated concurrently on separate tapes.

#pragma once

#include "lfsr/autodiff.hpp"
#include "lfsr/ops.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace lfsr {

using Rng = std::mt19937_64;

template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  ad::Parameter<Scalar>& add(std::string name, Matrix<Scalar> init);

  const std::vector<std::unique_ptr<ad::Parameter<Scalar>>>& items() const { return params_; }
  ad::Parameter<Scalar>* find(std::string_view name) const;

  Index scalar_count() const;
  void zero_grad();
  void set_trainable(bool trainable);
  /// FNV-1a over names, shapes and raw bytes of every value.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::unique_ptr<ad::Parameter<Scalar>>> params_;
};

namespace nn {

template <typename Scalar>
using Var = ad::Var<Scalar>;
template <typename Scalar>
using Tape = ad::Tape<Scalar>;

/// Scalar Snake: x + sin^2(alpha x) / alpha.
template <typename Scalar>
Scalar snake(Scalar x, Scalar alpha) {
  const Scalar s = std::sin(alpha * x);
  return x + s * s / alpha;
}

/// Scalar Mish: x * tanh(softplus(x)) with an overflow-free softplus.
template <typename Scalar>
Scalar mish(Scalar x) {
  const Scalar sp = std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
  return x * std::tanh(sp);
}

/// Sinusoidal features of t in [0, 1]. Frequencies run geometrically from
/// 1000 down to 1 so the lowest pair stays injective on [0, 1].
template <typename Scalar>
Vector<Scalar> sinusoidal_features(Scalar t, Index dim);

/// Clamps t into [0, 1], warning on stderr when it had to.
template <typename Scalar>
Scalar clamp_time(Scalar t);

template <typename Scalar>
class Conv1d {
 public:
  Conv1d(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
         ops::Conv1dGeometry geom, bool weight_norm, Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;
  Var<Scalar> weight(Tape<Scalar>& tape) const;

  Index in() const { return in_; }
  Index out() const { return out_; }
  const ops::Conv1dGeometry& geometry() const { return geom_; }
  Index out_length(Index in_len) const { return geom_.out_length(in_len); }
  double macs(Index in_len) const;

 private:
  Index in_, out_;
  ops::Conv1dGeometry geom_;
  ad::Parameter<Scalar>* direction_ = nullptr;  // or the plain weight
  ad::Parameter<Scalar>* magnitude_ = nullptr;  // null without weight norm
  ad::Parameter<Scalar>* bias_ = nullptr;
};

template <typename Scalar>
class ConvTranspose1d {
 public:
  ConvTranspose1d(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
                  ops::Conv1dGeometry geom, bool weight_norm, Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;
  Index out_length(Index in_len) const { return geom_.transposed_out_length(in_len); }
  double macs(Index in_len) const;

 private:
  Index in_, out_;
  ops::Conv1dGeometry geom_;
  ad::Parameter<Scalar>* direction_ = nullptr;
  ad::Parameter<Scalar>* magnitude_ = nullptr;
  ad::Parameter<Scalar>* bias_ = nullptr;
};

template <typename Scalar>
class Conv2d {
 public:
  Conv2d(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
         ops::Conv2dGeometry geom, Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x, Index height, Index width) const;
  const ops::Conv2dGeometry& geometry() const { return geom_; }

 private:
  Index in_, out_;
  ops::Conv2dGeometry geom_;
  ad::Parameter<Scalar>* weight_ = nullptr;
  ad::Parameter<Scalar>* bias_ = nullptr;
};

/// Dense layer over the rows of a (in x T) feature map.
template <typename Scalar>
class Linear {
 public:
  Linear(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out, Rng& rng);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;
  double macs(Index columns) const { return double(in_) * double(out_) * double(columns); }

 private:
  Index in_, out_;
  ad::Parameter<Scalar>* weight_ = nullptr;
  ad::Parameter<Scalar>* bias_ = nullptr;
};

/// Per-channel Snake with alpha stored as log(alpha), initialised to alpha = 1.
template <typename Scalar>
class Snake {
 public:
  Snake(ParameterStore<Scalar>& store, const std::string& name, Index channels);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;

 private:
  ad::Parameter<Scalar>* log_alpha_ = nullptr;
};

template <typename Scalar>
class GroupNorm {
 public:
  GroupNorm(ParameterStore<Scalar>& store, const std::string& name, Index channels, Index groups = 8);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;

 private:
  Index groups_;
  ad::Parameter<Scalar>* gamma_ = nullptr;
  ad::Parameter<Scalar>* beta_ = nullptr;
};

/// Normalizes each frame over channels.
template <typename Scalar>
class LayerNorm {
 public:
  LayerNorm(ParameterStore<Scalar>& store, const std::string& name, Index channels, double eps = 1e-5);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;

 private:
  Scalar eps_;
  ad::Parameter<Scalar>* gamma_ = nullptr;
  ad::Parameter<Scalar>* beta_ = nullptr;
};

/// Snake -> dilated conv (kernel 7) -> Snake -> 1x1 conv, plus the block input.
template <typename Scalar>
class ResBlock1d {
 public:
  ResBlock1d(ParameterStore<Scalar>& store, const std::string& name, Index channels,
             Index dilation, Index kernel, Rng& rng);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;
  double macs(Index len) const { return conv1_.macs(len) + conv2_.macs(len); }

 private:
  Snake<Scalar> act1_;
  Conv1d<Scalar> conv1_;
  Snake<Scalar> act2_;
  Conv1d<Scalar> conv2_;
};

/// conv3 -> GroupNorm -> Mish -> (+ time projection) -> conv3 -> GroupNorm -> Mish,
/// plus a 1x1 convolution of the input.
template <typename Scalar>
class UNetResBlock {
 public:
  UNetResBlock(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
               Index time_dim, Rng& rng);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& time) const;
  double macs(Index len) const;

 private:
  Conv1d<Scalar> conv1_;
  GroupNorm<Scalar> norm1_;
  Linear<Scalar> time_proj_;
  Conv1d<Scalar> conv2_;
  GroupNorm<Scalar> norm2_;
  Conv1d<Scalar> skip_;
};

/// Pre-norm self-attention over frames followed by a pre-norm feed-forward
/// layer with expansion 4. No positional encoding.
template <typename Scalar>
class TransformerBlock {
 public:
  TransformerBlock(ParameterStore<Scalar>& store, const std::string& name, Index channels,
                   Index heads, Rng& rng);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const;
  /// Linear projections (per frame) and attention products (quadratic in frames).
  double linear_macs(Index frames) const;
  double attention_macs(Index frames) const;

 private:
  Index channels_, heads_;
  LayerNorm<Scalar> norm1_;
  Linear<Scalar> qkv_;
  Linear<Scalar> proj_;
  LayerNorm<Scalar> norm2_;
  Linear<Scalar> ff1_;
  Linear<Scalar> ff2_;
};

/// Sinusoidal features followed by Linear -> Mish -> Linear (hidden 4x).
/// Output is (dim x 1).
template <typename Scalar>
class TimeEmbedding {
 public:
  TimeEmbedding(ParameterStore<Scalar>& store, const std::string& name, Index dim, Rng& rng);
  Var<Scalar> operator()(Tape<Scalar>& tape, Scalar t) const;
  Index dim() const { return dim_; }
  double macs() const { return fc1_.macs(1) + fc2_.macs(1); }

 private:
  Index dim_;
  Linear<Scalar> fc1_;
  Linear<Scalar> fc2_;
};

}  // namespace nn
}  // namespace lfsr
