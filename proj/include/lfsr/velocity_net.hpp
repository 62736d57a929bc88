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


// U-Net velocity field v(l_t, t, l_lr) over latents.
//
//   concat(l_t, l_lr) -> conv k3 (2C -> W)
//   down 0:  UNetResBlock(W -> W),   Transformer, conv k3 s2 (W -> W)      skip s0
//   down 1:  UNetResBlock(W -> 2W),  Transformer, conv k3 s2 (2W -> 2W)    skip s1
//   middle:  2 x [UNetResBlock(2W -> 2W), Transformer]
//   up 0:    concat(s1) -> UNetResBlock(4W -> 2W), Transformer, convT k4 s2 (2W -> W)
//   up 1:    concat(s0) -> UNetResBlock(2W -> W),  Transformer, convT k4 s2 (W -> W)
//   head:    conv k3 -> GroupNorm -> Mish -> conv 1x1 (W -> C)
//
// Frames are reflection-padded to a multiple of 4 and the output is cropped back.

#pragma once

#include "lfsr/blocks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <vector>

namespace lfsr {

struct VelocityNetConfig {
  Index latent_channels = 64;
  Index base_width = 64;
  Index heads = 2;
  Index time_embed_dim = 128;

  void validate() const;
};

void to_json(nlohmann::json& j, const VelocityNetConfig& c);
void from_json(const nlohmann::json& j, VelocityNetConfig& c);

/// Multiply-accumulate count c0 + c1*T + c2*T^2 of one evaluation at T frames.
struct MacPolynomial {
  double constant = 0.0;
  double linear = 0.0;
  double quadratic = 0.0;

  double operator()(double frames) const { return constant + linear * frames + quadratic * frames * frames; }
};

template <typename Scalar>
class VelocityNet {
 public:
  VelocityNet(const VelocityNetConfig& cfg, std::uint64_t seed);

  const VelocityNetConfig& config() const { return cfg_; }
  ParameterStore<Scalar>& parameters() { return *store_; }
  const ParameterStore<Scalar>& parameters() const { return *store_; }

  /// (C x T) state and condition -> (C x T) velocity. Throws on shape mismatch.
  ad::Var<Scalar> operator()(ad::Tape<Scalar>& tape, const ad::Var<Scalar>& state, Scalar t,
                             const ad::Var<Scalar>& cond) const;
  /// Gradient-free evaluation.
  Matrix<Scalar> evaluate(const Matrix<Scalar>& state, Scalar t, const Matrix<Scalar>& cond) const;

  /// Learnable scalars.
  Index param_count() const { return store_->scalar_count(); }
  /// Exact MACs of one evaluation at `frames` (a multiple of 4).
  double macs(Index frames) const;
  /// macs() as a polynomial in T, for evaluation at fractional frame counts.
  MacPolynomial mac_polynomial() const;
  /// 2 x MACs of one evaluation covering one second at `target_rate`.
  double flops_per_second(int target_rate, Index hop = 512) const;

 private:
  struct Stage {
    nn::UNetResBlock<Scalar> res;
    nn::TransformerBlock<Scalar> attn;
  };

  VelocityNetConfig cfg_;
  std::unique_ptr<ParameterStore<Scalar>> store_;
  std::unique_ptr<nn::TimeEmbedding<Scalar>> time_;
  std::unique_ptr<nn::Conv1d<Scalar>> entry_;
  std::vector<Stage> down_, middle_, up_;
  std::vector<nn::Conv1d<Scalar>> down_convs_;
  std::vector<nn::ConvTranspose1d<Scalar>> up_convs_;
  std::unique_ptr<nn::Conv1d<Scalar>> head_conv_;
  std::unique_ptr<nn::GroupNorm<Scalar>> head_norm_;
  std::unique_ptr<nn::Conv1d<Scalar>> head_out_;
};

}  // namespace lfsr
