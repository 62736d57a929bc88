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


// Optimal-transport conditional flow matching over latents.
//
//   l_t = (1 - t) l0 + t l1,   v = l1 - l0,   loss = E |v_theta(l_t, t, l_lr) - v|^2
//   l_{n+1} = l_n + dt * v_theta(l_n, t_n, l_lr),   t_n = n dt,   dt = 1/N

#pragma once

#include "lfsr/autoencoder.hpp"
#include "lfsr/signal.hpp"
#include "lfsr/velocity_net.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace lfsr {

template <typename Scalar>
struct FlowPath {
  Latent<Scalar> l0;
  Latent<Scalar> l1;
  Scalar t = 0;
  Latent<Scalar> lt;
  Latent<Scalar> v_target;
};

/// Path through given endpoints. Throws if t is outside [0, 1] or shapes differ.
template <typename Scalar>
FlowPath<Scalar> make_path(Latent<Scalar> l0, Latent<Scalar> l1, Scalar t);
/// Fresh l0 ~ N(0, I) drawn from rng.
template <typename Scalar>
FlowPath<Scalar> sample_path(const Latent<Scalar>& l1, Rng& rng, Scalar t);
template <typename Scalar>
Latent<Scalar> standard_normal(Index rows, Index cols, Rng& rng);

/// v(tape, state, t, cond) recorded on a tape.
template <typename Scalar>
using VelocityModel =
    std::function<ad::Var<Scalar>(ad::Tape<Scalar>&, const ad::Var<Scalar>&, Scalar, const ad::Var<Scalar>&)>;

template <typename Scalar>
VelocityModel<Scalar> as_model(const VelocityNet<Scalar>& net) {
  return [&net](ad::Tape<Scalar>& tape, const ad::Var<Scalar>& s, Scalar t, const ad::Var<Scalar>& c) {
    return net(tape, s, t, c);
  };
}

/// Mean squared velocity error over all elements of all paths; paths[i] is conditioned on conds[i].
template <typename Scalar>
ad::Var<Scalar> cfm_loss(ad::Tape<Scalar>& tape, const VelocityModel<Scalar>& net,
                         const std::vector<FlowPath<Scalar>>& paths, const std::vector<Latent<Scalar>>& conds);
/// `batch` draws of (l0, t ~ U(0, 1)) against a single (l1, l_lr) pair. The
/// drawn paths are returned through `paths` when non-null.
template <typename Scalar>
ad::Var<Scalar> cfm_loss(ad::Tape<Scalar>& tape, const VelocityModel<Scalar>& net, const Latent<Scalar>& l1,
                         const Latent<Scalar>& l_lr, Rng& rng, int batch,
                         std::vector<FlowPath<Scalar>>* paths = nullptr);

struct SolverConfig {
  int n_steps = 1;
};

/// Explicit Euler from t = 0 to 1 with left-endpoint time stamps. Throws
/// NumericError naming the step when the state stops being finite.
template <typename Scalar>
Latent<Scalar> euler_solve(const VelocityModel<Scalar>& net, const Latent<Scalar>& l0, const Latent<Scalar>& cond,
                           const SolverConfig& cfg);

struct SuperResolveConfig {
  int target_rate = 8000;
  int n_steps = 1;
  std::uint64_t seed = 0;
};

/// resample -> encode -> Euler from fresh noise -> decode -> crop -> low-band replacement
/// (cutoff at the source Nyquist). Output length is round(len * target / source).
template <typename Scalar>
AudioClip super_resolve(const AudioClip& source, const Autoencoder<Scalar>& ae, const VelocityNet<Scalar>& net,
                        const SuperResolveConfig& cfg);

/// Inference cost of the full pipeline, per second of output audio.
struct ComplexityReport {
  int inference_steps = 1;
  Index ae_params = 0;    // encoder and decoder; the critic is training-only
  Index vnet_params = 0;
  double encoder_flops = 0.0;  // one encode of the upsampled input
  double decoder_flops = 0.0;  // one decode of the solved latent
  double vnet_flops_per_step = 0.0;

  Index params() const { return ae_params + vnet_params; }
  double flops() const { return encoder_flops + decoder_flops + inference_steps * vnet_flops_per_step; }
};

template <typename Scalar>
ComplexityReport complexity(const Autoencoder<Scalar>& ae, const VelocityNet<Scalar>& net, int target_rate,
                            int inference_steps);

}  // namespace lfsr
