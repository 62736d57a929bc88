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


#include "lfsr/cfm.hpp"

#include "lfsr/errors.hpp"

#include <stdexcept>
#include <string>

namespace lfsr {

template <typename Scalar>
Latent<Scalar> standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Latent<Scalar> out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = static_cast<Scalar>(normal(rng));
  }
  return out;
}

template <typename Scalar>
FlowPath<Scalar> make_path(Latent<Scalar> l0, Latent<Scalar> l1, Scalar t) {
  if (!(t >= Scalar(0) && t <= Scalar(1))) throw std::invalid_argument("flow path: t must lie in [0, 1]");
  if (l0.rows() != l1.rows() || l0.cols() != l1.cols()) throw std::invalid_argument("flow path: shapes differ");
  FlowPath<Scalar> p;
  p.t = t;
  p.lt = (Scalar(1) - t) * l0 + t * l1;
  p.v_target = l1 - l0;
  p.l0 = std::move(l0);
  p.l1 = std::move(l1);
  return p;
}

template <typename Scalar>
FlowPath<Scalar> sample_path(const Latent<Scalar>& l1, Rng& rng, Scalar t) {
  if (!(t >= Scalar(0) && t <= Scalar(1))) throw std::invalid_argument("sample_path: t must lie in [0, 1]");
  return make_path(standard_normal<Scalar>(l1.rows(), l1.cols(), rng), l1, t);
}

template <typename Scalar>
ad::Var<Scalar> cfm_loss(ad::Tape<Scalar>& tape, const VelocityModel<Scalar>& net,
                         const std::vector<FlowPath<Scalar>>& paths, const std::vector<Latent<Scalar>>& conds) {
  if (paths.empty() || paths.size() != conds.size()) {
    throw std::invalid_argument("cfm_loss: need one condition per path");
  }
  Index elements = 0;
  for (const auto& p : paths) elements += p.v_target.size();
  const Scalar weight = Scalar(1) / Scalar(elements);
  ad::Var<Scalar> total;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    if (conds[i].rows() != p.lt.rows() || conds[i].cols() != p.lt.cols()) {
      throw std::invalid_argument("cfm_loss: condition shape differs from the latent");
    }
    auto pred = net(tape, tape.constant(p.lt), p.t, tape.constant(conds[i]));
    auto term = ops::scale(ops::sum(ops::square(ops::sub(pred, tape.constant(p.v_target)))), weight);
    total = i == 0 ? term : ops::add(total, term);
  }
  return total;
}

template <typename Scalar>
ad::Var<Scalar> cfm_loss(ad::Tape<Scalar>& tape, const VelocityModel<Scalar>& net, const Latent<Scalar>& l1,
                         const Latent<Scalar>& l_lr, Rng& rng, int batch, std::vector<FlowPath<Scalar>>* paths) {
  if (batch < 1) throw std::invalid_argument("cfm_loss: batch must be >= 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<FlowPath<Scalar>> drawn;
  for (int b = 0; b < batch; ++b) {
    const auto t = static_cast<Scalar>(uniform(rng));
    drawn.push_back(sample_path(l1, rng, t));
  }
  auto loss = cfm_loss(tape, net, drawn, std::vector<Latent<Scalar>>(static_cast<std::size_t>(batch), l_lr));
  if (paths) *paths = std::move(drawn);
  return loss;
}

template <typename Scalar>
Latent<Scalar> euler_solve(const VelocityModel<Scalar>& net, const Latent<Scalar>& l0, const Latent<Scalar>& cond,
                           const SolverConfig& cfg) {
  if (cfg.n_steps < 1) throw std::invalid_argument("euler_solve: n_steps must be >= 1");
  const Scalar dt = Scalar(1) / Scalar(cfg.n_steps);
  Latent<Scalar> state = l0;
  for (int n = 0; n < cfg.n_steps; ++n) {
    ad::Tape<Scalar> tape(false);
    const Scalar t = Scalar(n) * dt;
    const Latent<Scalar> v = net(tape, tape.constant(state), t, tape.constant(cond)).value();
    state += dt * v;
    if (!state.allFinite()) throw NumericError(n, "euler_solve: non-finite state");
  }
  return state;
}

template <typename Scalar>
AudioClip super_resolve(const AudioClip& source, const Autoencoder<Scalar>& ae, const VelocityNet<Scalar>& net,
                        const SuperResolveConfig& cfg) {
  if (source.rate <= 0 || source.rate >= cfg.target_rate) {
    throw std::invalid_argument("super_resolve: source rate " + std::to_string(source.rate) +
                                " must be below the target rate " + std::to_string(cfg.target_rate));
  }
  if (source.size() == 0) throw std::invalid_argument("super_resolve: empty input");
  const AudioClip upsampled = resample(source, cfg.target_rate);
  const Encoded<Scalar> enc = ae.encode(upsampled.samples);
  Rng rng(cfg.seed);
  const Latent<Scalar> l0 = standard_normal<Scalar>(enc.latent.rows(), enc.latent.cols(), rng);
  const Latent<Scalar> l1 = euler_solve(as_model(net), l0, enc.latent, SolverConfig{cfg.n_steps});
  AudioClip generated{ae.decode(l1).head(upsampled.size()), cfg.target_rate};
  return replace_low_band(generated, upsampled, 0.5 * source.rate);
}

template <typename Scalar>
ComplexityReport complexity(const Autoencoder<Scalar>& ae, const VelocityNet<Scalar>& net, int target_rate,
                            int inference_steps) {
  if (target_rate <= 0) throw std::invalid_argument("complexity: target rate must be positive");
  if (inference_steps < 1) throw std::invalid_argument("complexity: inference steps must be at least 1");
  const Index hop = ae.config().hop();
  const double frames_per_second = double(target_rate) / double(hop);
  ComplexityReport r;
  r.inference_steps = inference_steps;
  r.ae_params = ae.parameters().scalar_count();
  r.vnet_params = net.param_count();
  r.encoder_flops = 2.0 * ae.encoder_macs(hop) * frames_per_second;
  r.decoder_flops = 2.0 * ae.decoder_macs(1) * frames_per_second;
  r.vnet_flops_per_step = net.flops_per_second(target_rate, hop);
  return r;
}

#define LFSR_INSTANTIATE_CFM(S)                                                                             \
  template Latent<S> standard_normal<S>(Index, Index, Rng&);                                                \
  template FlowPath<S> make_path<S>(Latent<S>, Latent<S>, S);                                               \
  template FlowPath<S> sample_path<S>(const Latent<S>&, Rng&, S);                                           \
  template ad::Var<S> cfm_loss<S>(ad::Tape<S>&, const VelocityModel<S>&, const std::vector<FlowPath<S>>&,   \
                                  const std::vector<Latent<S>>&);                                           \
  template ad::Var<S> cfm_loss<S>(ad::Tape<S>&, const VelocityModel<S>&, const Latent<S>&, const Latent<S>&, \
                                  Rng&, int, std::vector<FlowPath<S>>*);                                    \
  template Latent<S> euler_solve<S>(const VelocityModel<S>&, const Latent<S>&, const Latent<S>&,            \
                                    const SolverConfig&);                                                   \
  template AudioClip super_resolve<S>(const AudioClip&, const Autoencoder<S>&, const VelocityNet<S>&,       \
                                      const SuperResolveConfig&);                                    \
  template ComplexityReport complexity<S>(const Autoencoder<S>&, const VelocityNet<S>&, int, int);

LFSR_INSTANTIATE_CFM(float)
LFSR_INSTANTIATE_CFM(double)

#undef LFSR_INSTANTIATE_CFM

}  // namespace lfsr
