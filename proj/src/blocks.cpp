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

#include "lfsr/blocks.hpp"

#include <algorithm>
#include <cstring>
#include <iostream>
#include <stdexcept>

namespace lfsr {

namespace {

template <typename Scalar>
Matrix<Scalar> uniform(Index rows, Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<Scalar> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(dist(rng));
  }
  return m;
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

template <typename Scalar>
ad::Parameter<Scalar>& ParameterStore<Scalar>::add(std::string name, Matrix<Scalar> init) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name: " + name);
  auto p = std::make_unique<ad::Parameter<Scalar>>();
  p->name = std::move(name);
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename Scalar>
ad::Parameter<Scalar>* ParameterStore<Scalar>::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename Scalar>
Index ParameterStore<Scalar>::scalar_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename Scalar>
void ParameterStore<Scalar>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename Scalar>
void ParameterStore<Scalar>::set_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

template <typename Scalar>
std::uint64_t ParameterStore<Scalar>::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params_) {
    fnv_mix(h, p->name.data(), p->name.size());
    const Index shape[2] = {p->value.rows(), p->value.cols()};
    fnv_mix(h, shape, sizeof(shape));
    fnv_mix(h, p->value.data(), sizeof(Scalar) * static_cast<std::size_t>(p->value.size()));
  }
  return h;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

namespace nn {

template <typename Scalar>
Vector<Scalar> sinusoidal_features(Scalar t, Index dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("time embedding dim must be even and >= 2");
  const Index half = dim / 2;
  Vector<Scalar> f(dim);
  for (Index i = 0; i < half; ++i) {
    const double expo = half > 1 ? double(half - 1 - i) / double(half - 1) : 0.0;
    const double freq = std::pow(1000.0, expo);
    f[i] = static_cast<Scalar>(std::sin(double(t) * freq));
    f[half + i] = static_cast<Scalar>(std::cos(double(t) * freq));
  }
  return f;
}

template <typename Scalar>
Scalar clamp_time(Scalar t) {
  if (t >= Scalar(0) && t <= Scalar(1)) return t;
  std::cerr << "warning: time " << t << " outside [0, 1]; clamped\n";
  return std::clamp(t, Scalar(0), Scalar(1));
}

template <typename Scalar>
Conv1d<Scalar>::Conv1d(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
                       ops::Conv1dGeometry geom, bool weight_norm, Rng& rng)
    : in_(in), out_(out), geom_(geom) {
  const double bound = 1.0 / std::sqrt(double(in * geom.kernel));
  Matrix<Scalar> w = uniform<Scalar>(out, in * geom.kernel, bound, rng);
  if (weight_norm) {
    Matrix<Scalar> g = w.rowwise().norm();
    direction_ = &store.add(name + ".v", std::move(w));
    magnitude_ = &store.add(name + ".g", std::move(g));
  } else {
    direction_ = &store.add(name + ".weight", std::move(w));
  }
  bias_ = &store.add(name + ".bias", uniform<Scalar>(out, 1, bound, rng));
}

template <typename Scalar>
Var<Scalar> Conv1d<Scalar>::weight(Tape<Scalar>& tape) const {
  auto v = tape.param(*direction_);
  return magnitude_ ? ops::weight_norm(v, tape.param(*magnitude_)) : v;
}

template <typename Scalar>
Var<Scalar> Conv1d<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  if (x.rows() != in_) throw std::invalid_argument("Conv1d: channel mismatch");
  return ops::add_bias(ops::conv1d(x, weight(tape), geom_), tape.param(*bias_));
}

template <typename Scalar>
double Conv1d<Scalar>::macs(Index in_len) const {
  return double(in_) * double(out_) * double(geom_.kernel) * double(out_length(in_len));
}

template <typename Scalar>
ConvTranspose1d<Scalar>::ConvTranspose1d(ParameterStore<Scalar>& store, const std::string& name,
                                         Index in, Index out, ops::Conv1dGeometry geom,
                                         bool weight_norm, Rng& rng)
    : in_(in), out_(out), geom_(geom) {
  const double fan_in = std::max(1.0, double(in * geom.kernel) / double(geom.stride));
  const double bound = 1.0 / std::sqrt(fan_in);
  Matrix<Scalar> w = uniform<Scalar>(out, in * geom.kernel, bound, rng);
  if (weight_norm) {
    Matrix<Scalar> g = w.rowwise().norm();
    direction_ = &store.add(name + ".v", std::move(w));
    magnitude_ = &store.add(name + ".g", std::move(g));
  } else {
    direction_ = &store.add(name + ".weight", std::move(w));
  }
  bias_ = &store.add(name + ".bias", uniform<Scalar>(out, 1, bound, rng));
}

template <typename Scalar>
Var<Scalar> ConvTranspose1d<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  if (x.rows() != in_) throw std::invalid_argument("ConvTranspose1d: channel mismatch");
  auto v = tape.param(*direction_);
  auto w = magnitude_ ? ops::weight_norm(v, tape.param(*magnitude_)) : v;
  return ops::add_bias(ops::conv_transpose1d(x, w, geom_), tape.param(*bias_));
}

template <typename Scalar>
double ConvTranspose1d<Scalar>::macs(Index in_len) const {
  return double(in_) * double(out_) * double(geom_.kernel) * double(in_len);
}

template <typename Scalar>
Conv2d<Scalar>::Conv2d(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
                       ops::Conv2dGeometry geom, Rng& rng)
    : in_(in), out_(out), geom_(geom) {
  const Index fan_in = in * geom.kernel_h * geom.kernel_w;
  const double bound = 1.0 / std::sqrt(double(fan_in));
  weight_ = &store.add(name + ".weight", uniform<Scalar>(out, fan_in, bound, rng));
  bias_ = &store.add(name + ".bias", uniform<Scalar>(out, 1, bound, rng));
}

template <typename Scalar>
Var<Scalar> Conv2d<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x, Index height,
                                       Index width) const {
  if (x.rows() != in_) throw std::invalid_argument("Conv2d: channel mismatch");
  return ops::add_bias(ops::conv2d(x, tape.param(*weight_), height, width, geom_),
                       tape.param(*bias_));
}

template <typename Scalar>
Linear<Scalar>::Linear(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
                       Rng& rng)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(double(in));
  weight_ = &store.add(name + ".weight", uniform<Scalar>(out, in, bound, rng));
  bias_ = &store.add(name + ".bias", uniform<Scalar>(out, 1, bound, rng));
}

template <typename Scalar>
Var<Scalar> Linear<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  return ops::add_bias(ops::matmul(tape.param(*weight_), x), tape.param(*bias_));
}

template <typename Scalar>
Snake<Scalar>::Snake(ParameterStore<Scalar>& store, const std::string& name, Index channels) {
  log_alpha_ = &store.add(name + ".log_alpha", Matrix<Scalar>::Zero(channels, 1));
}

template <typename Scalar>
Var<Scalar> Snake<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  return ops::snake(x, tape.param(*log_alpha_));
}

template <typename Scalar>
GroupNorm<Scalar>::GroupNorm(ParameterStore<Scalar>& store, const std::string& name,
                             Index channels, Index groups)
    : groups_(groups) {
  if (channels % groups != 0) {
    throw std::invalid_argument("GroupNorm: " + std::to_string(channels) +
                                " channels not divisible into " + std::to_string(groups) + " groups");
  }
  gamma_ = &store.add(name + ".gamma", Matrix<Scalar>::Ones(channels, 1));
  beta_ = &store.add(name + ".beta", Matrix<Scalar>::Zero(channels, 1));
}

template <typename Scalar>
Var<Scalar> GroupNorm<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  return ops::group_norm(x, tape.param(*gamma_), tape.param(*beta_), groups_, Scalar(1e-5));
}

template <typename Scalar>
LayerNorm<Scalar>::LayerNorm(ParameterStore<Scalar>& store, const std::string& name, Index channels, double eps)
    : eps_(static_cast<Scalar>(eps)) {
  gamma_ = &store.add(name + ".gamma", Matrix<Scalar>::Ones(channels, 1));
  beta_ = &store.add(name + ".beta", Matrix<Scalar>::Zero(channels, 1));
}

template <typename Scalar>
Var<Scalar> LayerNorm<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  return ops::layer_norm(x, tape.param(*gamma_), tape.param(*beta_), eps_);
}

template <typename Scalar>
ResBlock1d<Scalar>::ResBlock1d(ParameterStore<Scalar>& store, const std::string& name,
                               Index channels, Index dilation, Index kernel, Rng& rng)
    : act1_(store, name + ".act1", channels),
      conv1_(store, name + ".conv1", channels, channels,
             ops::Conv1dGeometry{kernel, 1, dilation, dilation * (kernel - 1) / 2}, true, rng),
      act2_(store, name + ".act2", channels),
      conv2_(store, name + ".conv2", channels, channels, ops::Conv1dGeometry{1}, true, rng) {}

template <typename Scalar>
Var<Scalar> ResBlock1d<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  auto h = conv1_(tape, act1_(tape, x));
  h = conv2_(tape, act2_(tape, h));
  return ops::add(x, h);
}

template <typename Scalar>
UNetResBlock<Scalar>::UNetResBlock(ParameterStore<Scalar>& store, const std::string& name,
                                   Index in, Index out, Index time_dim, Rng& rng)
    : conv1_(store, name + ".conv1", in, out, ops::Conv1dGeometry{3, 1, 1, 1}, false, rng),
      norm1_(store, name + ".norm1", out),
      time_proj_(store, name + ".time_proj", time_dim, out, rng),
      conv2_(store, name + ".conv2", out, out, ops::Conv1dGeometry{3, 1, 1, 1}, false, rng),
      norm2_(store, name + ".norm2", out),
      skip_(store, name + ".skip", in, out, ops::Conv1dGeometry{1}, false, rng) {}

template <typename Scalar>
Var<Scalar> UNetResBlock<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x,
                                             const Var<Scalar>& time) const {
  auto h = ops::mish(norm1_(tape, conv1_(tape, x)));
  h = ops::add_bias(h, time_proj_(tape, time));
  h = ops::mish(norm2_(tape, conv2_(tape, h)));
  return ops::add(h, skip_(tape, x));
}

template <typename Scalar>
double UNetResBlock<Scalar>::macs(Index len) const {
  return conv1_.macs(len) + conv2_.macs(len) + skip_.macs(len) + time_proj_.macs(1);
}

template <typename Scalar>
TransformerBlock<Scalar>::TransformerBlock(ParameterStore<Scalar>& store, const std::string& name,
                                           Index channels, Index heads, Rng& rng)
    : channels_(channels),
      heads_(heads),
      norm1_(store, name + ".norm1", channels),
      qkv_(store, name + ".qkv", channels, 3 * channels, rng),
      proj_(store, name + ".proj", channels, channels, rng),
      norm2_(store, name + ".norm2", channels),
      ff1_(store, name + ".ff1", channels, 4 * channels, rng),
      ff2_(store, name + ".ff2", 4 * channels, channels, rng) {
  if (heads <= 0 || channels % heads != 0) {
    throw std::invalid_argument("TransformerBlock: channels not divisible by heads");
  }
}

template <typename Scalar>
Var<Scalar> TransformerBlock<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
  const Index dh = channels_ / heads_;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(Scalar(dh));
  auto qkv = qkv_(tape, norm1_(tape, x));
  Var<Scalar> attended;
  for (Index h = 0; h < heads_; ++h) {
    auto q = ops::slice_rows(qkv, h * dh, dh);
    auto k = ops::slice_rows(qkv, channels_ + h * dh, dh);
    auto v = ops::slice_rows(qkv, 2 * channels_ + h * dh, dh);
    // scores(key, query); softmax over keys.
    auto weights = ops::softmax_rows(ops::scale(ops::matmul(ops::transpose(k), q), inv_sqrt));
    auto out = ops::matmul(v, weights);
    attended = h == 0 ? out : ops::concat_rows(attended, out);
  }
  auto y = ops::add(x, proj_(tape, attended));
  auto ff = ff2_(tape, ops::mish(ff1_(tape, norm2_(tape, y))));
  return ops::add(y, ff);
}

template <typename Scalar>
double TransformerBlock<Scalar>::linear_macs(Index frames) const {
  return qkv_.macs(frames) + proj_.macs(frames) + ff1_.macs(frames) + ff2_.macs(frames);
}

template <typename Scalar>
double TransformerBlock<Scalar>::attention_macs(Index frames) const {
  // q^T k and v * weights, each channels * frames^2 summed over heads.
  return 2.0 * double(channels_) * double(frames) * double(frames);
}

template <typename Scalar>
TimeEmbedding<Scalar>::TimeEmbedding(ParameterStore<Scalar>& store, const std::string& name,
                                     Index dim, Rng& rng)
    : dim_(dim),
      fc1_(store, name + ".fc1", dim, 4 * dim, rng),
      fc2_(store, name + ".fc2", 4 * dim, dim, rng) {}

template <typename Scalar>
Var<Scalar> TimeEmbedding<Scalar>::operator()(Tape<Scalar>& tape, Scalar t) const {
  const Scalar tc = clamp_time(t);
  auto base = tape.constant(sinusoidal_features(tc, dim_));
  return fc2_(tape, ops::mish(fc1_(tape, base)));
}

#define LFSR_INSTANTIATE_BLOCKS(S)                          \
  template Vector<S> sinusoidal_features<S>(S, Index);      \
  template S clamp_time<S>(S);                              \
  template class Conv1d<S>;                                 \
  template class ConvTranspose1d<S>;                        \
  template class Conv2d<S>;                                 \
  template class Linear<S>;                                 \
  template class Snake<S>;                                  \
  template class GroupNorm<S>;                              \
  template class LayerNorm<S>;                              \
  template class ResBlock1d<S>;                             \
  template class UNetResBlock<S>;                           \
  template class TransformerBlock<S>;                       \
  template class TimeEmbedding<S>;

LFSR_INSTANTIATE_BLOCKS(float)
LFSR_INSTANTIATE_BLOCKS(double)

#undef LFSR_INSTANTIATE_BLOCKS

}  // namespace nn
}  // namespace lfsr
