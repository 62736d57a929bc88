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

#include "lfsr/optimizer.hpp"

#include "lfsr/config_util.hpp"

#include <cmath>
#include <stdexcept>

namespace lfsr {

void OptimizerConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("optimizer.lr must be positive");
  if (!(beta1 > 0 && beta1 < 1)) throw std::invalid_argument("optimizer.beta1 must lie in (0, 1)");
  if (!(beta2 > 0 && beta2 < 1)) throw std::invalid_argument("optimizer.beta2 must lie in (0, 1)");
  if (!(eps > 0)) throw std::invalid_argument("optimizer.eps must be positive");
  if (weight_decay < 0) throw std::invalid_argument("optimizer.weight_decay must be non-negative");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw std::invalid_argument("optimizer.lr_decay must lie in (0, 1]");
  if (decay_every_steps < 0) throw std::invalid_argument("optimizer.decay_every_steps must be non-negative");
  if (grad_clip < 0) throw std::invalid_argument("optimizer.grad_clip must be non-negative");
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = {{"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps},
       {"weight_decay", c.weight_decay},
       {"lr_decay", c.lr_decay},
       {"decay_every_steps", c.decay_every_steps},
       {"grad_clip", c.grad_clip}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) { read_optimizer(j, "optimizer", c); }

void read_optimizer(const nlohmann::json& j, const std::string& path, OptimizerConfig& c) {
  config::KeyReader r(j, path);
  r.read("lr", c.lr);
  r.read("beta1", c.beta1);
  r.read("beta2", c.beta2);
  r.read("eps", c.eps);
  r.read("weight_decay", c.weight_decay);
  r.read("lr_decay", c.lr_decay);
  r.read("decay_every_steps", c.decay_every_steps);
  r.read("grad_clip", c.grad_clip);
  r.finish();
}

double scheduled_lr(const OptimizerConfig& cfg, long epoch) {
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
}

template <typename Scalar>
AdamW<Scalar>::AdamW(ParameterStore<Scalar>& store, const OptimizerConfig& cfg) : store_(store), cfg_(cfg) {
  cfg_.validate();
  for (const auto& p : store_.items()) {
    m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
  }
}

template <typename Scalar>
double AdamW<Scalar>::step(double lr) {
  const auto& items = store_.items();
  double sq = 0;
  for (const auto& p : items) {
    if (p->trainable && p->grad.size() > 0) sq += p->grad.template cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;

  ++t_;
  const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  const Scalar step = static_cast<Scalar>(lr);
  const Scalar decay = static_cast<Scalar>(1.0 - lr * cfg_.weight_decay);
  const Scalar eps = static_cast<Scalar>(cfg_.eps);
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& p = *items[i];
    if (!p.trainable) continue;
    if (p.grad.size() == 0) p.zero_grad();
    const Matrix<Scalar> g = p.grad * static_cast<Scalar>(clip);
    m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
    v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
    p.value *= decay;
    p.value.array() -= step * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    p.zero_grad();
  }
  return norm;
}

template <typename Scalar>
void AdamW<Scalar>::save(Checkpoint& ckpt, const std::string& prefix) const {
  const auto& items = store_.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    ckpt.arrays[prefix + "m/" + items[i]->name] = m_[i].template cast<float>();
    ckpt.arrays[prefix + "v/" + items[i]->name] = v_[i].template cast<float>();
  }
}

template <typename Scalar>
void AdamW<Scalar>::load(const Checkpoint& ckpt, const std::string& prefix, long steps) {
  const auto& items = store_.items();
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (auto* slot : {&m_[i], &v_[i]}) {
      const std::string key = prefix + (slot == &m_[i] ? "m/" : "v/") + items[i]->name;
      const auto it = ckpt.arrays.find(key);
      if (it == ckpt.arrays.end()) {
        problems.push_back(key + ": missing from checkpoint");
      } else if (it->second.rows() != slot->rows() || it->second.cols() != slot->cols()) {
        problems.push_back(key + ": shape does not match the configured parameter");
      } else {
        *slot = it->second.template cast<Scalar>();
      }
    }
  }
  if (!problems.empty()) throw config::ConfigError(std::move(problems));
  t_ = steps;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace lfsr
