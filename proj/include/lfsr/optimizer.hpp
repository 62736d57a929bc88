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

// Adam with decoupled weight decay and an exponential per-epoch schedule.

#pragma once

#include "lfsr/blocks.hpp"
#include "lfsr/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace lfsr {

struct OptimizerConfig {
  double lr = 3e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double lr_decay = 0.999;
  /// 0 decays once per epoch; K > 0 decays every K steps instead.
  long decay_every_steps = 0;
  /// Global gradient-norm ceiling; 0 disables clipping.
  double grad_clip = 0.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
/// Strict read with error messages rooted at `path`.
void read_optimizer(const nlohmann::json& j, const std::string& path, OptimizerConfig& c);

/// lr * lr_decay^epoch.
double scheduled_lr(const OptimizerConfig& cfg, long epoch);

template <typename Scalar>
class AdamW {
 public:
  AdamW(ParameterStore<Scalar>& store, const OptimizerConfig& cfg);

  /// One update of every trainable parameter from its accumulated gradient,
  /// then clears the gradients. Returns the pre-clip global gradient norm.
  double step(double lr);
  long steps() const { return t_; }

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  /// Restores moments and the step counter written by save().
  void load(const Checkpoint& ckpt, const std::string& prefix, long steps);

 private:
  ParameterStore<Scalar>& store_;
  OptimizerConfig cfg_;
  std::vector<Matrix<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace lfsr
