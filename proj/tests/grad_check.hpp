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

// Central finite differences against reverse-mode gradients, in double.

#pragma once

#include "lfsr/blocks.hpp"
#include "lfsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace lfsr::testing {

struct GradCheck {
  int checked = 0;
  double worst = 0.0;  // largest relative error seen
};

/// Scalar loss of `out`: sum(out .* R) for a fixed random R, so that no
/// gradient cancels by symmetry (e.g. after normalisation).
inline ad::Var<double> projected_sum(const ad::Var<double>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<double> r(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = n(rng);
  return ops::sum(ops::mul(out, out.tape().constant(std::move(r))));
}

/// Compares d loss / d theta for `samples` random entries drawn from the
/// parameters in `store` and the entries of `input`.
/// `forward(tape, x)` builds the output whose projected sum is the loss.
inline GradCheck grad_check(ParameterStore<double>& store, Matrix<double> input,
                            const std::function<ad::Var<double>(ad::Tape<double>&, const ad::Var<double>&)>& forward,
                            int samples, std::uint64_t seed, double h = 1e-5) {
  const auto loss_at = [&](const Matrix<double>& x) {
    ad::Tape<double> tape(false);
    return projected_sum(forward(tape, tape.constant(x)), seed).value()(0, 0);
  };

  store.zero_grad();
  ad::Tape<double> tape;
  const auto x = tape.variable(input);
  tape.backward(projected_sum(forward(tape, x), seed));
  const Matrix<double> input_grad = x.grad().size() ? x.grad() : Matrix<double>::Zero(input.rows(), input.cols());

  // Candidate slots: (matrix, analytic gradient).
  std::vector<std::pair<Matrix<double>*, const Matrix<double>*>> slots;
  for (const auto& p : store.items()) {
    if (p->grad.size() == 0) p->zero_grad();
    slots.emplace_back(&p->value, &p->grad);
  }
  slots.emplace_back(&input, &input_grad);
  Eigen::Index total = 0;
  for (const auto& s : slots) total += s.first->size();

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, total - 1);
  GradCheck result;
  for (int n = 0; n < samples; ++n) {
    Eigen::Index flat = pick(rng);
    std::size_t k = 0;
    while (flat >= slots[k].first->size()) flat -= slots[k++].first->size();
    double& theta = slots[k].first->data()[flat];
    const double analytic = slots[k].second->data()[flat];
    const double saved = theta;
    theta = saved + h;
    const double up = loss_at(input);
    theta = saved - h;
    const double down = loss_at(input);
    theta = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.worst = std::max(result.worst, std::abs(analytic - numeric) / scale);
    ++result.checked;
  }
  return result;
}

}  // namespace lfsr::testing
