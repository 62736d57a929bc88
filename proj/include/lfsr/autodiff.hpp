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

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every operation as a node holding its value and a closure
// that pushes the node's gradient into its parents. Node ids are assigned in
// creation order, which is a topological order, so backward() is a single
// reverse sweep. Parameters live outside the tape; their leaves accumulate
// into Parameter::grad.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

namespace lfsr {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace ad {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool trainable = true;

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  const Matrix<Scalar>& grad() const { return tape_->grad(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, nullptr, {}); }

  /// Leaf that receives a gradient (used for input-gradient checks).
  Var<Scalar> variable(Mat value) {
    return push(std::move(value), grad_enabled_, nullptr, {});
  }

  Var<Scalar> param(Parameter<Scalar>& p) {
    const bool track = grad_enabled_ && p.trainable;
    return push(p.value, track, track ? &p : nullptr, {});
  }

  /// Records an op result. The closure runs only if some parent tracks grads.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> parents, Backward fn) {
    bool track = false;
    if (grad_enabled_) {
      for (const auto& p : parents) track = track || requires_grad(p.id());
    }
    return push(std::move(value), track, nullptr, track ? std::move(fn) : Backward{});
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  const Mat& grad(std::size_t id) const { return nodes_[id].grad; }

  /// Zero-initialised gradient buffer of a tracked node, for scatter-style updates.
  Mat& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].requires_grad) return;
    grad_buffer(id) += g;
  }

  void backward(const Var<Scalar>& root) {
    backward(root, Mat::Ones(root.rows(), root.cols()));
  }

  void backward(const Var<Scalar>& root, const Mat& seed) {
    if (!requires_grad(root.id())) return;
    grad_buffer(root.id()) += seed;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param != nullptr) {
        if (n.param->grad.size() == 0) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Parameter<Scalar>* param = nullptr;
    Backward backward;
  };

  Var<Scalar> push(Mat value, bool track, Parameter<Scalar>* p, Backward fn) {
    nodes_.push_back(Node{std::move(value), Mat{}, track, p, std::move(fn)});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

}  // namespace ad
}  // namespace lfsr
