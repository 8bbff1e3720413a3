// Copyright 2026 The xtrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "xtrans/tensor.hpp"

namespace xtrans::ag {

template <class T>
struct Node
{
  Tensor<T> value;
  Tensor<T> grad; // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return !grad.empty(); }
  Tensor<T>& grad_buffer()
  {
    if (grad.empty())
      grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a node of the dynamic computation graph. Copies share the
/// node, so two modules holding the same Var share parameter storage.
template <class T>
class Var
{
public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(size_t i) const { return node_->value.dim(i); }
  int64_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->has_grad(); }
  const Tensor<T>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  /// Scalar value of a one-element tensor.
  T item() const;

  /// Reverse-mode sweep from this scalar. Intermediate nodes release their
  /// closures afterwards; leaf gradients accumulate.
  void backward();

  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  bool same_storage(const Var& other) const { return node_ == other.node_; }

private:
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

bool grad_enabled();

// Elementwise arithmetic. Binary ops require identical shapes.
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> add_constant(const Var<T>& a, const Tensor<T>& c);
/// a * x + b with scalar a, b.
template <class T> Var<T> affine(const Var<T>& x, T a, T b);
template <class T> Var<T> reshape(const Var<T>& x, Shape shape);

template <class T> Var<T> relu(const Var<T>& x);
template <class T> Var<T> leaky_relu(const Var<T>& x, T slope);
template <class T> Var<T> tanh(const Var<T>& x);
template <class T> Var<T> sigmoid(const Var<T>& x);
/// Clamp into [lo, hi]; gradient passes only where the input was inside.
template <class T> Var<T> clamp(const Var<T>& x, T lo, T hi);

/// Per-channel x * scale[c] + shift[c] with constant vectors (input
/// normalization of the perceptual extractor).
template <class T>
Var<T> channel_affine_constant(const Var<T>& x, const std::vector<T>& scale, const std::vector<T>& shift);

// Convolutions on NCHW inputs with zero padding.
// conv2d weight: (out, in, k, k). conv_transpose2d weight: (in, out, k, k).
// bias may be undefined.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);
template <class T> Var<T> max_pool2d(const Var<T>& x, int size);

// Instance statistics over spatial dims. Results are (N, C).
template <class T> Var<T> channel_mean(const Var<T>& x);
/// sqrt(population variance + eps).
template <class T> Var<T> channel_std(const Var<T>& x, T eps);
/// (x - mean) / sqrt(var + eps) per (n, c).
template <class T> Var<T> instance_normalize(const Var<T>& x, T eps);
/// x * gamma[n, c] + beta[n, c]; gamma and beta are (N, C).
template <class T> Var<T> channel_scale_shift(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);

/// (N, C, H, W) -> (N, C, C), normalized by C*H*W.
template <class T> Var<T> gram(const Var<T>& x);

// Scalar reductions (mean over every element).
template <class T> Var<T> mean(const Var<T>& x);
template <class T> Var<T> l1_loss(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mean_square(const Var<T>& x);
/// Binary cross-entropy against a constant target, on logits.
template <class T> Var<T> bce_with_logits(const Var<T>& logits, T target);
/// sum_i w_i * s_i over scalars.
template <class T> Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights);

} // namespace xtrans::ag
