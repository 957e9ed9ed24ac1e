/*
 * Copyright 2026 The slaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "slaug/nnet/tensor.hpp"

namespace slaug::nn {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/**
 * @brief Reverse-mode autodiff tape (Wengert list).
 *
 * Nodes are appended in evaluation order, so creation order is a topological
 * order and backward() walks it in reverse, visiting each node once. A node
 * requires a gradient iff one of its inputs does; backward closures skip
 * inputs that do not, which is how input-only gradient passes avoid the
 * weight-gradient products. Gradients accumulate additively, so a value
 * consumed by several nodes receives the sum of their contributions.
 */
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Var constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }
  Var variable(Tensor<T> value) { return push(std::move(value), true, nullptr); }

  /// Record an op result. `requires_grad` should be the OR over the op's inputs.
  Var push(Tensor<T> value, bool requires_grad, Backward backward);

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::initializer_list<Var> vs) const;

  /// Gradient of the last backward() root w.r.t. v (zeros if v was not reached).
  const Tensor<T>& grad(Var v);
  /// Mutable, lazily zero-initialised gradient buffer for accumulation inside closures.
  Tensor<T>& grad_buffer(Var v);

  /// Seeds d(root)/d(root) = 1; root must hold a single element.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Differentiable primitives.

/// 2D cross-correlation, stride 1, zero padding `pad`. weight: (Cout, Cin, k, k); bias: (1, Cout, 1, 1).
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int pad);

template <typename T>
Var relu(Tape<T>& tape, Var x);

/// 2x2 max pooling, stride 2. H and W must be even.
template <typename T>
Var max_pool2(Tape<T>& tape, Var x);

/// Nearest-neighbour 2x upsampling.
template <typename T>
Var upsample2(Tape<T>& tape, Var x);

/// Channel concatenation [a, b].
template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b);

/// Softmax across the channel axis at every pixel.
template <typename T>
Var softmax_channels(Tape<T>& tape, Var logits);

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor);

/// Scalar sum(weights * x); used to probe primitives with random projections.
template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, const Tensor<T>& weights);

enum class Reduction { kMean, kSum };

/**
 * Cross entropy plus soft Dice over per-pixel class probabilities.
 *
 * For sample n: CE_n = mean over pixels of -log p[label]; Dice_n = 1 - mean over
 * classes of (2 sum p*y + eps) / (sum p + sum y + eps). The result is the mean
 * (or sum) over samples of CE_n + Dice_n. labels holds N*H*W class indices.
 */
template <typename T>
Var seg_loss(Tape<T>& tape, Var probs, std::span<const std::uint8_t> labels,
             Reduction reduction = Reduction::kMean, double eps = 1.0);

}  // namespace slaug::nn
