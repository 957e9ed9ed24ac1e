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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slaug/grid.hpp"
#include "slaug/nnet/tape.hpp"
#include "slaug/nnet/tensor.hpp"

namespace slaug::nn {

enum class InitScheme {
  kHeNormal,          ///< N(0, 2 / fan_in) weights, zero biases
  kHeNormalZeroHead,  ///< as above but the 1x1 classifier starts at zero (uniform output)
};

struct NetConfig {
  int in_channels = 1;
  int num_classes = 5;
  std::array<int, 3> widths{8, 16, 32};
  InitScheme init = InitScheme::kHeNormal;
  std::uint64_t seed = 0;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/**
 * @brief Three-level encoder-decoder with skip connections.
 *
 *   enc1: conv3(in, w0) relu conv3(w0, w0) relu          (H)
 *   enc2: pool conv3(w0, w1) relu conv3(w1, w1) relu     (H/2)
 *   mid : pool conv3(w1, w2) relu conv3(w2, w2) relu     (H/4)
 *   dec2: up concat(mid, enc2) conv3(w2+w1, w1) relu     (H/2)
 *   dec1: up concat(dec2, enc1) conv3(w1+w0, w0) relu    (H)
 *   head: conv1(w0, C) softmax
 *
 * Input height and width must be divisible by 4.
 */
template <typename T>
class TinySegNet {
 public:
  explicit TinySegNet(const NetConfig& config);

  const NetConfig& config() const noexcept { return config_; }
  int num_classes() const noexcept { return config_.num_classes; }
  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept;

  struct Graph {
    Var input;
    Var probs;
    std::vector<Var> params;
  };

  /// Records the forward pass on `tape`. input: (N, in_channels, H, W).
  Graph build(Tape<T>& tape, Tensor<T> input, bool input_requires_grad,
              bool params_require_grad) const;

  /// Converts parameters to another scalar type (e.g. double for gradient checks).
  template <typename U>
  TinySegNet<U> cast() const {
    TinySegNet<U> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.parameters()[i].value = params_[i].value.template cast<U>();
    }
    return out;
  }

 private:
  NetConfig config_;
  std::vector<Parameter<T>> params_;
};

/// Stack single-channel grids into an (N, 1, H, W) tensor.
template <typename T>
Tensor<T> to_tensor(std::span<const ScalarGrid2D> images);

/// Concatenate N label grids into the flat N*H*W layout used by seg_loss.
std::vector<std::uint8_t> flatten_labels(std::span<const LabelGrid2D> labels);

/// Per-pixel class probabilities for one image; element c is class c's map.
template <typename T>
std::vector<ScalarGrid2D> forward(const TinySegNet<T>& net, const ScalarGrid2D& x);

/// Batched forward pass returning (N, C, H, W) probabilities.
template <typename T>
Tensor<T> forward_batch(const TinySegNet<T>& net, const Tensor<T>& input);

/// Argmax segmentation per image.
template <typename T>
std::vector<LabelGrid2D> predict(const TinySegNet<T>& net, std::span<const ScalarGrid2D> images);

struct LossValue {
  double ce = 0.0;
  double dice = 0.0;
  double total() const { return ce + dice; }
};

/// Loss of a probability tensor against labels, mean over samples (no tape).
template <typename T>
LossValue seg_loss_value(const Tensor<T>& probs, std::span<const std::uint8_t> labels,
                         double eps = 1.0);

/**
 * Gradient of the summed per-sample loss with respect to the input pixels,
 * shape (N, in_channels, H, W). With the sum, sample n's gradient is the
 * gradient of its own loss term. Parameters are read but never modified.
 */
template <typename T>
Tensor<T> input_gradient(const TinySegNet<T>& net, const Tensor<T>& input,
                         std::span<const std::uint8_t> labels);

/// Per-channel gradient grids for one image.
template <typename T>
std::vector<ScalarGrid2D> input_gradient(const TinySegNet<T>& net, const ScalarGrid2D& x,
                                         const LabelGrid2D& m);

/**
 * Checkpoint container, little-endian:
 *   "SLAUGNET" | u16 version (1) | u16 in_channels | u16 num_classes |
 *   u16 width0 | u16 width1 | u16 width2 | u32 tensor count |
 *   per tensor: u32 rank (4), u32 dims[4], f32 payload (row-major)
 */
void save_checkpoint(const TinySegNet<float>& net, const std::filesystem::path& path);
/// Throws CheckpointError on unreadable or malformed files.
TinySegNet<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace slaug::nn
