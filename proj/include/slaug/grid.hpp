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
#include <initializer_list>
#include <span>
#include <vector>

namespace slaug {

/**
 * @brief Row-major H x W grid of real intensities.
 *
 * Every image in the pipeline (raw slice, class component, GLA/LLA output,
 * saliency map, fused image) is carried by this type. A default-constructed
 * grid is empty (0 x 0); operations that need pixels reject it.
 */
class ScalarGrid2D {
 public:
  ScalarGrid2D() = default;
  ScalarGrid2D(std::size_t height, std::size_t width, float fill = 0.0F);
  /// Throws InvalidInput if values.size() != height * width or any value is not finite.
  ScalarGrid2D(std::size_t height, std::size_t width, std::vector<float> values);

  static ScalarGrid2D from_rows(std::initializer_list<std::initializer_list<float>> rows);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  float& operator()(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  float operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  template <typename Grid>
  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const ScalarGrid2D&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> values_;
};

/**
 * @brief Row-major H x W grid of class indices in [0, C).
 *
 * Index 0 is background. Each pixel carries exactly one class, so the binary
 * masks induced per class partition the grid.
 */
class LabelGrid2D {
 public:
  LabelGrid2D() = default;
  LabelGrid2D(std::size_t height, std::size_t width, int num_classes, std::uint8_t fill = 0);
  /// Throws InvalidInput on size mismatch, C outside [1, 256], or a label >= C.
  LabelGrid2D(std::size_t height, std::size_t width, int num_classes,
              std::vector<std::uint8_t> labels);

  static LabelGrid2D from_rows(int num_classes,
                               std::initializer_list<std::initializer_list<int>> rows);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return labels_.size(); }
  int num_classes() const noexcept { return num_classes_; }

  std::uint8_t operator()(std::size_t row, std::size_t col) const {
    return labels_[row * width_ + col];
  }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
  /// Bounds-checked against num_classes.
  void set(std::size_t row, std::size_t col, int label);

  std::span<const std::uint8_t> labels() const noexcept { return labels_; }

  /// Binary 0/1 mask of pixels labelled `cls`.
  ScalarGrid2D mask(int cls) const;
  /// Number of pixels per class.
  std::vector<std::size_t> histogram() const;

  template <typename Grid>
  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const LabelGrid2D&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  int num_classes_ = 1;
  std::vector<std::uint8_t> labels_;
};

}  // namespace slaug
