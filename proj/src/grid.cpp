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
#include "slaug/grid.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "slaug/error.hpp"

namespace slaug {

ScalarGrid2D::ScalarGrid2D(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), values_(height * width, fill) {
  if (!std::isfinite(fill)) throw InvalidInput("ScalarGrid2D: fill value is not finite");
}

ScalarGrid2D::ScalarGrid2D(std::size_t height, std::size_t width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != height_ * width_) {
    throw InvalidInput("ScalarGrid2D: " + std::to_string(values_.size()) + " values for a " +
                       std::to_string(height_) + "x" + std::to_string(width_) + " grid");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw InvalidInput("ScalarGrid2D: non-finite value");
  }
}

ScalarGrid2D ScalarGrid2D::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t h = rows.size();
  const std::size_t w = h == 0 ? 0 : rows.begin()->size();
  std::vector<float> values;
  values.reserve(h * w);
  for (const auto& row : rows) {
    if (row.size() != w) throw InvalidInput("ScalarGrid2D::from_rows: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return ScalarGrid2D(h, w, std::move(values));
}

LabelGrid2D::LabelGrid2D(std::size_t height, std::size_t width, int num_classes,
                         std::uint8_t fill)
    : LabelGrid2D(height, width, num_classes, std::vector<std::uint8_t>(height * width, fill)) {}

LabelGrid2D::LabelGrid2D(std::size_t height, std::size_t width, int num_classes,
                         std::vector<std::uint8_t> labels)
    : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
  if (num_classes_ < 1 || num_classes_ > 256) {
    throw InvalidInput("LabelGrid2D: class count must be in [1, 256]");
  }
  if (labels_.size() != height_ * width_) {
    throw InvalidInput("LabelGrid2D: label count does not match dimensions");
  }
  for (std::uint8_t l : labels_) {
    if (l >= num_classes_) {
      throw InvalidInput("LabelGrid2D: label " + std::to_string(l) + " outside [0, " +
                         std::to_string(num_classes_) + ")");
    }
  }
}

LabelGrid2D LabelGrid2D::from_rows(int num_classes,
                                   std::initializer_list<std::initializer_list<int>> rows) {
  const std::size_t h = rows.size();
  const std::size_t w = h == 0 ? 0 : rows.begin()->size();
  std::vector<std::uint8_t> labels;
  labels.reserve(h * w);
  for (const auto& row : rows) {
    if (row.size() != w) throw InvalidInput("LabelGrid2D::from_rows: ragged rows");
    for (int l : row) {
      if (l < 0 || l > 255) throw InvalidInput("LabelGrid2D::from_rows: label out of range");
      labels.push_back(static_cast<std::uint8_t>(l));
    }
  }
  return LabelGrid2D(h, w, num_classes, std::move(labels));
}

void LabelGrid2D::set(std::size_t row, std::size_t col, int label) {
  if (label < 0 || label >= num_classes_) throw InvalidInput("LabelGrid2D::set: label out of range");
  labels_[row * width_ + col] = static_cast<std::uint8_t>(label);
}

ScalarGrid2D LabelGrid2D::mask(int cls) const {
  ScalarGrid2D out(height_, width_);
  for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] == cls ? 1.0F : 0.0F;
  return out;
}

std::vector<std::size_t> LabelGrid2D::histogram() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (std::uint8_t l : labels_) ++counts[l];
  return counts;
}

}  // namespace slaug
