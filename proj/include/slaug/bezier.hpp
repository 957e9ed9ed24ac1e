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

#include <span>
#include <vector>

#include "slaug/grid.hpp"
#include "slaug/random.hpp"

namespace slaug {

struct CurvePoint {
  double x = 0.0;  ///< input intensity
  double y = 0.0;  ///< output intensity

  bool operator==(const CurvePoint&) const = default;
};

/**
 * @brief Cubic Bezier control polygon constrained to [v_low, v_high]^2.
 *
 * A forward curve runs from (v_low, v_low) to (v_high, v_high); an inverse
 * curve from (v_low, v_high) to (v_high, v_low). The inner points p1, p2 are
 * free within the square.
 */
struct BezierControlPoints {
  CurvePoint p0, p1, p2, p3;

  double v_low() const noexcept { return p0.x; }
  double v_high() const noexcept { return p3.x; }
  bool inverse() const noexcept { return p0.y > p3.y; }

  /// Point on the curve at parameter s in [0, 1] (standard cubic Bernstein basis).
  CurvePoint evaluate(double s) const noexcept;

  bool operator==(const BezierControlPoints&) const = default;
};

/// Endpoints for [v_low, v_high], swapped when `invert`; inner points supplied by the caller.
BezierControlPoints make_control_points(double v_low, double v_high, bool invert, CurvePoint p1,
                                        CurvePoint p2);

/// Random inner points drawn uniformly from the square. Throws InvalidRange unless v_low < v_high.
BezierControlPoints sample_control_points(double v_low, double v_high, bool invert,
                                          RandomStream& rng);

enum class LutDirection { kForward, kInverse };

/**
 * @brief Monotone piecewise-linear realization of a Bezier intensity curve.
 *
 * xs is strictly increasing from v_low to v_high; ys is non-decreasing for a
 * forward curve and non-increasing for an inverse one, and stays inside
 * [v_low, v_high]. Queries outside [v_low, v_high] are clamped first.
 */
class IntensityLUT {
 public:
  /// Validates every invariant above; throws InvalidInput otherwise.
  IntensityLUT(std::vector<double> xs, std::vector<double> ys, LutDirection direction);

  double operator()(double x) const noexcept;

  std::span<const double> xs() const noexcept { return xs_; }
  std::span<const double> ys() const noexcept { return ys_; }
  LutDirection direction() const noexcept { return direction_; }
  double v_low() const noexcept { return xs_.front(); }
  double v_high() const noexcept { return xs_.back(); }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  LutDirection direction_;
};

/**
 * Tabulates the curve at n uniformly spaced parameters, sorts the samples by
 * input intensity, averages samples sharing an input, then runs a
 * pool-adjacent-violators pass so the outputs are monotone in the curve's
 * direction. End outputs are pinned to the curve's endpoints.
 */
IntensityLUT build_intensity_lut(const BezierControlPoints& cp, int n);

/// Maps pixels with region > 0.5 through the LUT; other pixels are copied bit-for-bit.
ScalarGrid2D map_intensities(const ScalarGrid2D& x, const IntensityLUT& lut,
                             const ScalarGrid2D& region);

}  // namespace slaug
