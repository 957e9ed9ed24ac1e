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
#include "slaug/bezier.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "slaug/error.hpp"

namespace slaug {
namespace {

// Pool-adjacent-violators for a non-decreasing fit with unit weights
// (duplicates were already averaged, so each knot counts once).
void isotonic_non_decreasing(std::vector<double>& ys) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  blocks.reserve(ys.size());
  for (double y : ys) {
    blocks.push_back({y, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  std::size_t i = 0;
  for (const Block& b : blocks) {
    const double m = b.mean();
    for (std::size_t j = 0; j < b.count; ++j) ys[i++] = m;
  }
}

}  // namespace

CurvePoint BezierControlPoints::evaluate(double s) const noexcept {
  const double t = 1.0 - s;
  const double b0 = t * t * t;
  const double b1 = 3.0 * t * t * s;
  const double b2 = 3.0 * t * s * s;
  const double b3 = s * s * s;
  return {b0 * p0.x + b1 * p1.x + b2 * p2.x + b3 * p3.x,
          b0 * p0.y + b1 * p1.y + b2 * p2.y + b3 * p3.y};
}

BezierControlPoints make_control_points(double v_low, double v_high, bool invert, CurvePoint p1,
                                        CurvePoint p2) {
  if (!(v_low < v_high)) throw InvalidRange("Bezier curve needs v_low < v_high");
  BezierControlPoints cp;
  cp.p0 = {v_low, invert ? v_high : v_low};
  cp.p3 = {v_high, invert ? v_low : v_high};
  cp.p1 = p1;
  cp.p2 = p2;
  return cp;
}

BezierControlPoints sample_control_points(double v_low, double v_high, bool invert,
                                          RandomStream& rng) {
  if (!(v_low < v_high)) throw InvalidRange("Bezier curve needs v_low < v_high");
  CurvePoint p1, p2;
  p1.x = rng.uniform(v_low, v_high);
  p1.y = rng.uniform(v_low, v_high);
  p2.x = rng.uniform(v_low, v_high);
  p2.y = rng.uniform(v_low, v_high);
  return make_control_points(v_low, v_high, invert, p1, p2);
}

IntensityLUT::IntensityLUT(std::vector<double> xs, std::vector<double> ys, LutDirection direction)
    : xs_(std::move(xs)), ys_(std::move(ys)), direction_(direction) {
  if (xs_.size() < 2 || xs_.size() != ys_.size()) {
    throw InvalidInput("IntensityLUT: need at least two knots of matching length");
  }
  const double lo = xs_.front();
  const double hi = xs_.back();
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (i > 0 && !(xs_[i] > xs_[i - 1])) throw InvalidInput("IntensityLUT: xs not increasing");
    if (ys_[i] < lo || ys_[i] > hi) throw InvalidInput("IntensityLUT: ys outside [v_low, v_high]");
    if (i > 0) {
      const bool ok = direction_ == LutDirection::kForward ? ys_[i] >= ys_[i - 1]
                                                           : ys_[i] <= ys_[i - 1];
      if (!ok) throw InvalidInput("IntensityLUT: ys not monotone in the stated direction");
    }
  }
}

double IntensityLUT::operator()(double x) const noexcept {
  const double q = std::clamp(x, xs_.front(), xs_.back());
  auto it = std::upper_bound(xs_.begin(), xs_.end(), q);
  if (it == xs_.end()) return ys_.back();
  const std::size_t hi = static_cast<std::size_t>(it - xs_.begin());
  const std::size_t lo = hi - 1;
  const double w = (q - xs_[lo]) / (xs_[hi] - xs_[lo]);
  return ys_[lo] + w * (ys_[hi] - ys_[lo]);
}

IntensityLUT build_intensity_lut(const BezierControlPoints& cp, int n) {
  if (n < 2) throw InvalidConfig("build_intensity_lut: need at least 2 samples");
  const double lo = cp.v_low();
  const double hi = cp.v_high();
  if (!(lo < hi)) throw InvalidRange("build_intensity_lut: v_low must be < v_high");

  std::vector<std::pair<double, double>> samples(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n - 1);
    const CurvePoint p = cp.evaluate(s);
    samples[static_cast<std::size_t>(i)] = {std::clamp(p.x, lo, hi), std::clamp(p.y, lo, hi)};
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<double> xs, ys;
  xs.reserve(samples.size());
  ys.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < samples.size() && samples[j].first == samples[i].first) sum += samples[j++].second;
    xs.push_back(samples[i].first);
    ys.push_back(sum / static_cast<double>(j - i));
    i = j;
  }

  const bool inverse = cp.inverse();
  if (inverse) {
    for (double& y : ys) y = -y;
    isotonic_non_decreasing(ys);
    for (double& y : ys) y = -y;
  } else {
    isotonic_non_decreasing(ys);
  }
  // Every output lies in [lo, hi], so pinning the ends keeps monotonicity.
  ys.front() = cp.p0.y;
  ys.back() = cp.p3.y;
  return IntensityLUT(std::move(xs), std::move(ys),
                      inverse ? LutDirection::kInverse : LutDirection::kForward);
}

ScalarGrid2D map_intensities(const ScalarGrid2D& x, const IntensityLUT& lut,
                             const ScalarGrid2D& region) {
  if (!x.same_shape(region)) throw InvalidInput("map_intensities: region shape differs from image");
  ScalarGrid2D out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (region[i] > 0.5F) out[i] = static_cast<float>(lut(x[i]));
  }
  return out;
}

}  // namespace slaug
