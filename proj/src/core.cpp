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
#include "slaug/core.hpp"

#include <algorithm>
#include <cmath>

#include "slaug/error.hpp"

namespace slaug {

void AugConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0)) throw InvalidConfig("sigma1/sigma2 must be >= 0");
  if (!(trunc_k > 0.0)) throw InvalidConfig("trunc_k must be > 0");
  if (!prob(invert_prob_background) || !prob(invert_prob_other)) {
    throw InvalidConfig("inversion probabilities must lie in [0, 1]");
  }
  if (grid_size < 1) throw InvalidConfig("grid_size must be >= 1");
  if (lut_samples < 2) throw InvalidConfig("lut_samples must be >= 2");
  const CommonAugRanges& c = common;
  if (c.rotate_deg < 0 || c.shift_px < 0 || c.shear_deg < 0 || c.brightness < 0 ||
      c.noise_std < 0 || c.elastic_alpha < 0 || c.elastic_sigma < 0) {
    throw InvalidConfig("common augmentation magnitudes must be >= 0");
  }
  if (!(c.scale_min > 0 && c.scale_min <= c.scale_max) ||
      !(c.contrast_min > 0 && c.contrast_min <= c.contrast_max) ||
      !(c.gamma_min > 0 && c.gamma_min <= c.gamma_max)) {
    throw InvalidConfig("common augmentation ranges must be positive and ordered");
  }
}

ScalarGrid2D minmax_normalize(const ScalarGrid2D& x) {
  if (x.empty()) throw InvalidInput("minmax_normalize: empty grid");
  const auto [lo_it, hi_it] = std::minmax_element(x.values().begin(), x.values().end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  ScalarGrid2D out(x.height(), x.width());
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<float>(std::clamp((x[i] - lo) / range, 0.0, 1.0));
  }
  return out;
}

std::vector<ScalarGrid2D> decompose_by_class(const ScalarGrid2D& x, const LabelGrid2D& m) {
  if (!x.same_shape(m)) throw InvalidInput("decompose_by_class: image and label shapes differ");
  std::vector<ScalarGrid2D> parts(static_cast<std::size_t>(m.num_classes()),
                                  ScalarGrid2D(x.height(), x.width()));
  for (std::size_t i = 0; i < x.size(); ++i) parts[m[i]][i] = x[i];
  return parts;
}

ScalarGrid2D recompose(const std::vector<ScalarGrid2D>& parts) {
  if (parts.empty()) throw InvalidInput("recompose: no components");
  ScalarGrid2D out(parts.front().height(), parts.front().width());
  for (const ScalarGrid2D& p : parts) {
    if (!p.same_shape(out)) throw InvalidInput("recompose: component shapes differ");
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
  }
  return out;
}

double sample_trunc_gauss(double mean, double sigma, double k, RandomStream& rng) {
  if (sigma <= 0.0) return mean;
  // Acceptance rate is ~95% at k = 2.
  for (;;) {
    const double z = rng.normal();
    if (std::abs(z) <= k) return mean + sigma * z;
  }
}

}  // namespace slaug
