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

#include <vector>

#include "slaug/grid.hpp"
#include "slaug/random.hpp"

namespace slaug {

/// Sampling ranges of the shared common augmentation stack.
struct CommonAugRanges {
  double rotate_deg = 20.0;      ///< rotation drawn from [-r, r]
  double shift_px = 15.0;        ///< translation per axis drawn from [-s, s]
  double shear_deg = 20.0;       ///< shear drawn from [-s, s]
  double scale_min = 0.5;
  double scale_max = 1.5;
  double elastic_alpha = 20.0;   ///< displacement magnitude in pixels
  double elastic_sigma = 5.0;    ///< Gaussian smoothing of the displacement field
  double brightness = 10.0;      ///< offset drawn from [-b, b] on the 0..255 scale
  double contrast_min = 0.6;
  double contrast_max = 1.5;
  double gamma_min = 0.2;
  double gamma_max = 1.8;
  double noise_std = 0.15;
};

/// Hyperparameters of location-scale augmentation and saliency fusion.
struct AugConfig {
  double sigma1 = 0.1;                    ///< scale factor alpha ~ TN(1, sigma1)
  double sigma2 = 0.5;                    ///< location factor beta ~ TN(0, sigma2)
  double trunc_k = 2.0;                   ///< truncation half-width in sigma units
  double invert_prob_background = 1.0;    ///< LLA inversion probability for class 0
  double invert_prob_other = 0.5;         ///< LLA inversion probability for classes >= 1
  int grid_size = 3;                      ///< saliency pooling grid g
  int lut_samples = 1000;                 ///< Bezier tabulation density
  float foreground_threshold = 0.0F;      ///< pixel is body iff value > threshold
  CommonAugRanges common;

  /// Throws InvalidConfig when any field is outside its domain.
  void validate() const;
};

/// Rescales to [0, 1]; constant grids map to all zeros. Throws InvalidInput on an empty grid.
ScalarGrid2D minmax_normalize(const ScalarGrid2D& x);

/// x^c = m^c * x for every class c in [0, C). Throws InvalidInput on shape mismatch.
std::vector<ScalarGrid2D> decompose_by_class(const ScalarGrid2D& x, const LabelGrid2D& m);

/// Pixelwise sum of the components. Throws InvalidInput if the list is empty or shapes differ.
ScalarGrid2D recompose(const std::vector<ScalarGrid2D>& parts);

/// Gaussian(mean, sigma) truncated to [mean - k*sigma, mean + k*sigma] by rejection.
double sample_trunc_gauss(double mean, double sigma, double k, RandomStream& rng);

}  // namespace slaug
