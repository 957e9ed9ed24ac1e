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
#include <vector>

#include "slaug/bezier.hpp"
#include "slaug/core.hpp"
#include "slaug/grid.hpp"
#include "slaug/random.hpp"

namespace slaug {

/// Binary body mask: 1 where the source intensity is strictly above the threshold.
struct ForegroundMask {
  ScalarGrid2D mask;
  float threshold = 0.0F;

  static ForegroundMask from_image(const ScalarGrid2D& x, float threshold = 0.0F);

  bool contains(std::size_t i) const { return mask[i] > 0.5F; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

/// Clamp to a fixed intensity window such as a CT Hounsfield range.
ScalarGrid2D window_clip(const ScalarGrid2D& x, double lo, double hi);

/// Clamp values above the (100 - upper_pct) nearest-rank percentile to that percentile.
ScalarGrid2D percentile_clip(const ScalarGrid2D& x, double upper_pct);

/// One sampled location-scale transform: a Bezier curve followed by alpha * F + beta.
struct LocationScaleDraw {
  bool applied = false;          ///< false when the region was empty or constant
  BezierControlPoints curve{};
  double alpha = 1.0;
  double beta = 0.0;
};

/// GLA output together with the draws needed to replay it.
struct GlaResult {
  ScalarGrid2D image;
  LocationScaleDraw draw;
  bool foreground_empty = false;  ///< warning: nothing to augment, input returned
};

/// Sample a forward curve on [v_low, v_high] and alpha, beta for one region.
LocationScaleDraw sample_location_scale(double v_low, double v_high, bool invert,
                                        const AugConfig& cfg, RandomStream& rng);

/// Apply alpha * F(x) + beta on foreground pixels; blank pixels are copied.
ScalarGrid2D apply_gla(const ScalarGrid2D& x, const ForegroundMask& fg,
                       const LocationScaleDraw& draw, int lut_samples);

/**
 * Global location-scale augmentation. One forward curve spans the foreground
 * intensity range, followed by alpha ~ TN(1, sigma1), beta ~ TN(0, sigma2).
 * The output is not clamped. Blank pixels are left untouched.
 */
GlaResult gla(const ScalarGrid2D& x, const ForegroundMask& fg, const AugConfig& cfg,
              RandomStream& rng);

/// LLA output with one draw per class index (draw.applied is false for skipped classes).
struct LlaResult {
  ScalarGrid2D image;
  std::vector<LocationScaleDraw> draws;
  bool foreground_empty = false;
};

/// Apply per-class draws on the class-foreground intersections.
ScalarGrid2D apply_lla(const ScalarGrid2D& x, const LabelGrid2D& m, const ForegroundMask& fg,
                       const std::vector<LocationScaleDraw>& draws, int lut_samples);

/**
 * Local location-scale augmentation. Each class c gets its own curve, inverted
 * with probability p_c (background: invert_prob_background, others:
 * invert_prob_other), and its own alpha_c, beta_c. Class c draws come from
 * rng.child(c), so its output depends only on its own pixels and the seed.
 * Classes that are absent, or constant over their foreground pixels, pass through.
 */
LlaResult lla(const ScalarGrid2D& x, const LabelGrid2D& m, const ForegroundMask& fg,
              const AugConfig& cfg, RandomStream& rng);

/// One shared draw of the common augmentation stack for a slice.
struct CommonAugParams {
  double rotate_deg = 0.0;
  double shift_x = 0.0;       ///< columns
  double shift_y = 0.0;       ///< rows
  double shear_deg = 0.0;
  double scale = 1.0;
  double elastic_alpha = 0.0;
  double elastic_sigma = 0.0;
  double brightness = 0.0;    ///< 0..255 scale; divided by 255 when applied
  double contrast = 1.0;
  double gamma = 1.0;
  double noise_std = 0.0;

  static CommonAugParams identity() { return {}; }
};

CommonAugParams sample_common_params(const CommonAugRanges& ranges, RandomStream& rng);

/// Source coordinate for every output pixel of a geometric transform.
struct SamplingField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> src_row;
  std::vector<double> src_col;
};

/**
 * Affine first, then elastic: output pixel p reads the affine-transformed image
 * at p + d(p), where d is a uniform[-1, 1] field smoothed by a Gaussian of
 * elastic_sigma (reflect borders) and scaled by elastic_alpha.
 */
SamplingField make_sampling_field(std::size_t height, std::size_t width,
                                  const CommonAugParams& params, RandomStream& elastic_rng);

/// Bilinear resampling; samples outside the grid read 0.
ScalarGrid2D warp_bilinear(const ScalarGrid2D& x, const SamplingField& field);
/// Nearest-neighbour resampling; samples outside the grid read class 0.
LabelGrid2D warp_nearest(const LabelGrid2D& m, const SamplingField& field);

/// Brightness, contrast, gamma, then additive Gaussian noise from noise_rng.
ScalarGrid2D apply_intensity_augment(const ScalarGrid2D& x, const CommonAugParams& params,
                                     RandomStream& noise_rng);

struct CommonAugResult {
  ScalarGrid2D xg;
  ScalarGrid2D xl;
  LabelGrid2D m;
  CommonAugParams params;
};

/// Common augmentation with explicit parameters; streams for the elastic field and noise come from rng.
CommonAugResult apply_common_augment(const ScalarGrid2D& xg, const ScalarGrid2D& xl,
                                     const LabelGrid2D& m, const CommonAugParams& params,
                                     RandomStream& rng);

/**
 * Common augmentation shared between the GLA and LLA images of one slice: one
 * parameter draw, one sampling field for xg, xl and m, identical intensity
 * parameters for xg and xl, independent noise per image.
 */
CommonAugResult common_augment(const ScalarGrid2D& xg, const ScalarGrid2D& xl,
                               const LabelGrid2D& m, const AugConfig& cfg, RandomStream& rng);

}  // namespace slaug
