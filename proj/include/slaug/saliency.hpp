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

#include "slaug/grid.hpp"
#include "slaug/random.hpp"

namespace slaug {

/// Fusion weights in [0, 1], same shape as the images they blend.
struct SaliencyMap {
  ScalarGrid2D weights;
  int grid_size = 1;
};

/// Pixelwise l2 norm across channels. Throws InvalidInput for zero channels or mixed shapes.
ScalarGrid2D gradient_magnitude(std::span<const ScalarGrid2D> channels);

/// Average-pool onto a g x g grid (integer-division cell bounds).
ScalarGrid2D pool_to_grid(const ScalarGrid2D& raw, int g);

/**
 * Upsample a coarse grid to height x width with the quadratic B-spline kernel.
 * Coarse values sit at cell centres; coarse indices beyond the edge are clamped.
 * The kernel is a partition of unity, so constants are reproduced exactly.
 */
ScalarGrid2D bspline2_upsample(const ScalarGrid2D& coarse, std::size_t height, std::size_t width);

/// pool_to_grid followed by bspline2_upsample. Throws InvalidConfig unless 1 <= g <= min(H, W).
ScalarGrid2D smooth_saliency(const ScalarGrid2D& raw, int g);

/// Min-max to [0, 1]; a flat map (range < 1e-12) becomes all ones.
SaliencyMap normalize_saliency(const ScalarGrid2D& smoothed, int grid_size = 1);

/// s * xg + (1 - s) * xl per pixel, bounded by the pointwise envelope of xg and xl.
ScalarGrid2D fuse(const ScalarGrid2D& xg, const ScalarGrid2D& xl, const SaliencyMap& s);

/// Fusion map with no gradient information: uniform noise on the g x g grid, smoothed and normalized.
SaliencyMap random_saliency(std::size_t height, std::size_t width, int g, RandomStream& rng);

}  // namespace slaug
