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
#include "slaug/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "slaug/error.hpp"

namespace slaug {
namespace {

double bspline2(double t) {
  const double a = std::abs(t);
  if (a < 0.5) return 0.75 - a * a;
  if (a < 1.5) return 0.5 * (1.5 - a) * (1.5 - a);
  return 0.0;
}

// Weights of the (up to) three coarse taps touching fine position u, in coarse index space.
struct Taps {
  std::size_t index[3];
  double weight[3];
};

std::vector<Taps> spline_taps(std::size_t fine, std::size_t coarse) {
  std::vector<Taps> taps(fine);
  const auto n = static_cast<std::ptrdiff_t>(coarse);
  for (std::size_t i = 0; i < fine; ++i) {
    const double u = (static_cast<double>(i) + 0.5) * static_cast<double>(coarse) /
                         static_cast<double>(fine) - 0.5;
    const auto center = static_cast<std::ptrdiff_t>(std::lround(u));
    for (int k = 0; k < 3; ++k) {
      const std::ptrdiff_t j = center - 1 + k;
      taps[i].index[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, n - 1));
      taps[i].weight[k] = bspline2(u - static_cast<double>(j));
    }
  }
  return taps;
}

}  // namespace

ScalarGrid2D gradient_magnitude(std::span<const ScalarGrid2D> channels) {
  if (channels.empty()) throw InvalidInput("gradient_magnitude: no channels");
  const ScalarGrid2D& first = channels.front();
  for (const ScalarGrid2D& ch : channels) {
    if (!ch.same_shape(first)) throw InvalidInput("gradient_magnitude: channel shapes differ");
  }
  ScalarGrid2D out(first.height(), first.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sq = 0.0;
    for (const ScalarGrid2D& ch : channels) sq += static_cast<double>(ch[i]) * ch[i];
    out[i] = static_cast<float>(std::sqrt(sq));
  }
  return out;
}

ScalarGrid2D pool_to_grid(const ScalarGrid2D& raw, int g) {
  const std::size_t H = raw.height(), W = raw.width();
  if (g < 1 || static_cast<std::size_t>(g) > std::min(H, W)) {
    throw InvalidConfig("saliency grid size must satisfy 1 <= g <= min(H, W)");
  }
  const auto G = static_cast<std::size_t>(g);
  ScalarGrid2D coarse(G, G);
  for (std::size_t gi = 0; gi < G; ++gi) {
    const std::size_t r0 = gi * H / G, r1 = (gi + 1) * H / G;
    for (std::size_t gj = 0; gj < G; ++gj) {
      const std::size_t c0 = gj * W / G, c1 = (gj + 1) * W / G;
      double sum = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) sum += raw(r, c);
      }
      coarse(gi, gj) = static_cast<float>(sum / static_cast<double>((r1 - r0) * (c1 - c0)));
    }
  }
  return coarse;
}

ScalarGrid2D bspline2_upsample(const ScalarGrid2D& coarse, std::size_t height, std::size_t width) {
  if (coarse.empty()) throw InvalidInput("bspline2_upsample: empty coarse grid");
  const std::vector<Taps> rows = spline_taps(height, coarse.height());
  const std::vector<Taps> cols = spline_taps(width, coarse.width());
  ScalarGrid2D out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int a = 0; a < 3; ++a) {
        double row_acc = 0.0;
        for (int b = 0; b < 3; ++b) {
          row_acc += cols[c].weight[b] * coarse(rows[r].index[a], cols[c].index[b]);
        }
        acc += rows[r].weight[a] * row_acc;
      }
      out(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

ScalarGrid2D smooth_saliency(const ScalarGrid2D& raw, int g) {
  return bspline2_upsample(pool_to_grid(raw, g), raw.height(), raw.width());
}

SaliencyMap normalize_saliency(const ScalarGrid2D& smoothed, int grid_size) {
  SaliencyMap s;
  s.grid_size = grid_size;
  s.weights = ScalarGrid2D(smoothed.height(), smoothed.width(), 1.0F);
  if (smoothed.empty()) return s;
  const auto [lo_it, hi_it] = std::minmax_element(smoothed.values().begin(), smoothed.values().end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (range < 1e-12) return s;
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    s.weights[i] = static_cast<float>(std::clamp((smoothed[i] - lo) / range, 0.0, 1.0));
  }
  return s;
}

ScalarGrid2D fuse(const ScalarGrid2D& xg, const ScalarGrid2D& xl, const SaliencyMap& s) {
  if (!xg.same_shape(xl) || !xg.same_shape(s.weights)) {
    throw InvalidInput("fuse: images and saliency map must share dimensions");
  }
  ScalarGrid2D out(xg.height(), xg.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double w = s.weights[i];
    const double a = xg[i], b = xl[i];
    const double v = w * a + (1.0 - w) * b;
    out[i] = static_cast<float>(std::clamp(v, std::min(a, b), std::max(a, b)));
  }
  return out;
}

SaliencyMap random_saliency(std::size_t height, std::size_t width, int g, RandomStream& rng) {
  if (g < 1 || static_cast<std::size_t>(g) > std::min(height, width)) {
    throw InvalidConfig("saliency grid size must satisfy 1 <= g <= min(H, W)");
  }
  const auto G = static_cast<std::size_t>(g);
  ScalarGrid2D coarse(G, G);
  for (float& v : coarse.values()) v = static_cast<float>(rng.uniform());
  return normalize_saliency(bspline2_upsample(coarse, height, width), g);
}

}  // namespace slaug
