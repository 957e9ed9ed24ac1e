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
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "slaug/error.hpp"
#include "slaug/saliency.hpp"

using namespace slaug;

namespace {

double quad_bspline(double t) {
  t = std::abs(t);
  if (t >= 1.5) return 0.0;
  if (t >= 0.5) return (1.5 - t) * (1.5 - t) / 2.0;
  return 0.75 - t * t;
}

// Brute force: every coarse index in a padded range, clamped at the edges.
double upsample_oracle(const ScalarGrid2D& coarse, std::size_t H, std::size_t W, std::size_t r, std::size_t c) {
  const auto gh = static_cast<long>(coarse.height()), gw = static_cast<long>(coarse.width());
  const double u = (r + 0.5) * static_cast<double>(gh) / static_cast<double>(H) - 0.5;
  const double v = (c + 0.5) * static_cast<double>(gw) / static_cast<double>(W) - 0.5;
  double acc = 0.0;
  for (long i = -4; i < gh + 4; ++i) {
    for (long j = -4; j < gw + 4; ++j) {
      const auto ci = static_cast<std::size_t>(std::clamp(i, 0L, gh - 1));
      const auto cj = static_cast<std::size_t>(std::clamp(j, 0L, gw - 1));
      acc += quad_bspline(u - static_cast<double>(i)) * quad_bspline(v - static_cast<double>(j)) * coarse(ci, cj);
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("gradient magnitude across channels") {
  const ScalarGrid2D a = ScalarGrid2D::from_rows({{3, 0}, {-1, 1}});
  const ScalarGrid2D b = ScalarGrid2D::from_rows({{4, 0}, {0, -1}});
  const ScalarGrid2D both[] = {a, b};
  const ScalarGrid2D m = gradient_magnitude(both);
  CHECK(m(0, 0) == doctest::Approx(5.0));
  CHECK(m(0, 1) == 0.0F);
  CHECK(m(1, 0) == doctest::Approx(1.0));
  CHECK(m(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(gradient_magnitude({}), InvalidInput);
  const ScalarGrid2D mixed[] = {a, ScalarGrid2D(3, 2)};
  CHECK_THROWS_AS(gradient_magnitude(mixed), InvalidInput);
}

TEST_CASE("pooling averages integer-division cells") {
  const ScalarGrid2D x = ScalarGrid2D::from_rows({{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}, {13, 14, 15, 16}});
  const ScalarGrid2D p = pool_to_grid(x, 2);
  CHECK(p == ScalarGrid2D::from_rows({{3.5F, 5.5F}, {11.5F, 13.5F}}));
  const ScalarGrid2D p3 = pool_to_grid(x, 3);
  CHECK(p3(0, 0) == 1.0F);
  CHECK(p3(2, 2) == doctest::Approx((11 + 12 + 15 + 16) / 4.0));
  CHECK_THROWS_AS(pool_to_grid(x, 0), InvalidConfig);
  CHECK_THROWS_AS(pool_to_grid(x, 5), InvalidConfig);
}

TEST_CASE("B-spline upsampling matches a brute-force oracle") {
  RandomStream rng(7);
  for (int g = 1; g <= 5; ++g) {
    ScalarGrid2D coarse(static_cast<std::size_t>(g), static_cast<std::size_t>(g));
    for (float& v : coarse.values()) v = static_cast<float>(rng.uniform());
    const std::size_t H = 23, W = 37;
    const ScalarGrid2D up = bspline2_upsample(coarse, H, W);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) REQUIRE(up(r, c) == doctest::Approx(upsample_oracle(coarse, H, W, r, c)).epsilon(1e-6));
    }
  }
}

TEST_CASE("upsampling reproduces constants and is linear") {
  const ScalarGrid2D k(3, 3, 0.4F);
  const ScalarGrid2D up = bspline2_upsample(k, 31, 17);
  for (float v : up.values()) REQUIRE(v == doctest::Approx(0.4));

  RandomStream rng(3);
  ScalarGrid2D a(3, 3), b(3, 3), sum(3, 3);
  for (std::size_t i = 0; i < 9; ++i) {
    a[i] = static_cast<float>(rng.uniform());
    b[i] = static_cast<float>(rng.uniform());
    sum[i] = 2.0F * a[i] + b[i];
  }
  const ScalarGrid2D ua = bspline2_upsample(a, 20, 20), ub = bspline2_upsample(b, 20, 20);
  const ScalarGrid2D us = bspline2_upsample(sum, 20, 20);
  for (std::size_t i = 0; i < us.size(); ++i) REQUIRE(us[i] == doctest::Approx(2.0 * ua[i] + ub[i]).epsilon(1e-5));
}

TEST_CASE("g = 1 gives a constant map that normalizes to ones") {
  RandomStream rng(1);
  ScalarGrid2D raw(16, 16);
  for (float& v : raw.values()) v = static_cast<float>(rng.uniform(0, 5));
  const ScalarGrid2D s = smooth_saliency(raw, 1);
  for (float v : s.values()) REQUIRE(v == doctest::Approx(s[0]));
  const SaliencyMap n = normalize_saliency(s, 1);
  for (float v : n.weights.values()) REQUIRE(v == 1.0F);
}

TEST_CASE("normalized saliency spans [0, 1]") {
  RandomStream rng(2);
  ScalarGrid2D raw(24, 24);
  for (float& v : raw.values()) v = static_cast<float>(rng.uniform(0, 3));
  const SaliencyMap s = normalize_saliency(smooth_saliency(raw, 3), 3);
  CHECK(s.grid_size == 3);
  const auto [lo, hi] = std::minmax_element(s.weights.values().begin(), s.weights.values().end());
  CHECK(*lo == 0.0F);
  CHECK(*hi == 1.0F);
}

TEST_CASE("fusion examples and convexity") {
  const ScalarGrid2D xg = ScalarGrid2D::from_rows({{1, 0}, {0.5F, -2}});
  const ScalarGrid2D xl = ScalarGrid2D::from_rows({{0, 1}, {0.5F, 2}});
  SaliencyMap s{ScalarGrid2D::from_rows({{1, 0}, {0.3F, 0.25F}}), 3};
  const ScalarGrid2D f = fuse(xg, xl, s);
  CHECK(f(0, 0) == 1.0F);
  CHECK(f(0, 1) == 1.0F);
  CHECK(f(1, 0) == 0.5F);
  CHECK(f(1, 1) == doctest::Approx(0.25 * -2 + 0.75 * 2));

  RandomStream rng(5);
  ScalarGrid2D a(30, 30), b(30, 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>(rng.uniform(-3, 3));
    b[i] = static_cast<float>(rng.uniform(-3, 3));
  }
  const SaliencyMap w = random_saliency(30, 30, 3, rng);
  const ScalarGrid2D out = fuse(a, b, w);
  for (std::size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out[i] >= std::min(a[i], b[i]));
    REQUIRE(out[i] <= std::max(a[i], b[i]));
  }
  CHECK_THROWS_AS(fuse(a, ScalarGrid2D(30, 29), w), InvalidInput);
}

TEST_CASE("random saliency is deterministic and bounded") {
  RandomStream a(11), b(11);
  const SaliencyMap s = random_saliency(32, 40, 3, a);
  CHECK(s.weights == random_saliency(32, 40, 3, b).weights);
  for (float v : s.weights.values()) {
    REQUIRE(v >= 0.0F);
    REQUIRE(v <= 1.0F);
  }
  RandomStream c(1);
  CHECK_THROWS_AS(random_saliency(4, 4, 5, c), InvalidConfig);
}
