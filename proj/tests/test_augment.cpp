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
#include <set>

#include "slaug/augment.hpp"
#include "slaug/data.hpp"
#include "slaug/error.hpp"

using namespace slaug;

namespace {

Phantom phantom(std::uint64_t seed, std::size_t size = 48) {
  PhantomSpec spec = PhantomSpec::abdominal();
  spec.size = size;
  RandomStream rng(seed);
  Phantom p = generate_phantom(spec, rng);
  p.image = minmax_normalize(p.image);
  return p;
}

std::size_t argmax(const ScalarGrid2D& g) {
  return static_cast<std::size_t>(std::max_element(g.values().begin(), g.values().end()) - g.values().begin());
}

}  // namespace

TEST_CASE("window_clip examples") {
  const auto x = ScalarGrid2D::from_rows({{-500, 0, 300}});
  CHECK(window_clip(x, -275, 125) == ScalarGrid2D::from_rows({{-275, 0, 125}}));
  const auto inside = ScalarGrid2D::from_rows({{-100, 0, 100}});
  CHECK(window_clip(inside, -275, 125) == inside);
  const ScalarGrid2D n = minmax_normalize(window_clip(x, -275, 125));
  CHECK(*std::min_element(n.values().begin(), n.values().end()) == 0.0F);
  CHECK(*std::max_element(n.values().begin(), n.values().end()) == 1.0F);
  CHECK_THROWS_AS(window_clip(x, 1, 1), InvalidRange);
}

TEST_CASE("percentile_clip matches a sort-based oracle") {
  std::vector<float> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i + 1);
  const ScalarGrid2D x(1, 1000, v);
  const ScalarGrid2D c = percentile_clip(x, 0.5);
  std::vector<float> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const float cap = sorted[994];  // the 995th value
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(c[i] == std::min(v[i], cap));
  CHECK(std::count(c.values().begin(), c.values().end(), cap) == 6);

  RandomStream rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<float> r(257);
    for (float& f : r) f = static_cast<float>(rng.uniform(-3, 3));
    const double pct = rng.uniform(0.1, 20.0);
    const ScalarGrid2D out = percentile_clip(ScalarGrid2D(1, r.size(), r), pct);
    std::vector<float> s = r;
    std::sort(s.begin(), s.end());
    const auto rank = static_cast<std::size_t>(std::ceil((100.0 - pct) * static_cast<double>(s.size()) / 100.0));
    const float oracle_cap = s[rank - 1];
    for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(out[i] == std::min(r[i], oracle_cap));
  }

  const ScalarGrid2D constant(3, 3, 2.0F);
  CHECK(percentile_clip(constant, 0.5) == constant);
  CHECK_THROWS_AS(percentile_clip(ScalarGrid2D(), 0.5), InvalidInput);
}

TEST_CASE("foreground mask uses a strict threshold") {
  const auto x = ScalarGrid2D::from_rows({{0, 0.1F}, {-1, 0.5F}});
  const ForegroundMask fg = ForegroundMask::from_image(x);
  CHECK(fg.count() == 2);
  CHECK_FALSE(fg.contains(0));
  CHECK(fg.contains(1));
}

TEST_CASE("GLA with identity draws is the identity") {
  const Phantom p = phantom(1);
  const ForegroundMask fg = ForegroundMask::from_image(p.image);
  LocationScaleDraw d;
  d.applied = true;
  double lo = 1, hi = 0;
  for (std::size_t i = 0; i < p.image.size(); ++i) {
    if (!fg.contains(i)) continue;
    lo = std::min<double>(lo, p.image[i]);
    hi = std::max<double>(hi, p.image[i]);
  }
  const double a = lo + (hi - lo) / 3, b = lo + 2 * (hi - lo) / 3;
  d.curve = make_control_points(lo, hi, false, {a, a}, {b, b});
  const ScalarGrid2D out = apply_gla(p.image, fg, d, 1000);
  for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(std::abs(out[i] - p.image[i]) < 1e-6);
}

TEST_CASE("GLA replay and blank preservation") {
  AugConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Phantom p = phantom(seed);
    const ForegroundMask fg = ForegroundMask::from_image(p.image);
    RandomStream rng(seed + 100);
    const GlaResult r = gla(p.image, fg, cfg, rng);
    REQUIRE(r.draw.applied);
    REQUIRE_FALSE(r.draw.curve.inverse());
    REQUIRE(r.draw.alpha >= 1.0 - 2 * cfg.sigma1);
    REQUIRE(r.draw.alpha <= 1.0 + 2 * cfg.sigma1);
    REQUIRE(std::abs(r.draw.beta) <= 2 * cfg.sigma2);
    const IntensityLUT lut = build_intensity_lut(r.draw.curve, cfg.lut_samples);
    for (std::size_t i = 0; i < p.image.size(); ++i) {
      if (fg.contains(i)) {
        REQUIRE(r.image[i] == static_cast<float>(r.draw.alpha * lut(p.image[i]) + r.draw.beta));
      } else {
        REQUIRE(r.image[i] == p.image[i]);
      }
    }
    RandomStream again(seed + 100);
    REQUIRE(gla(p.image, fg, cfg, again).image == r.image);
  }
}

TEST_CASE("GLA on an empty foreground returns the input with a flag") {
  const ScalarGrid2D x(4, 4, 0.0F);
  RandomStream rng(1);
  const GlaResult r = gla(x, ForegroundMask::from_image(x), AugConfig{}, rng);
  CHECK(r.foreground_empty);
  CHECK(r.image == x);
}

TEST_CASE("LLA with one class, no inversion and unit draws applies F_0") {
  const auto x = ScalarGrid2D::from_rows({{0, 0.2F, 0.4F}, {0.6F, 0.8F, 1.0F}});
  const auto m = LabelGrid2D::from_rows(2, {{0, 1, 1}, {1, 1, 1}});
  AugConfig cfg;
  cfg.sigma1 = 0;
  cfg.sigma2 = 0;
  cfg.invert_prob_other = 0;
  const ForegroundMask fg = ForegroundMask::from_image(x);
  RandomStream rng(3);
  const LlaResult r = lla(x, m, fg, cfg, rng);
  REQUIRE(r.draws[1].applied);
  CHECK_FALSE(r.draws[1].curve.inverse());
  CHECK(r.draws[1].alpha == 1.0);
  CHECK(r.draws[1].beta == 0.0);
  CHECK_FALSE(r.draws[0].applied);
  const ScalarGrid2D expect = map_intensities(x, build_intensity_lut(r.draws[1].curve, cfg.lut_samples), fg.mask);
  CHECK(r.image == expect);
}

TEST_CASE("LLA replay, blank preservation and background inversion") {
  AugConfig cfg;
  int inverted_other = 0, applied_other = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Phantom p = phantom(seed % 10);
    const ForegroundMask fg = ForegroundMask::from_image(p.image);
    RandomStream rng(seed);
    const LlaResult r = lla(p.image, p.labels, fg, cfg, rng);
    REQUIRE(r.draws[0].applied);
    REQUIRE(r.draws[0].curve.inverse());
    REQUIRE(build_intensity_lut(r.draws[0].curve, cfg.lut_samples).direction() == LutDirection::kInverse);
    for (std::size_t c = 1; c < r.draws.size(); ++c) {
      if (!r.draws[c].applied) continue;
      ++applied_other;
      inverted_other += r.draws[c].curve.inverse() ? 1 : 0;
    }
    std::vector<IntensityLUT> luts;
    for (const auto& d : r.draws) luts.push_back(build_intensity_lut(d.curve.p3.x > d.curve.p0.x ? d.curve
                                                                     : make_control_points(0, 1, false, {0, 0}, {1, 1}),
                                                                     cfg.lut_samples));
    for (std::size_t i = 0; i < p.image.size(); ++i) {
      if (!fg.contains(i)) {
        REQUIRE(r.image[i] == p.image[i]);
        continue;
      }
      const auto& d = r.draws[p.labels[i]];
      REQUIRE(d.applied);
      REQUIRE(r.image[i] == static_cast<float>(d.alpha * luts[p.labels[i]](p.image[i]) + d.beta));
    }
  }
  CHECK(inverted_other > applied_other / 4);
  CHECK(inverted_other < 3 * applied_other / 4);
}

TEST_CASE("LLA is class-local") {
  const Phantom p = phantom(5);
  const ForegroundMask fg = ForegroundMask::from_image(p.image);
  AugConfig cfg;
  RandomStream rng(8);
  const LlaResult base = lla(p.image, p.labels, fg, cfg, rng);

  ScalarGrid2D perturbed = p.image;
  for (std::size_t i = 0; i < perturbed.size(); ++i) {
    if (p.labels[i] == 2) perturbed[i] = perturbed[i] * 0.5F + 0.3F;
  }
  RandomStream rng2(8);
  const LlaResult other = lla(perturbed, p.labels, ForegroundMask::from_image(perturbed), cfg, rng2);
  for (std::size_t i = 0; i < p.image.size(); ++i) {
    if (p.labels[i] != 2) REQUIRE(other.image[i] == base.image[i]);
  }
}

TEST_CASE("LLA skips absent and constant classes") {
  const auto x = ScalarGrid2D::from_rows({{0.5F, 0.5F}, {0.2F, 0.9F}});
  const auto m = LabelGrid2D::from_rows(4, {{1, 1}, {2, 2}});
  RandomStream rng(1);
  const LlaResult r = lla(x, m, ForegroundMask::from_image(x), AugConfig{}, rng);
  CHECK_FALSE(r.draws[0].applied);
  CHECK_FALSE(r.draws[1].applied);
  CHECK(r.draws[2].applied);
  CHECK_FALSE(r.draws[3].applied);
  CHECK(r.image(0, 0) == 0.5F);
  CHECK(r.image(0, 1) == 0.5F);
}

TEST_CASE("common parameters stay within their ranges") {
  const CommonAugRanges ranges;
  RandomStream rng(2);
  for (int i = 0; i < 1000; ++i) {
    const CommonAugParams p = sample_common_params(ranges, rng);
    REQUIRE(std::abs(p.rotate_deg) <= 20.0);
    REQUIRE(std::abs(p.shift_x) <= 15.0);
    REQUIRE(std::abs(p.shift_y) <= 15.0);
    REQUIRE(std::abs(p.shear_deg) <= 20.0);
    REQUIRE(p.scale >= 0.5);
    REQUIRE(p.scale <= 1.5);
    REQUIRE(std::abs(p.brightness) <= 10.0);
    REQUIRE(p.contrast >= 0.6);
    REQUIRE(p.contrast <= 1.5);
    REQUIRE(p.gamma >= 0.2);
    REQUIRE(p.gamma <= 1.8);
    REQUIRE(p.noise_std == 0.15);
    REQUIRE(p.elastic_alpha == 20.0);
    REQUIRE(p.elastic_sigma == 5.0);
  }
}

TEST_CASE("identity common augmentation leaves all outputs unchanged") {
  const Phantom p = phantom(2);
  ScalarGrid2D xl = p.image;
  for (float& v : xl.values()) v = 1.0F - v;
  RandomStream rng(4);
  const CommonAugResult r = apply_common_augment(p.image, xl, p.labels, CommonAugParams::identity(), rng);
  CHECK(r.xg == p.image);
  CHECK(r.xl == xl);
  CHECK(r.m == p.labels);
}

TEST_CASE("rotation moves markers identically in both images") {
  CommonAugParams params;
  params.rotate_deg = 17.0;
  ScalarGrid2D xg(40, 40, 0.0F), xl(40, 40, 0.1F);
  xg(12, 25) = 1.0F;
  xl(12, 25) = 5.0F;
  xl(30, 5) = 0.2F;
  RandomStream rng(1);
  const CommonAugResult r = apply_common_augment(xg, xl, LabelGrid2D(40, 40, 2), params, rng);
  CHECK(argmax(r.xg) == argmax(r.xl));
  CHECK(argmax(r.xg) != 12 * 40 + 25);
}

TEST_CASE("common augmentation shares one field and keeps the label set") {
  const Phantom p = phantom(3);
  AugConfig cfg;
  cfg.common.noise_std = 0.0;
  cfg.common.brightness = 0.0;
  cfg.common.contrast_min = cfg.common.contrast_max = 1.0;
  cfg.common.gamma_min = cfg.common.gamma_max = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream rng(seed);
    const CommonAugResult r = common_augment(p.image, p.image, p.labels, cfg, rng);
    REQUIRE(r.xg == r.xl);
    const auto before = p.labels.histogram();
    for (std::size_t i = 0; i < r.m.size(); ++i) REQUIRE(before[r.m[i]] > 0);
    RandomStream again(seed);
    REQUIRE(common_augment(p.image, p.image, p.labels, cfg, again).xg == r.xg);
  }
}

TEST_CASE("noise is drawn independently per image") {
  const Phantom p = phantom(4);
  RandomStream rng(9);
  const CommonAugResult r = common_augment(p.image, p.image, p.labels, AugConfig{}, rng);
  CHECK_FALSE(r.xg == r.xl);
}

TEST_CASE("common augmentation rejects mismatched shapes") {
  RandomStream rng(1);
  CHECK_THROWS_AS(common_augment(ScalarGrid2D(4, 4), ScalarGrid2D(4, 5), LabelGrid2D(4, 4, 2), AugConfig{}, rng),
                  InvalidInput);
}
