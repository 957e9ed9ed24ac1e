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
#include "slaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "slaug/error.hpp"

namespace slaug {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
  bool usable() const { return count > 0 && lo < hi; }
};

// scipy.ndimage "reflect": (d c b a | a b c d | d c b a)
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

void gaussian_blur_reflect(std::vector<double>& field, std::size_t h, std::size_t w, double sigma) {
  if (sigma <= 0.0) return;
  const std::vector<double> k = gaussian_kernel(sigma);
  const std::size_t radius = k.size() / 2;
  // Blur every line of length n with stride `step`, reading through a reflect-padded copy.
  auto blur_lines = [&](std::size_t lines, std::size_t n, std::size_t line_step, std::size_t step) {
    std::vector<double> padded(n + 2 * radius);
    for (std::size_t l = 0; l < lines; ++l) {
      double* base = field.data() + l * line_step;
      for (std::size_t i = 0; i < padded.size(); ++i) {
        const auto src = reflect_index(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(radius),
                                       static_cast<std::ptrdiff_t>(n));
        padded[i] = base[static_cast<std::size_t>(src) * step];
      }
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) acc += k[j] * padded[i + j];
        base[i * step] = acc;
      }
    }
  };
  blur_lines(h, w, w, 1);
  blur_lines(w, h, 1, w);
}

}  // namespace

ForegroundMask ForegroundMask::from_image(const ScalarGrid2D& x, float threshold) {
  ForegroundMask fg;
  fg.threshold = threshold;
  fg.mask = ScalarGrid2D(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) fg.mask[i] = x[i] > threshold ? 1.0F : 0.0F;
  return fg;
}

std::size_t ForegroundMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](float v) { return v > 0.5F; }));
}

ScalarGrid2D window_clip(const ScalarGrid2D& x, double lo, double hi) {
  if (!(lo < hi)) throw InvalidRange("window_clip: lo must be < hi");
  ScalarGrid2D out = x;
  const auto flo = static_cast<float>(lo);
  const auto fhi = static_cast<float>(hi);
  for (float& v : out.values()) v = std::clamp(v, flo, fhi);
  return out;
}

ScalarGrid2D percentile_clip(const ScalarGrid2D& x, double upper_pct) {
  if (x.empty()) throw InvalidInput("percentile_clip: empty grid");
  if (!(upper_pct > 0.0 && upper_pct < 100.0)) {
    throw InvalidRange("percentile_clip: upper_pct must lie in (0, 100)");
  }
  std::vector<float> sorted(x.values().begin(), x.values().end());
  const auto n = static_cast<double>(sorted.size());
  // Nearest rank: smallest k with k >= q * N / 100.
  auto rank = static_cast<std::size_t>(std::ceil((100.0 - upper_pct) * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  const float cap = sorted[rank - 1];
  ScalarGrid2D out = x;
  for (float& v : out.values()) v = std::min(v, cap);
  return out;
}

LocationScaleDraw sample_location_scale(double v_low, double v_high, bool invert,
                                        const AugConfig& cfg, RandomStream& rng) {
  LocationScaleDraw d;
  d.applied = true;
  d.curve = sample_control_points(v_low, v_high, invert, rng);
  d.alpha = sample_trunc_gauss(1.0, cfg.sigma1, cfg.trunc_k, rng);
  d.beta = sample_trunc_gauss(0.0, cfg.sigma2, cfg.trunc_k, rng);
  return d;
}

ScalarGrid2D apply_gla(const ScalarGrid2D& x, const ForegroundMask& fg,
                       const LocationScaleDraw& draw, int lut_samples) {
  if (!x.same_shape(fg.mask)) throw InvalidInput("gla: foreground mask shape differs from image");
  ScalarGrid2D out = x;
  if (!draw.applied) return out;
  const IntensityLUT lut = build_intensity_lut(draw.curve, lut_samples);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (fg.contains(i)) out[i] = static_cast<float>(draw.alpha * lut(x[i]) + draw.beta);
  }
  return out;
}

GlaResult gla(const ScalarGrid2D& x, const ForegroundMask& fg, const AugConfig& cfg,
              RandomStream& rng) {
  if (!x.same_shape(fg.mask)) throw InvalidInput("gla: foreground mask shape differs from image");
  Range range;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (fg.contains(i)) range.add(x[i]);
  }
  GlaResult result;
  result.foreground_empty = range.count == 0;
  if (!range.usable()) {
    result.image = x;
    return result;
  }
  result.draw = sample_location_scale(range.lo, range.hi, false, cfg, rng);
  result.image = apply_gla(x, fg, result.draw, cfg.lut_samples);
  return result;
}

ScalarGrid2D apply_lla(const ScalarGrid2D& x, const LabelGrid2D& m, const ForegroundMask& fg,
                       const std::vector<LocationScaleDraw>& draws, int lut_samples) {
  if (!x.same_shape(m) || !x.same_shape(fg.mask)) {
    throw InvalidInput("lla: image, labels and foreground mask must share dimensions");
  }
  if (draws.size() != static_cast<std::size_t>(m.num_classes())) {
    throw InvalidInput("lla: need exactly one draw per class");
  }
  ScalarGrid2D out = x;
  for (std::size_t c = 0; c < draws.size(); ++c) {
    const LocationScaleDraw& d = draws[c];
    if (!d.applied) continue;
    const IntensityLUT lut = build_intensity_lut(d.curve, lut_samples);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (m[i] == c && fg.contains(i)) out[i] = static_cast<float>(d.alpha * lut(x[i]) + d.beta);
    }
  }
  return out;
}

LlaResult lla(const ScalarGrid2D& x, const LabelGrid2D& m, const ForegroundMask& fg,
              const AugConfig& cfg, RandomStream& rng) {
  if (!x.same_shape(m) || !x.same_shape(fg.mask)) {
    throw InvalidInput("lla: image, labels and foreground mask must share dimensions");
  }
  const auto num_classes = static_cast<std::size_t>(m.num_classes());
  std::vector<Range> ranges(num_classes);
  std::size_t foreground = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!fg.contains(i)) continue;
    ranges[m[i]].add(x[i]);
    ++foreground;
  }

  LlaResult result;
  result.draws.resize(num_classes);
  result.foreground_empty = foreground == 0;
  if (result.foreground_empty) {
    result.image = x;
    return result;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    RandomStream class_rng = rng.child(static_cast<std::uint64_t>(c));
    const double p = c == 0 ? cfg.invert_prob_background : cfg.invert_prob_other;
    const bool invert = class_rng.bernoulli(p);
    if (!ranges[c].usable()) continue;
    result.draws[c] = sample_location_scale(ranges[c].lo, ranges[c].hi, invert, cfg, class_rng);
  }
  result.image = apply_lla(x, m, fg, result.draws, cfg.lut_samples);
  return result;
}

CommonAugParams sample_common_params(const CommonAugRanges& r, RandomStream& rng) {
  CommonAugParams p;
  p.rotate_deg = rng.uniform(-r.rotate_deg, r.rotate_deg);
  p.shift_x = rng.uniform(-r.shift_px, r.shift_px);
  p.shift_y = rng.uniform(-r.shift_px, r.shift_px);
  p.shear_deg = rng.uniform(-r.shear_deg, r.shear_deg);
  p.scale = rng.uniform(r.scale_min, r.scale_max);
  p.elastic_alpha = r.elastic_alpha;
  p.elastic_sigma = r.elastic_sigma;
  p.brightness = rng.uniform(-r.brightness, r.brightness);
  p.contrast = rng.uniform(r.contrast_min, r.contrast_max);
  p.gamma = rng.uniform(r.gamma_min, r.gamma_max);
  p.noise_std = r.noise_std;
  return p;
}

SamplingField make_sampling_field(std::size_t height, std::size_t width,
                                  const CommonAugParams& params, RandomStream& elastic_rng) {
  SamplingField f;
  f.height = height;
  f.width = width;
  const std::size_t n = height * width;
  std::vector<double> disp_r(n, 0.0), disp_c(n, 0.0);
  if (params.elastic_alpha > 0.0) {
    for (double& v : disp_r) v = elastic_rng.uniform(-1.0, 1.0);
    for (double& v : disp_c) v = elastic_rng.uniform(-1.0, 1.0);
    gaussian_blur_reflect(disp_r, height, width, params.elastic_sigma);
    gaussian_blur_reflect(disp_c, height, width, params.elastic_sigma);
    for (double& v : disp_r) v *= params.elastic_alpha;
    for (double& v : disp_c) v *= params.elastic_alpha;
  }

  // Forward affine: dst = M (src - center) + center + shift with M = R * Shear * Scale.
  const double th = params.rotate_deg * kDegToRad;
  const double sh = std::tan(params.shear_deg * kDegToRad);
  const double s = params.scale;
  const double cos_t = std::cos(th), sin_t = std::sin(th);
  // (x = column, y = row)
  const double m00 = cos_t * s, m01 = (cos_t * sh - sin_t) * s;
  const double m10 = sin_t * s, m11 = (sin_t * sh + cos_t) * s;
  const double det = m00 * m11 - m01 * m10;
  const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;

  f.src_row.resize(n);
  f.src_col.resize(n);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t i = r * width + c;
      const double qx = static_cast<double>(c) + disp_c[i] - cx - params.shift_x;
      const double qy = static_cast<double>(r) + disp_r[i] - cy - params.shift_y;
      f.src_col[i] = i00 * qx + i01 * qy + cx;
      f.src_row[i] = i10 * qx + i11 * qy + cy;
    }
  }
  return f;
}

ScalarGrid2D warp_bilinear(const ScalarGrid2D& x, const SamplingField& field) {
  if (field.height != x.height() || field.width != x.width()) {
    throw InvalidInput("warp_bilinear: field shape differs from image");
  }
  const auto H = static_cast<std::ptrdiff_t>(x.height());
  const auto W = static_cast<std::ptrdiff_t>(x.width());
  auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) -> double {
    if (r < 0 || r >= H || c < 0 || c >= W) return 0.0;
    return x[static_cast<std::size_t>(r * W + c)];
  };
  ScalarGrid2D out(x.height(), x.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double fr = field.src_row[i], fc = field.src_col[i];
    const double r0 = std::floor(fr), c0 = std::floor(fc);
    const double wr = fr - r0, wc = fc - c0;
    const auto ir = static_cast<std::ptrdiff_t>(r0);
    const auto ic = static_cast<std::ptrdiff_t>(c0);
    const double v = (1 - wr) * ((1 - wc) * at(ir, ic) + wc * at(ir, ic + 1)) +
                     wr * ((1 - wc) * at(ir + 1, ic) + wc * at(ir + 1, ic + 1));
    out[i] = static_cast<float>(v);
  }
  return out;
}

LabelGrid2D warp_nearest(const LabelGrid2D& m, const SamplingField& field) {
  if (field.height != m.height() || field.width != m.width()) {
    throw InvalidInput("warp_nearest: field shape differs from labels");
  }
  const auto H = static_cast<std::ptrdiff_t>(m.height());
  const auto W = static_cast<std::ptrdiff_t>(m.width());
  std::vector<std::uint8_t> labels(m.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<std::ptrdiff_t>(std::lround(field.src_row[i]));
    const auto c = static_cast<std::ptrdiff_t>(std::lround(field.src_col[i]));
    if (r >= 0 && r < H && c >= 0 && c < W) labels[i] = m[static_cast<std::size_t>(r * W + c)];
  }
  return LabelGrid2D(m.height(), m.width(), m.num_classes(), std::move(labels));
}

ScalarGrid2D apply_intensity_augment(const ScalarGrid2D& x, const CommonAugParams& params,
                                     RandomStream& noise_rng) {
  std::vector<double> v(x.values().begin(), x.values().end());
  if (v.empty()) return x;

  const double offset = params.brightness / 255.0;
  for (double& p : v) p += offset;

  if (params.contrast != 1.0) {
    double mean = 0.0;
    for (double p : v) mean += p;
    mean /= static_cast<double>(v.size());
    for (double& p : v) p = (p - mean) * params.contrast + mean;
  }

  if (params.gamma != 1.0) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (range > 0.0) {
      for (double& p : v) p = std::pow((p - lo) / range, params.gamma) * range + lo;
    }
  }

  if (params.noise_std > 0.0) {
    for (double& p : v) p += noise_rng.normal(0.0, params.noise_std);
  }

  ScalarGrid2D out(x.height(), x.width());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

CommonAugResult apply_common_augment(const ScalarGrid2D& xg, const ScalarGrid2D& xl,
                                     const LabelGrid2D& m, const CommonAugParams& params,
                                     RandomStream& rng) {
  if (!xg.same_shape(xl) || !xg.same_shape(m)) {
    throw InvalidInput("common_augment: inputs must share dimensions");
  }
  RandomStream elastic_rng = rng.child("elastic");
  RandomStream noise_g = rng.child("noise-g");
  RandomStream noise_l = rng.child("noise-l");
  const SamplingField field = make_sampling_field(xg.height(), xg.width(), params, elastic_rng);

  CommonAugResult out;
  out.params = params;
  out.xg = apply_intensity_augment(warp_bilinear(xg, field), params, noise_g);
  out.xl = apply_intensity_augment(warp_bilinear(xl, field), params, noise_l);
  out.m = warp_nearest(m, field);
  return out;
}

CommonAugResult common_augment(const ScalarGrid2D& xg, const ScalarGrid2D& xl,
                               const LabelGrid2D& m, const AugConfig& cfg, RandomStream& rng) {
  RandomStream param_rng = rng.child("params");
  const CommonAugParams params = sample_common_params(cfg.common, param_rng);
  return apply_common_augment(xg, xl, m, params, rng);
}

}  // namespace slaug
