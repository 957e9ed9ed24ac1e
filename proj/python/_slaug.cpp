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
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>

#include "slaug/augment.hpp"
#include "slaug/bezier.hpp"
#include "slaug/core.hpp"
#include "slaug/data.hpp"
#include "slaug/error.hpp"
#include "slaug/nnet/net.hpp"
#include "slaug/random.hpp"
#include "slaug/saliency.hpp"

namespace py = pybind11;
using namespace slaug;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ScalarGrid2D to_grid(const FloatArray& a) {
  if (a.ndim() != 2) throw InvalidInput("expected a 2-D float array");
  const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
  return ScalarGrid2D(h, w, std::vector<float>(a.data(), a.data() + h * w));
}

LabelGrid2D to_labels(const LabelArray& a, int num_classes) {
  if (a.ndim() != 2) throw InvalidInput("expected a 2-D uint8 label array");
  const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
  std::vector<std::uint8_t> v(a.data(), a.data() + h * w);
  if (num_classes <= 0) {
    const int top = v.empty() ? 0 : *std::max_element(v.begin(), v.end());
    num_classes = std::max(2, top + 1);
  }
  return LabelGrid2D(h, w, num_classes, std::move(v));
}

py::array_t<float> to_array(const ScalarGrid2D& g) {
  py::array_t<float> out({g.height(), g.width()});
  std::memcpy(out.mutable_data(), g.values().data(), g.size() * sizeof(float));
  return out;
}

py::array_t<std::uint8_t> to_array(const LabelGrid2D& m) {
  py::array_t<std::uint8_t> out({m.height(), m.width()});
  std::memcpy(out.mutable_data(), m.labels().data(), m.size());
  return out;
}

}  // namespace

PYBIND11_MODULE(_slaug, m) {
  m.doc() = "Saliency-balancing location-scale augmentation (C++ core bindings)";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<InvalidRange>(m, "InvalidRange", PyExc_ValueError);
  py::register_exception<InvalidConfig>(m, "InvalidConfig", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);

  py::class_<RandomStream>(m, "RandomStream")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def("child", py::overload_cast<std::uint64_t>(&RandomStream::child, py::const_), py::arg("label"))
      .def("child", py::overload_cast<std::string_view>(&RandomStream::child, py::const_), py::arg("label"))
      .def("next_u64", &RandomStream::next_u64)
      .def("uniform", py::overload_cast<>(&RandomStream::uniform))
      .def("normal", py::overload_cast<>(&RandomStream::normal))
      .def_property_readonly("key", &RandomStream::key)
      .def_property_readonly("counter", &RandomStream::counter);

  py::class_<CommonAugRanges>(m, "CommonAugRanges")
      .def(py::init<>())
      .def_readwrite("rotate_deg", &CommonAugRanges::rotate_deg)
      .def_readwrite("shift_px", &CommonAugRanges::shift_px)
      .def_readwrite("shear_deg", &CommonAugRanges::shear_deg)
      .def_readwrite("scale_min", &CommonAugRanges::scale_min)
      .def_readwrite("scale_max", &CommonAugRanges::scale_max)
      .def_readwrite("elastic_alpha", &CommonAugRanges::elastic_alpha)
      .def_readwrite("elastic_sigma", &CommonAugRanges::elastic_sigma)
      .def_readwrite("brightness", &CommonAugRanges::brightness)
      .def_readwrite("contrast_min", &CommonAugRanges::contrast_min)
      .def_readwrite("contrast_max", &CommonAugRanges::contrast_max)
      .def_readwrite("gamma_min", &CommonAugRanges::gamma_min)
      .def_readwrite("gamma_max", &CommonAugRanges::gamma_max)
      .def_readwrite("noise_std", &CommonAugRanges::noise_std);

  py::class_<AugConfig>(m, "AugConfig")
      .def(py::init<>())
      .def_readwrite("sigma1", &AugConfig::sigma1)
      .def_readwrite("sigma2", &AugConfig::sigma2)
      .def_readwrite("trunc_k", &AugConfig::trunc_k)
      .def_readwrite("invert_prob_background", &AugConfig::invert_prob_background)
      .def_readwrite("invert_prob_other", &AugConfig::invert_prob_other)
      .def_readwrite("grid_size", &AugConfig::grid_size)
      .def_readwrite("lut_samples", &AugConfig::lut_samples)
      .def_readwrite("foreground_threshold", &AugConfig::foreground_threshold)
      .def_readwrite("common", &AugConfig::common)
      .def("validate", &AugConfig::validate);

  py::class_<CurvePoint>(m, "CurvePoint")
      .def(py::init<double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0)
      .def_readwrite("x", &CurvePoint::x)
      .def_readwrite("y", &CurvePoint::y)
      .def("__repr__", [](const CurvePoint& p) {
        return "CurvePoint(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
      });

  py::class_<BezierControlPoints>(m, "BezierControlPoints")
      .def_readonly("p0", &BezierControlPoints::p0)
      .def_readonly("p1", &BezierControlPoints::p1)
      .def_readonly("p2", &BezierControlPoints::p2)
      .def_readonly("p3", &BezierControlPoints::p3)
      .def_property_readonly("inverse", &BezierControlPoints::inverse)
      .def("evaluate", &BezierControlPoints::evaluate, py::arg("s"));

  m.def("make_control_points", &make_control_points, py::arg("v_low"), py::arg("v_high"), py::arg("invert"),
        py::arg("p1"), py::arg("p2"));
  m.def("sample_control_points", &sample_control_points, py::arg("v_low"), py::arg("v_high"), py::arg("invert"),
        py::arg("rng"));

  py::class_<IntensityLUT>(m, "IntensityLUT")
      .def_property_readonly("xs", [](const IntensityLUT& l) { return std::vector<double>(l.xs().begin(), l.xs().end()); })
      .def_property_readonly("ys", [](const IntensityLUT& l) { return std::vector<double>(l.ys().begin(), l.ys().end()); })
      .def_property_readonly("inverse", [](const IntensityLUT& l) { return l.direction() == LutDirection::kInverse; })
      .def("__call__", [](const IntensityLUT& l, double x) { return l(x); });

  m.def("build_intensity_lut", &build_intensity_lut, py::arg("curve"), py::arg("samples") = 1000);
  m.def(
      "map_intensities",
      [](const FloatArray& x, const IntensityLUT& lut, const FloatArray& region) {
        return to_array(map_intensities(to_grid(x), lut, to_grid(region)));
      },
      py::arg("x"), py::arg("lut"), py::arg("region"));

  m.def(
      "minmax_normalize", [](const FloatArray& x) { return to_array(minmax_normalize(to_grid(x))); }, py::arg("x"));
  m.def(
      "decompose_by_class",
      [](const FloatArray& x, const LabelArray& labels, int num_classes) {
        std::vector<py::array_t<float>> out;
        for (const ScalarGrid2D& g : decompose_by_class(to_grid(x), to_labels(labels, num_classes))) {
          out.push_back(to_array(g));
        }
        return out;
      },
      py::arg("x"), py::arg("labels"), py::arg("num_classes") = 0);
  m.def(
      "recompose",
      [](const std::vector<FloatArray>& parts) {
        std::vector<ScalarGrid2D> grids;
        for (const auto& p : parts) grids.push_back(to_grid(p));
        return to_array(recompose(grids));
      },
      py::arg("parts"));
  m.def("sample_trunc_gauss", &sample_trunc_gauss, py::arg("mean"), py::arg("sigma"), py::arg("k"), py::arg("rng"));

  py::class_<LocationScaleDraw>(m, "LocationScaleDraw")
      .def_readonly("applied", &LocationScaleDraw::applied)
      .def_readonly("curve", &LocationScaleDraw::curve)
      .def_readonly("alpha", &LocationScaleDraw::alpha)
      .def_readonly("beta", &LocationScaleDraw::beta);

  m.def(
      "gla",
      [](const FloatArray& x, const AugConfig& cfg, RandomStream& rng) {
        const ScalarGrid2D g = to_grid(x);
        const GlaResult r = gla(g, ForegroundMask::from_image(g, cfg.foreground_threshold), cfg, rng);
        return py::make_tuple(to_array(r.image), r.draw);
      },
      py::arg("x"), py::arg("cfg"), py::arg("rng"),
      "Global location-scale augmentation; returns (image, draw).");
  m.def(
      "lla",
      [](const FloatArray& x, const LabelArray& labels, const AugConfig& cfg, RandomStream& rng, int num_classes) {
        const ScalarGrid2D g = to_grid(x);
        const LlaResult r = lla(g, to_labels(labels, num_classes),
                                ForegroundMask::from_image(g, cfg.foreground_threshold), cfg, rng);
        return py::make_tuple(to_array(r.image), r.draws);
      },
      py::arg("x"), py::arg("labels"), py::arg("cfg"), py::arg("rng"), py::arg("num_classes") = 0,
      "Local location-scale augmentation; returns (image, per-class draws).");
  m.def(
      "common_augment",
      [](const FloatArray& xg, const FloatArray& xl, const LabelArray& labels, const AugConfig& cfg,
         RandomStream& rng, int num_classes) {
        const CommonAugResult r = common_augment(to_grid(xg), to_grid(xl), to_labels(labels, num_classes), cfg, rng);
        return py::make_tuple(to_array(r.xg), to_array(r.xl), to_array(r.m));
      },
      py::arg("xg"), py::arg("xl"), py::arg("labels"), py::arg("cfg"), py::arg("rng"), py::arg("num_classes") = 0,
      "Shared geometric and intensity augmentation; returns (xg, xl, labels).");

  m.def(
      "gradient_magnitude",
      [](const std::vector<FloatArray>& channels) {
        std::vector<ScalarGrid2D> grids;
        for (const auto& c : channels) grids.push_back(to_grid(c));
        return to_array(gradient_magnitude(grids));
      },
      py::arg("channels"));
  m.def(
      "smooth_saliency", [](const FloatArray& raw, int g) { return to_array(smooth_saliency(to_grid(raw), g)); },
      py::arg("raw"), py::arg("grid_size"));
  m.def(
      "normalize_saliency",
      [](const FloatArray& smoothed) { return to_array(normalize_saliency(to_grid(smoothed)).weights); },
      py::arg("smoothed"));
  m.def(
      "fuse",
      [](const FloatArray& xg, const FloatArray& xl, const FloatArray& s) {
        return to_array(fuse(to_grid(xg), to_grid(xl), SaliencyMap{to_grid(s), 0}));
      },
      py::arg("xg"), py::arg("xl"), py::arg("saliency"));
  m.def(
      "random_saliency",
      [](std::size_t h, std::size_t w, int g, RandomStream& rng) { return to_array(random_saliency(h, w, g, rng).weights); },
      py::arg("height"), py::arg("width"), py::arg("grid_size"), py::arg("rng"));
  m.def(
      "saliency_map",
      [](const std::filesystem::path& checkpoint, const FloatArray& x, const LabelArray& labels, int g) {
        const nn::TinySegNet<float> net = nn::load_checkpoint(checkpoint);
        const ScalarGrid2D img = to_grid(x);
        const auto grads = nn::input_gradient(net, img, to_labels(labels, net.num_classes()));
        return to_array(normalize_saliency(smooth_saliency(gradient_magnitude(grads), g), g).weights);
      },
      py::arg("checkpoint"), py::arg("x"), py::arg("labels"), py::arg("grid_size") = 3,
      "Normalized, smoothed input-gradient saliency of a checkpointed network.");

  m.def(
      "generate_phantom",
      [](RandomStream& rng, std::size_t size) {
        PhantomSpec spec = PhantomSpec::abdominal();
        spec.size = size;
        const Phantom p = generate_phantom(spec, rng);
        return py::make_tuple(to_array(p.image), to_array(p.labels));
      },
      py::arg("rng"), py::arg("size") = 96, "Abdomen-like phantom; returns (image, labels).");
  m.def(
      "shift_domain",
      [](const FloatArray& x, const LabelArray& labels, RandomStream& rng) {
        const ShiftResult r = shift_domain(to_grid(x), to_labels(labels, 5), PhantomSpec::abdominal(), rng);
        return py::make_tuple(to_array(r.image), r.shift.alpha, r.shift.beta);
      },
      py::arg("x"), py::arg("labels"), py::arg("rng"),
      "Class-level shift of an abdominal phantom; returns (image, alpha, beta).");

  m.def(
      "write_image", [](const FloatArray& x, const std::filesystem::path& p) { write_raster(to_grid(x), p); },
      py::arg("x"), py::arg("path"));
  m.def(
      "write_labels",
      [](const LabelArray& labels, const std::filesystem::path& p) { write_raster(to_labels(labels, 0), p); },
      py::arg("labels"), py::arg("path"));
  m.def(
      "read_image", [](const std::filesystem::path& p) { return to_array(read_scalar_grid(p)); }, py::arg("path"));
  m.def(
      "read_labels", [](const std::filesystem::path& p) { return to_array(read_label_grid(p)); }, py::arg("path"));
}
