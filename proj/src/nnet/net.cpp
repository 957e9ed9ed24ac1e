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
#include "slaug/nnet/net.hpp"

#include <algorithm>
#include <cmath>

#include "../binary_io.hpp"
#include "slaug/error.hpp"
#include "slaug/random.hpp"

namespace slaug::nn {
namespace {

constexpr std::string_view kCheckpointMagic = "SLAUGNET";
constexpr std::uint16_t kCheckpointVersion = 1;

struct LayerSpec {
  const char* name;
  int cin;
  int cout;
  int k;
};

std::vector<LayerSpec> layer_specs(const NetConfig& cfg) {
  const int w0 = cfg.widths[0], w1 = cfg.widths[1], w2 = cfg.widths[2];
  return {
      {"enc1a", cfg.in_channels, w0, 3}, {"enc1b", w0, w0, 3},
      {"enc2a", w0, w1, 3},              {"enc2b", w1, w1, 3},
      {"mida", w1, w2, 3},               {"midb", w2, w2, 3},
      {"dec2", w2 + w1, w1, 3},          {"dec1", w1 + w0, w0, 3},
      {"head", w0, cfg.num_classes, 1},
  };
}

}  // namespace

template <typename T>
TinySegNet<T>::TinySegNet(const NetConfig& config) : config_(config) {
  if (config.in_channels < 1 || config.num_classes < 2 || config.num_classes > 255) {
    throw InvalidConfig("TinySegNet: need in_channels >= 1 and 2 <= num_classes <= 255");
  }
  for (int w : config.widths) {
    if (w < 1) throw InvalidConfig("TinySegNet: channel widths must be positive");
  }
  RandomStream rng(config.seed);
  for (const LayerSpec& spec : layer_specs(config)) {
    RandomStream layer_rng = rng.child(spec.name);
    const auto cout = static_cast<std::size_t>(spec.cout);
    const auto cin = static_cast<std::size_t>(spec.cin);
    const auto k = static_cast<std::size_t>(spec.k);
    Parameter<T> weight{std::string(spec.name) + ".weight", Tensor<T>(cout, cin, k, k), {}};
    const bool zero = config.init == InitScheme::kHeNormalZeroHead && std::string(spec.name) == "head";
    if (!zero) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
      for (T& v : weight.value.data) v = static_cast<T>(layer_rng.normal(0.0, stddev));
    }
    params_.push_back(std::move(weight));
    params_.push_back({std::string(spec.name) + ".bias", Tensor<T>(1, cout, 1, 1), {}});
  }
}

template <typename T>
std::size_t TinySegNet<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
typename TinySegNet<T>::Graph TinySegNet<T>::build(Tape<T>& tape, Tensor<T> input,
                                                   bool input_requires_grad,
                                                   bool params_require_grad) const {
  if (input.c != static_cast<std::size_t>(config_.in_channels)) {
    throw InvalidInput("TinySegNet: input channel count mismatch");
  }
  if (input.h % 4 != 0 || input.w % 4 != 0 || input.h == 0 || input.w == 0) {
    throw InvalidInput("TinySegNet: input height and width must be positive multiples of 4");
  }
  Graph g;
  g.input = input_requires_grad ? tape.variable(std::move(input)) : tape.constant(std::move(input));
  for (const Parameter<T>& p : params_) {
    g.params.push_back(params_require_grad ? tape.variable(p.value) : tape.constant(p.value));
  }
  std::size_t layer = 0;
  auto conv = [&](Var x) {
    const Var w = g.params[2 * layer];
    const Var b = g.params[2 * layer + 1];
    const int pad = static_cast<int>(tape.value(w).h / 2);
    ++layer;
    return conv2d(tape, x, w, b, pad);
  };
  const Var e1 = relu(tape, conv(relu(tape, conv(g.input))));
  const Var e2 = relu(tape, conv(relu(tape, conv(max_pool2(tape, e1)))));
  const Var mid = relu(tape, conv(relu(tape, conv(max_pool2(tape, e2)))));
  const Var d2 = relu(tape, conv(concat_channels(tape, upsample2(tape, mid), e2)));
  const Var d1 = relu(tape, conv(concat_channels(tape, upsample2(tape, d2), e1)));
  g.probs = softmax_channels(tape, conv(d1));
  return g;
}

template <typename T>
Tensor<T> to_tensor(std::span<const ScalarGrid2D> images) {
  if (images.empty()) throw InvalidInput("to_tensor: no images");
  const ScalarGrid2D& first = images.front();
  Tensor<T> t(images.size(), 1, first.height(), first.width());
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (!images[n].same_shape(first)) throw InvalidInput("to_tensor: image shapes differ");
    std::transform(images[n].values().begin(), images[n].values().end(),
                   t.data.begin() + static_cast<std::ptrdiff_t>(n * t.plane()),
                   [](float v) { return static_cast<T>(v); });
  }
  return t;
}

std::vector<std::uint8_t> flatten_labels(std::span<const LabelGrid2D> labels) {
  std::vector<std::uint8_t> flat;
  for (const LabelGrid2D& m : labels) flat.insert(flat.end(), m.labels().begin(), m.labels().end());
  return flat;
}

template <typename T>
Tensor<T> forward_batch(const TinySegNet<T>& net, const Tensor<T>& input) {
  Tape<T> tape;
  const auto g = net.build(tape, input, false, false);
  return tape.value(g.probs);
}

template <typename T>
std::vector<ScalarGrid2D> forward(const TinySegNet<T>& net, const ScalarGrid2D& x) {
  const Tensor<T> probs = forward_batch(net, to_tensor<T>(std::span(&x, 1)));
  std::vector<ScalarGrid2D> out;
  for (std::size_t c = 0; c < probs.c; ++c) {
    std::vector<float> v(probs.plane());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = static_cast<float>(probs.data[c * probs.plane() + p]);
    out.emplace_back(x.height(), x.width(), std::move(v));
  }
  return out;
}

template <typename T>
std::vector<LabelGrid2D> predict(const TinySegNet<T>& net, std::span<const ScalarGrid2D> images) {
  std::vector<LabelGrid2D> out;
  if (images.empty()) return out;
  const Tensor<T> probs = forward_batch(net, to_tensor<T>(images));
  const std::size_t hw = probs.plane();
  for (std::size_t n = 0; n < probs.n; ++n) {
    std::vector<std::uint8_t> labels(hw, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      const T* px = probs.data.data() + n * probs.c * hw + p;
      std::size_t best = 0;
      for (std::size_t c = 1; c < probs.c; ++c) {
        if (px[c * hw] > px[best * hw]) best = c;
      }
      labels[p] = static_cast<std::uint8_t>(best);
    }
    out.emplace_back(probs.h, probs.w, static_cast<int>(probs.c), std::move(labels));
  }
  return out;
}

template <typename T>
LossValue seg_loss_value(const Tensor<T>& probs, std::span<const std::uint8_t> labels, double eps) {
  Tape<T> tape;
  const Var p = tape.constant(probs);
  const double total = static_cast<double>(tape.value(seg_loss(tape, p, labels, Reduction::kMean, eps)).data[0]);
  // Split the total: CE from its definition, Dice as the remainder.
  const std::size_t N = probs.n, C = probs.c, HW = probs.plane();
  double ce = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t q = 0; q < HW; ++q) {
      const double v = probs.data[(n * C + labels[n * HW + q]) * HW + q];
      ce -= std::log(std::max(v, 1e-12));
    }
  }
  ce /= static_cast<double>(N * HW);
  return {ce, total - ce};
}

template <typename T>
Tensor<T> input_gradient(const TinySegNet<T>& net, const Tensor<T>& input,
                         std::span<const std::uint8_t> labels) {
  Tape<T> tape;
  const auto g = net.build(tape, input, true, false);
  const Var loss = seg_loss(tape, g.probs, labels, Reduction::kSum);
  tape.backward(loss);
  return tape.grad(g.input);
}

template <typename T>
std::vector<ScalarGrid2D> input_gradient(const TinySegNet<T>& net, const ScalarGrid2D& x,
                                         const LabelGrid2D& m) {
  if (!x.same_shape(m)) throw InvalidInput("input_gradient: image and label shapes differ");
  if (m.num_classes() != net.num_classes()) throw InvalidInput("input_gradient: class count mismatch");
  const Tensor<T> grad = input_gradient(net, to_tensor<T>(std::span(&x, 1)), m.labels());
  std::vector<ScalarGrid2D> out;
  for (std::size_t c = 0; c < grad.c; ++c) {
    std::vector<float> v(grad.plane());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = static_cast<float>(grad.data[c * grad.plane() + p]);
    out.emplace_back(x.height(), x.width(), std::move(v));
  }
  return out;
}

void save_checkpoint(const TinySegNet<float>& net, const std::filesystem::path& path) {
  detail::ByteWriter w;
  const NetConfig& cfg = net.config();
  w.bytes(kCheckpointMagic);
  w.u16(kCheckpointVersion);
  w.u16(static_cast<std::uint16_t>(cfg.in_channels));
  w.u16(static_cast<std::uint16_t>(cfg.num_classes));
  for (int width : cfg.widths) w.u16(static_cast<std::uint16_t>(width));
  w.u32(static_cast<std::uint32_t>(net.parameters().size()));
  for (const Parameter<float>& p : net.parameters()) {
    w.u32(4);
    w.u32(static_cast<std::uint32_t>(p.value.n));
    w.u32(static_cast<std::uint32_t>(p.value.c));
    w.u32(static_cast<std::uint32_t>(p.value.h));
    w.u32(static_cast<std::uint32_t>(p.value.w));
    for (float v : p.value.data) w.f32(v);
  }
  w.write_file(path);
}

TinySegNet<float> load_checkpoint(const std::filesystem::path& path) {
  try {
    auto r = detail::ByteReader::from_file(path);
    if (r.bytes(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
      throw FormatError("bad checkpoint magic", 0);
    }
    const std::size_t version_at = r.offset();
    if (r.u16("version") != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version", version_at);
    }
    NetConfig cfg;
    cfg.in_channels = r.u16("in_channels");
    cfg.num_classes = r.u16("num_classes");
    for (int& width : cfg.widths) width = r.u16("width");
    cfg.init = InitScheme::kHeNormalZeroHead;  // values are overwritten below
    TinySegNet<float> net(cfg);
    const std::size_t count_at = r.offset();
    if (r.u32("tensor count") != net.parameters().size()) {
      throw FormatError("tensor count does not match architecture", count_at);
    }
    for (Parameter<float>& p : net.parameters()) {
      const std::size_t shape_at = r.offset();
      if (r.u32("rank") != 4) throw FormatError("tensor rank must be 4", shape_at);
      const std::uint32_t n = r.u32("dim"), c = r.u32("dim"), h = r.u32("dim"), wd = r.u32("dim");
      if (n != p.value.n || c != p.value.c || h != p.value.h || wd != p.value.w) {
        throw FormatError("shape of " + p.name + " does not match architecture", shape_at);
      }
      for (float& v : p.value.data) v = r.f32("payload");
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after payload", r.offset());
    return net;
  } catch (const FormatError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const InvalidConfig& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
}

#define SLAUG_INSTANTIATE_NET(T)                                                                   \
  template class TinySegNet<T>;                                                                    \
  template Tensor<T> to_tensor<T>(std::span<const ScalarGrid2D>);                                  \
  template Tensor<T> forward_batch<T>(const TinySegNet<T>&, const Tensor<T>&);                     \
  template std::vector<ScalarGrid2D> forward<T>(const TinySegNet<T>&, const ScalarGrid2D&);        \
  template std::vector<LabelGrid2D> predict<T>(const TinySegNet<T>&, std::span<const ScalarGrid2D>); \
  template LossValue seg_loss_value<T>(const Tensor<T>&, std::span<const std::uint8_t>, double);   \
  template Tensor<T> input_gradient<T>(const TinySegNet<T>&, const Tensor<T>&,                     \
                                       std::span<const std::uint8_t>);                             \
  template std::vector<ScalarGrid2D> input_gradient<T>(const TinySegNet<T>&, const ScalarGrid2D&,  \
                                                       const LabelGrid2D&);

SLAUG_INSTANTIATE_NET(float)
SLAUG_INSTANTIATE_NET(double)

#undef SLAUG_INSTANTIATE_NET

}  // namespace slaug::nn
