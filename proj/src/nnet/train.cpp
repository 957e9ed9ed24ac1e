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
#include "slaug/nnet/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "slaug/augment.hpp"
#include "slaug/error.hpp"

namespace slaug::nn {
namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index owns its output slot.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

struct Augmented {
  ScalarGrid2D xg;
  ScalarGrid2D xl;
  LabelGrid2D m;
};

Augmented augment_sample(const Sample& s, const AugConfig& cfg, Variant variant, RandomStream rng) {
  RandomStream gla_rng = rng.child("gla");
  RandomStream lla_rng = rng.child("lla");
  RandomStream common_rng = rng.child("common");
  const ForegroundMask fg = ForegroundMask::from_image(s.image, cfg.foreground_threshold);
  ScalarGrid2D xg = s.image;
  ScalarGrid2D xl = s.image;
  if (variant != Variant::kErm && variant != Variant::kLla) xg = gla(s.image, fg, cfg, gla_rng).image;
  if (variant != Variant::kErm && variant != Variant::kGla) {
    xl = lla(s.image, s.labels, fg, cfg, lla_rng).image;
  }
  CommonAugResult c = common_augment(xg, xl, s.labels, cfg, common_rng);
  return {std::move(c.xg), std::move(c.xl), std::move(c.m)};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
  if (weight_decay < 0.0) throw InvalidConfig("weight decay must be >= 0");
  if (batch_size < 1 || epochs < 1) throw InvalidConfig("batch size and epochs must be >= 1");
  if (decay_start_epoch < 0) throw InvalidConfig("decay start epoch must be >= 0");
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  if (epoch <= cfg.decay_start_epoch || cfg.epochs <= cfg.decay_start_epoch) return cfg.learning_rate;
  const double span = cfg.epochs - cfg.decay_start_epoch;
  const double remaining = std::max(0, cfg.epochs - epoch);
  return cfg.learning_rate * remaining / span;
}

template <typename T>
Adam<T>::Adam(const std::vector<Parameter<T>>& params, const TrainConfig& cfg)
    : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps), weight_decay_(cfg.weight_decay) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(std::vector<Parameter<T>>& params, double lr) {
  if (params.size() != m_.size()) throw InvalidInput("Adam: parameter list changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = params[k];
    if (p.grad.size() != p.value.size()) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad.data[i]) + weight_decay_ * p.value.data[i];
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
      const double update = lr * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + eps_);
      p.value.data[i] = static_cast<T>(p.value.data[i] - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

std::optional<Variant> parse_variant(std::string_view name) {
  if (name == "erm") return Variant::kErm;
  if (name == "gla") return Variant::kGla;
  if (name == "lla") return Variant::kLla;
  if (name == "gla+lla" || name == "no-fusion") return Variant::kGlaLla;
  if (name == "slaug") return Variant::kSlaug;
  if (name == "random-fusion") return Variant::kRandomFusion;
  return std::nullopt;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kErm: return "erm";
    case Variant::kGla: return "gla";
    case Variant::kLla: return "lla";
    case Variant::kGlaLla: return "gla+lla";
    case Variant::kSlaug: return "slaug";
    case Variant::kRandomFusion: return "random-fusion";
  }
  return "unknown";
}

PreparedBatch prepare_batch(const TinySegNet<float>& net, std::span<const Sample> batch,
                            const AugConfig& cfg, Variant variant, RandomStream& rng, int workers) {
  if (batch.empty()) throw InvalidInput("prepare_batch: empty batch");
  std::vector<Augmented> aug(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    aug[i] = augment_sample(batch[i], cfg, variant, rng.child(static_cast<std::uint64_t>(i)));
  });

  PreparedBatch out;
  auto push = [&out](const ScalarGrid2D& x, const LabelGrid2D& m) {
    out.images.push_back(x);
    out.labels.push_back(m);
  };
  switch (variant) {
    case Variant::kErm:
    case Variant::kGla:
      for (const Augmented& a : aug) push(a.xg, a.m);
      return out;
    case Variant::kLla:
      for (const Augmented& a : aug) push(a.xl, a.m);
      return out;
    case Variant::kGlaLla:
      for (const Augmented& a : aug) push(a.xg, a.m);
      for (const Augmented& a : aug) push(a.xl, a.m);
      return out;
    case Variant::kSlaug:
    case Variant::kRandomFusion:
      break;
  }

  const std::size_t H = aug.front().xg.height(), W = aug.front().xg.width();
  if (variant == Variant::kSlaug) {
    std::vector<ScalarGrid2D> xg;
    std::vector<LabelGrid2D> m;
    for (const Augmented& a : aug) {
      xg.push_back(a.xg);
      m.push_back(a.m);
    }
    const Tensor<float> grad = input_gradient(net, to_tensor<float>(xg), flatten_labels(m));
    const std::size_t channels = grad.c, hw = grad.plane();
    for (std::size_t n = 0; n < aug.size(); ++n) {
      std::vector<ScalarGrid2D> per_channel;
      for (std::size_t c = 0; c < channels; ++c) {
        const float* src = grad.data.data() + (n * channels + c) * hw;
        per_channel.emplace_back(H, W, std::vector<float>(src, src + hw));
      }
      out.saliency.push_back(
          normalize_saliency(smooth_saliency(gradient_magnitude(per_channel), cfg.grid_size),
                             cfg.grid_size));
    }
  } else {
    for (std::size_t n = 0; n < aug.size(); ++n) {
      RandomStream fusion_rng = rng.child(static_cast<std::uint64_t>(n)).child("fusion");
      out.saliency.push_back(random_saliency(H, W, cfg.grid_size, fusion_rng));
    }
  }
  for (const Augmented& a : aug) push(a.xg, a.m);
  for (std::size_t n = 0; n < aug.size(); ++n) {
    push(fuse(aug[n].xg, aug[n].xl, out.saliency[n]), aug[n].m);
  }
  return out;
}

StepMetrics optimize_step(TinySegNet<float>& net, Adam<float>& opt, const PreparedBatch& batch,
                          double lr) {
  Tape<float> tape;
  const auto g = net.build(tape, to_tensor<float>(batch.images), false, true);
  const std::vector<std::uint8_t> labels = flatten_labels(batch.labels);
  const Var loss = seg_loss(tape, g.probs, labels, Reduction::kMean);
  tape.backward(loss);
  auto& params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].grad = tape.grad(g.params[i]);
  const LossValue parts = seg_loss_value(tape.value(g.probs), labels);
  opt.step(params, lr);

  StepMetrics m;
  m.loss = static_cast<double>(tape.value(loss).data[0]);
  m.ce = parts.ce;
  m.dice = parts.dice;
  m.images = batch.images.size();
  return m;
}

StepMetrics train_step(TinySegNet<float>& net, Adam<float>& opt, std::span<const Sample> batch,
                       const AugConfig& cfg, double lr, Variant variant, RandomStream& rng,
                       int workers) {
  const PreparedBatch prepared = prepare_batch(net, batch, cfg, variant, rng, workers);
  return optimize_step(net, opt, prepared, lr);
}

std::vector<EpochLog> fit(TinySegNet<float>& net, std::span<const Sample> samples,
                          const TrainConfig& tcfg, const AugConfig& cfg, Variant variant,
                          RandomStream& rng, int workers,
                          const std::function<void(const EpochLog&)>& on_epoch) {
  tcfg.validate();
  cfg.validate();
  if (samples.empty()) throw InvalidInput("fit: no training samples");
  Adam<float> opt(net.parameters(), tcfg);
  RandomStream order_rng = rng.child("order");
  RandomStream step_rng = rng.child("step");
  const std::size_t batch = static_cast<std::size_t>(tcfg.batch_size);
  std::vector<std::size_t> order(samples.size());
  std::vector<EpochLog> log;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    RandomStream shuffle = order_rng.child(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    const double lr = learning_rate_at(tcfg, epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    std::vector<Sample> chunk;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      chunk.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) chunk.push_back(samples[order[i]]);
      RandomStream srng = step_rng.child(step++);
      loss_sum += train_step(net, opt, chunk, cfg, lr, variant, srng, workers).loss;
      ++steps;
    }
    log.push_back({epoch, lr, loss_sum / static_cast<double>(steps)});
    if (on_epoch) on_epoch(log.back());
  }
  return log;
}

std::vector<std::optional<double>> dice_score(const LabelGrid2D& pred, const LabelGrid2D& gt,
                                              int num_classes) {
  if (!pred.same_shape(gt)) throw InvalidInput("dice_score: shapes differ");
  if (num_classes < 2) throw InvalidInput("dice_score: need at least two classes");
  const auto C = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> inter(C, 0), p(C, 0), g(C, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t a = pred[i], b = gt[i];
    if (a < C) ++p[a];
    if (b < C) ++g[b];
    if (a == b && a < C) ++inter[a];
  }
  std::vector<std::optional<double>> out;
  for (std::size_t c = 1; c < C; ++c) {
    if (p[c] + g[c] == 0) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(100.0 * 2.0 * static_cast<double>(inter[c]) / static_cast<double>(p[c] + g[c]));
    }
  }
  return out;
}

std::optional<double> mean_defined(std::span<const std::optional<double>> scores) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    if (s) {
      sum += *s;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

DiceReport evaluate_dice(const TinySegNet<float>& net, std::span<const Sample> samples,
                         std::size_t chunk) {
  const auto C = static_cast<std::size_t>(net.num_classes());
  std::vector<std::size_t> inter(C, 0), p(C, 0), g(C, 0);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<ScalarGrid2D> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(samples[i].image);
    const std::vector<LabelGrid2D> preds = predict(net, std::span<const ScalarGrid2D>(images));
    for (std::size_t i = start; i < end; ++i) {
      const LabelGrid2D& pr = preds[i - start];
      const LabelGrid2D& gt = samples[i].labels;
      if (!pr.same_shape(gt)) throw InvalidInput("evaluate_dice: prediction shape differs");
      for (std::size_t k = 0; k < gt.size(); ++k) {
        const std::size_t a = pr[k], b = gt[k];
        if (b >= C) throw InvalidInput("evaluate_dice: label exceeds network class count");
        ++p[a];
        ++g[b];
        if (a == b) ++inter[a];
      }
    }
  }
  DiceReport report;
  for (std::size_t c = 1; c < C; ++c) {
    if (p[c] + g[c] == 0) {
      report.per_class.push_back(std::nullopt);
    } else {
      report.per_class.push_back(100.0 * 2.0 * static_cast<double>(inter[c]) /
                                 static_cast<double>(p[c] + g[c]));
    }
  }
  report.mean = mean_defined(report.per_class).value_or(0.0);
  return report;
}

}  // namespace slaug::nn
