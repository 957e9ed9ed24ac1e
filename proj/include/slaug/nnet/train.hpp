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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slaug/core.hpp"
#include "slaug/grid.hpp"
#include "slaug/nnet/net.hpp"
#include "slaug/random.hpp"
#include "slaug/saliency.hpp"

namespace slaug::nn {

struct TrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  int epochs = 2000;
  int decay_start_epoch = 50;  ///< rate is constant through this epoch, then decays linearly
  std::uint64_t seed = 0;

  void validate() const;
};

/**
 * Learning rate for a 1-based epoch: the initial rate for epochs
 * 1..decay_start_epoch, then linear decay reaching zero at the final epoch.
 */
double learning_rate_at(const TrainConfig& cfg, int epoch);

/// Adam with L2 weight decay folded into the gradient.
template <typename T>
class Adam {
 public:
  Adam(const std::vector<Parameter<T>>& params, const TrainConfig& cfg);

  /// Uses each parameter's .grad; .grad is left untouched.
  void step(std::vector<Parameter<T>>& params, double lr);
  long steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Training recipes of the ablation.
enum class Variant {
  kErm,           ///< common augmentation only
  kGla,           ///< GLA image only
  kLla,           ///< LLA image only
  kGlaLla,        ///< GLA and LLA images side by side, no fusion
  kSlaug,         ///< GLA image plus saliency-balanced fusion of GLA and LLA
  kRandomFusion,  ///< GLA image plus fusion through a random smooth map
};

/// Accepts erm, gla, lla, gla+lla, no-fusion (same as gla+lla), slaug, random-fusion.
std::optional<Variant> parse_variant(std::string_view name);
std::string_view variant_name(Variant v);

struct Sample {
  ScalarGrid2D image;  ///< min-max normalized slice
  LabelGrid2D labels;
};

/// Images and labels handed to the optimizer for one step.
struct PreparedBatch {
  std::vector<ScalarGrid2D> images;
  std::vector<LabelGrid2D> labels;
  std::vector<SaliencyMap> saliency;  ///< one per sample for fusion variants
};

/**
 * Augments a batch. Sample i uses rng.child(i); its GLA, LLA, common and
 * fusion draws come from the "gla", "lla", "common" and "fusion" children of
 * that stream. For fusion variants the batch is [x~g ; x~fused]; for kGlaLla it
 * is [x~g ; x~l]. Saliency comes from one gradient-only pass of `net` on the
 * x~g images, each sample's gradient taken from its own loss term.
 */
PreparedBatch prepare_batch(const TinySegNet<float>& net, std::span<const Sample> batch,
                            const AugConfig& cfg, Variant variant, RandomStream& rng,
                            int workers = 1);

struct StepMetrics {
  double loss = 0.0;
  double ce = 0.0;
  double dice = 0.0;
  std::size_t images = 0;
};

/// One optimizer step of the segmentation loss on an already prepared batch.
StepMetrics optimize_step(TinySegNet<float>& net, Adam<float>& opt, const PreparedBatch& batch,
                          double lr);

/// prepare_batch followed by optimize_step.
StepMetrics train_step(TinySegNet<float>& net, Adam<float>& opt, std::span<const Sample> batch,
                       const AugConfig& cfg, double lr, Variant variant, RandomStream& rng,
                       int workers = 1);

struct EpochLog {
  int epoch = 0;  ///< 1-based
  double lr = 0.0;
  double mean_loss = 0.0;
};

/**
 * Runs tcfg.epochs epochs over `samples`. Each epoch visits the samples in a
 * fresh Fisher-Yates order drawn from rng.child("order").child(epoch); step k
 * of the run draws its augmentation from rng.child("step").child(k). The last
 * batch of an epoch may be short. on_epoch is called after every epoch.
 */
std::vector<EpochLog> fit(TinySegNet<float>& net, std::span<const Sample> samples,
                          const TrainConfig& tcfg, const AugConfig& cfg, Variant variant,
                          RandomStream& rng, int workers = 1,
                          const std::function<void(const EpochLog&)>& on_epoch = {});

/**
 * Per-class Dice in percent for classes 1..C-1 (background excluded). A class
 * absent from both prediction and ground truth yields nullopt.
 */
std::vector<std::optional<double>> dice_score(const LabelGrid2D& pred, const LabelGrid2D& gt,
                                              int num_classes);

/// Mean over the defined entries; nullopt if none.
std::optional<double> mean_defined(std::span<const std::optional<double>> scores);

/// Dice accumulated over a whole set: per-class sums of |P & G|, |P|, |G| across images.
struct DiceReport {
  std::vector<std::optional<double>> per_class;  ///< classes 1..C-1
  double mean = 0.0;
};

DiceReport evaluate_dice(const TinySegNet<float>& net, std::span<const Sample> samples,
                         std::size_t chunk = 16);

}  // namespace slaug::nn
