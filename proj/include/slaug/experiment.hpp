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

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slaug/core.hpp"
#include "slaug/data.hpp"
#include "slaug/nnet/net.hpp"
#include "slaug/nnet/train.hpp"

namespace slaug {

/**
 * @brief Single-source domain generalization run on phantoms.
 *
 * Per seed: source train and val phantoms, plus target phantoms passed through
 * one class-level domain shift drawn for that seed. Every variant starts from
 * the same initial weights and sees the same sample order.
 */
struct ExperimentConfig {
  PhantomSpec spec = PhantomSpec::abdominal();
  int train_slices = 200;
  int val_slices = 40;
  int target_slices = 60;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<nn::Variant> variants{nn::Variant::kErm, nn::Variant::kGla, nn::Variant::kLla,
                                    nn::Variant::kGlaLla, nn::Variant::kSlaug};
  nn::TrainConfig train;
  AugConfig aug;
  std::array<int, 3> widths{8, 16, 32};
  int workers = 1;

  /// Default schedule: 200 slices, 60 epochs, batch 8, rate 2e-3 held for 15 epochs.
  static ExperimentConfig desk();
  /**
   * Reduced schedule for a one-core budget of about 15 minutes over three
   * seeds: 64 slices, 32 epochs, batch 2, rate 2e-3 held for 16 epochs, and the
   * ERM, GLA+LLA, SLAug and random-fusion variants.
   */
  static ExperimentConfig compact();
  void validate() const;
};

struct PhantomSplit {
  std::vector<nn::Sample> train;
  std::vector<nn::Sample> val;     ///< source domain
  std::vector<nn::Sample> target;  ///< shifted domain
  DomainShift shift;
};

/// Phantoms for one seed; all images min-max normalized.
PhantomSplit make_phantom_split(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunResult {
  nn::Variant variant = nn::Variant::kErm;
  std::uint64_t seed = 0;
  nn::DiceReport source;
  nn::DiceReport target;
  double final_loss = 0.0;
};

struct VariantSummary {
  nn::Variant variant = nn::Variant::kErm;
  double source_mean = 0.0;  ///< over seeds
  double target_mean = 0.0;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  ///< seed-major, variants in configured order
  std::vector<VariantSummary> summary;

  const VariantSummary* find(nn::Variant v) const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const std::string&)>& log = {});

/// Tab-separated report; contains no timings, so equal inputs give equal bytes.
std::string format_report(const ExperimentConfig& cfg, const ExperimentResult& result);

}  // namespace slaug
