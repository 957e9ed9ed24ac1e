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
#include "slaug/experiment.hpp"

#include <cstdio>
#include <sstream>

#include "slaug/error.hpp"

namespace slaug {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); }

std::vector<nn::Sample> make_samples(const PhantomSpec& spec, RandomStream rng, int count,
                                     const DomainShift* shift) {
  std::vector<nn::Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    RandomStream r = rng.child(static_cast<std::uint64_t>(i));
    Phantom p = generate_phantom(spec, r);
    ScalarGrid2D x = shift ? apply_domain_shift(p.image, p.labels, *shift) : p.image;
    out.push_back({minmax_normalize(x), std::move(p.labels)});
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.train.epochs = 60;
  c.train.batch_size = 8;
  c.train.learning_rate = 2e-3;
  c.train.decay_start_epoch = 15;
  return c;
}

ExperimentConfig ExperimentConfig::compact() {
  ExperimentConfig c = desk();
  c.train_slices = 64;
  c.train.epochs = 32;
  c.train.batch_size = 2;
  c.train.decay_start_epoch = 16;
  c.variants = {nn::Variant::kErm, nn::Variant::kGlaLla, nn::Variant::kSlaug, nn::Variant::kRandomFusion};
  return c;
}

void ExperimentConfig::validate() const {
  spec.validate();
  train.validate();
  aug.validate();
  if (train_slices < 1 || val_slices < 1 || target_slices < 1) {
    throw InvalidConfig("experiment needs at least one train, val and target slice");
  }
  if (seeds.empty()) throw InvalidConfig("experiment needs at least one seed");
  if (variants.empty()) throw InvalidConfig("experiment needs at least one variant");
  if (spec.size % 4 != 0) throw InvalidConfig("phantom size must be divisible by 4");
}

PhantomSplit make_phantom_split(const ExperimentConfig& cfg, std::uint64_t seed) {
  RandomStream root(seed);
  PhantomSplit split;
  RandomStream domain = root.child("domain");
  split.shift = sample_domain_shift(cfg.spec, domain);
  split.train = make_samples(cfg.spec, root.child("train"), cfg.train_slices, nullptr);
  split.val = make_samples(cfg.spec, root.child("val"), cfg.val_slices, nullptr);
  split.target = make_samples(cfg.spec, root.child("target"), cfg.target_slices, &split.shift);
  return split;
}

const VariantSummary* ExperimentResult::find(nn::Variant v) const {
  for (const VariantSummary& s : summary) {
    if (s.variant == v) return &s;
  }
  return nullptr;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const std::string&)>& log) {
  cfg.validate();
  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds) {
    const PhantomSplit split = make_phantom_split(cfg, seed);
    RandomStream root(seed);
    nn::NetConfig net_cfg;
    net_cfg.num_classes = cfg.spec.num_classes;
    net_cfg.widths = cfg.widths;
    net_cfg.seed = root.child("init").next_u64();
    for (nn::Variant variant : cfg.variants) {
      nn::TinySegNet<float> net(net_cfg);
      RandomStream train_rng = root.child("fit");
      const std::string name(nn::variant_name(variant));
      const auto epochs = nn::fit(net, split.train, cfg.train, cfg.aug, variant, train_rng, cfg.workers,
                                  [&](const nn::EpochLog& e) {
                                    if (log) {
                                      log("seed " + std::to_string(seed) + " " + name + " epoch " +
                                          std::to_string(e.epoch) + " loss " + fmt(e.mean_loss));
                                    }
                                  });
      RunResult run;
      run.variant = variant;
      run.seed = seed;
      run.source = nn::evaluate_dice(net, split.val);
      run.target = nn::evaluate_dice(net, split.target);
      run.final_loss = epochs.back().mean_loss;
      if (log) {
        log("seed " + std::to_string(seed) + " " + name + " source " + fmt(run.source.mean) + " target " +
            fmt(run.target.mean));
      }
      result.runs.push_back(std::move(run));
    }
  }
  for (nn::Variant v : cfg.variants) {
    VariantSummary s;
    s.variant = v;
    std::size_t n = 0;
    for (const RunResult& r : result.runs) {
      if (r.variant != v) continue;
      s.source_mean += r.source.mean;
      s.target_mean += r.target.mean;
      ++n;
    }
    s.source_mean /= static_cast<double>(n);
    s.target_mean /= static_cast<double>(n);
    result.summary.push_back(s);
  }
  return result;
}

std::string format_report(const ExperimentConfig& cfg, const ExperimentResult& result) {
  std::ostringstream out;
  out << "# slaug phantom report\n";
  out << "# size\t" << cfg.spec.size << "\tclasses\t" << cfg.spec.num_classes << "\ttrain\t" << cfg.train_slices
      << "\tval\t" << cfg.val_slices << "\ttarget\t" << cfg.target_slices << "\n";
  out << "# epochs\t" << cfg.train.epochs << "\tbatch\t" << cfg.train.batch_size << "\tlr\t"
      << fmt(cfg.train.learning_rate) << "\tdecay_start\t" << cfg.train.decay_start_epoch << "\tsigma1\t"
      << fmt(cfg.aug.sigma1) << "\tsigma2\t" << fmt(cfg.aug.sigma2) << "\tgrid\t" << cfg.aug.grid_size << "\n";
  out << "variant\tseed\tsource_mean\ttarget_mean";
  for (int c = 1; c < cfg.spec.num_classes; ++c) out << "\ttarget_c" << c;
  out << "\tfinal_loss\n";
  for (const RunResult& r : result.runs) {
    out << nn::variant_name(r.variant) << '\t' << r.seed << '\t' << fmt(r.source.mean) << '\t'
        << fmt(r.target.mean);
    for (const auto& d : r.target.per_class) out << '\t' << fmt(d);
    out << '\t' << fmt(r.final_loss) << '\n';
  }
  out << "\nvariant\tmean_source\tmean_target\n";
  for (const VariantSummary& s : result.summary) {
    out << nn::variant_name(s.variant) << '\t' << fmt(s.source_mean) << '\t' << fmt(s.target_mean) << '\n';
  }
  return out.str();
}

}  // namespace slaug
