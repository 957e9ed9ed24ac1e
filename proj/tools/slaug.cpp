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
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "slaug/augment.hpp"
#include "slaug/bezier.hpp"
#include "slaug/core.hpp"
#include "slaug/data.hpp"
#include "slaug/error.hpp"
#include "slaug/experiment.hpp"
#include "slaug/nnet/net.hpp"
#include "slaug/nnet/train.hpp"
#include "slaug/saliency.hpp"

namespace fs = std::filesystem;
using namespace slaug;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kInputError = 2, kCheckpointError = 3, kMismatch = 4 };

/// Checkpoint and data disagree on dimensions or class count.
struct MismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SLAUG_LOG: quiet | info (default) | debug
enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("SLAUG_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet" || v == "0" || v == "error") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[slaug] " << msg << '\n';
}

void debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[slaug] " << msg << '\n';
}

struct Options {
  std::string data;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 1;
  int workers = 1;

  AugConfig aug;

  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<double> lr;
  std::optional<int> decay_start;
  std::string variant = "slaug";

  // phantom
  bool compact = false;
  int seeds = 3;
  std::optional<int> train_slices;
  std::optional<int> val_slices;
  std::optional<int> target_slices;
  std::vector<std::string> variants;
  bool random_fusion = false;
  bool save_data = false;

  // augment / eval
  bool panels = false;
  std::string split = "test";
};

void add_aug_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--sigma1", o.aug.sigma1, "Scale std of alpha ~ TN(1, sigma1)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--sigma2", o.aug.sigma2, "Location std of beta ~ TN(0, sigma2)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--grid-size", o.aug.grid_size, "Saliency grid size g")->check(CLI::PositiveNumber);
  cmd->add_option("--invert-prob-bg", o.aug.invert_prob_background, "LLA inversion probability, background")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--invert-prob", o.aug.invert_prob_other, "LLA inversion probability, other classes")
      ->check(CLI::Range(0.0, 1.0));
}

void add_train_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", o.batch, "Source slices per step")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--decay-start", o.decay_start, "Last epoch at the initial rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--workers", o.workers, "Augmentation worker threads")->check(CLI::PositiveNumber);
}

void apply_train_overrides(const Options& o, nn::TrainConfig& t) {
  if (o.epochs) t.epochs = *o.epochs;
  if (o.batch) t.batch_size = *o.batch;
  if (o.lr) t.learning_rate = *o.lr;
  if (o.decay_start) t.decay_start_epoch = *o.decay_start;
}

nn::Variant variant_or_throw(const std::string& name) {
  const auto v = nn::parse_variant(name);
  if (!v) throw InvalidConfig("unknown variant '" + name + "'");
  return *v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

ScalarGrid2D label_image(const LabelGrid2D& m) {
  std::vector<float> v(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) v[i] = static_cast<float>(m[i]);
  return ScalarGrid2D(m.height(), m.width(), std::move(v));
}

nn::TinySegNet<float> load_net(const std::string& path) {
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path);
  return nn::load_checkpoint(path);
}

/// Relabels with the network class count; throws MismatchError on incompatible data.
LabelGrid2D check_compatible(const nn::TinySegNet<float>& net, const DatasetItem& item) {
  const std::size_t h = item.image.height(), w = item.image.width();
  if (h % 4 != 0 || w % 4 != 0) {
    throw MismatchError("slice " + item.id + " is " + std::to_string(h) + "x" + std::to_string(w) +
                        "; the network needs dimensions divisible by 4");
  }
  for (std::uint8_t v : item.labels.labels()) {
    if (v >= net.num_classes()) {
      throw MismatchError("slice " + item.id + " has label " + std::to_string(v) + " but the checkpoint has " +
                          std::to_string(net.num_classes()) + " classes");
    }
  }
  return LabelGrid2D(h, w, net.num_classes(),
                     std::vector<std::uint8_t>(item.labels.labels().begin(), item.labels.labels().end()));
}

SaliencyMap saliency_of(const nn::TinySegNet<float>& net, const ScalarGrid2D& x, const LabelGrid2D& m, int g) {
  const std::vector<ScalarGrid2D> grad = nn::input_gradient(net, x, m);
  return normalize_saliency(smooth_saliency(gradient_magnitude(grad), g), g);
}

// ---------------------------------------------------------------------------

int cmd_augment(const Options& o) {
  o.aug.validate();
  const auto items = load_dataset(o.data);
  std::optional<nn::TinySegNet<float>> net;
  if (!o.checkpoint.empty()) {
    net.emplace(load_net(o.checkpoint));
  } else {
    info("no checkpoint given: writing GLA/LLA pairs only (saliency needs a trained network)");
  }
  const fs::path out(o.out);
  for (const char* sub : {"gla", "lla"}) fs::create_directories(out / sub);
  if (net) {
    fs::create_directories(out / "saliency");
    fs::create_directories(out / "fused");
  }
  if (o.panels) fs::create_directories(out / "panels");

  const RandomStream root(o.seed);
  for (const DatasetItem& item : items) {
    const LabelGrid2D labels = net ? check_compatible(*net, item) : item.labels;
    RandomStream rng = root.child(item.id);
    RandomStream gla_rng = rng.child("gla");
    RandomStream lla_rng = rng.child("lla");
    const ForegroundMask fg = ForegroundMask::from_image(item.image, o.aug.foreground_threshold);
    const GlaResult g = gla(item.image, fg, o.aug, gla_rng);
    const LlaResult l = lla(item.image, labels, fg, o.aug, lla_rng);
    if (g.foreground_empty) info("slice " + item.id + " has no foreground; copied unchanged");
    write_raster(g.image, out / "gla" / (item.id + ".slimg"));
    write_raster(l.image, out / "lla" / (item.id + ".slimg"));
    std::vector<std::pair<std::string, ScalarGrid2D>> panel{{"x", item.image}, {"gla", g.image}, {"lla", l.image}};
    if (net) {
      const SaliencyMap s = saliency_of(*net, g.image, labels, o.aug.grid_size);
      const ScalarGrid2D fused = fuse(g.image, l.image, s);
      write_raster(s.weights, out / "saliency" / (item.id + ".slimg"));
      write_raster(fused, out / "fused" / (item.id + ".slimg"));
      panel.emplace_back("saliency", s.weights);
      panel.emplace_back("fused", fused);
    }
    if (o.panels) export_panel(panel, out / "panels" / (item.id + ".pgm"));
    debug("augmented " + item.id);
  }
  info("augmented " + std::to_string(items.size()) + " slices into " + out.string());
  return kOk;
}

int cmd_phantom(const Options& o) {
  ExperimentConfig cfg = o.compact ? ExperimentConfig::compact() : ExperimentConfig::desk();
  cfg.aug = o.aug;
  cfg.workers = o.workers;
  apply_train_overrides(o, cfg.train);
  if (o.train_slices) cfg.train_slices = *o.train_slices;
  if (o.val_slices) cfg.val_slices = *o.val_slices;
  if (o.target_slices) cfg.target_slices = *o.target_slices;
  if (o.seeds < 1) throw InvalidConfig("--seeds must be >= 1");
  cfg.seeds.clear();
  for (int i = 0; i < o.seeds; ++i) cfg.seeds.push_back(o.seed + static_cast<std::uint64_t>(i));
  if (!o.variants.empty()) {
    cfg.variants.clear();
    for (const std::string& v : o.variants) cfg.variants.push_back(variant_or_throw(v));
  }
  if (o.random_fusion &&
      std::find(cfg.variants.begin(), cfg.variants.end(), nn::Variant::kRandomFusion) == cfg.variants.end()) {
    cfg.variants.push_back(nn::Variant::kRandomFusion);
  }
  cfg.validate();

  const fs::path out(o.out);
  fs::create_directories(out);
  if (o.save_data) {
    for (std::uint64_t seed : cfg.seeds) {
      const PhantomSplit split = make_phantom_split(cfg, seed);
      std::vector<DatasetItem> items;
      auto add = [&items](const std::vector<nn::Sample>& samples, const std::string& prefix, const std::string& tag) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
          items.push_back({prefix + std::to_string(i), tag, samples[i].image, samples[i].labels});
        }
      };
      add(split.train, "train", "train");
      add(split.val, "val", "val");
      add(split.target, "target", "test");
      save_dataset(out / ("data-seed" + std::to_string(seed)), items);
    }
  }
  const ExperimentResult result = run_experiment(cfg, [](const std::string& msg) {
    if (msg.find(" epoch ") != std::string::npos) {
      debug(msg);
    } else {
      info(msg);
    }
  });
  const std::string report = format_report(cfg, result);
  write_text(out / "report.tsv", report);
  std::cout << report;
  return kOk;
}

std::vector<nn::Sample> samples_for(const std::vector<DatasetItem>& items, const std::string& split,
                                    const nn::TinySegNet<float>* net) {
  std::vector<nn::Sample> out;
  for (const DatasetItem& item : items) {
    if (split != "all" && item.split != split) continue;
    out.push_back({item.image, net ? check_compatible(*net, item) : item.labels});
  }
  return out;
}

int cmd_train(const Options& o) {
  nn::TrainConfig tcfg;
  tcfg.seed = o.seed;
  apply_train_overrides(o, tcfg);
  tcfg.validate();
  o.aug.validate();
  const nn::Variant variant = variant_or_throw(o.variant);
  const auto items = load_dataset(o.data);
  if (items.empty()) throw InvalidInput("dataset has no entries");
  int classes = 2;
  for (const DatasetItem& item : items) classes = std::max(classes, item.labels.num_classes());

  nn::NetConfig ncfg;
  ncfg.num_classes = classes;
  RandomStream root(o.seed);
  ncfg.seed = root.child("init").next_u64();
  nn::TinySegNet<float> net(ncfg);
  const std::vector<nn::Sample> train = samples_for(items, "train", &net);
  if (train.empty()) throw InvalidInput("dataset has no train split");

  const fs::path out(o.out);
  fs::create_directories(out);
  std::ofstream log(out / "loss.tsv", std::ios::trunc);
  log << "epoch\tlr\tmean_loss\n";
  RandomStream fit_rng = root.child("fit");
  nn::fit(net, train, tcfg, o.aug, variant, fit_rng, o.workers, [&](const nn::EpochLog& e) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.6f\n", e.epoch, e.lr, e.mean_loss);
    log << buf << std::flush;
    debug("epoch " + std::to_string(e.epoch) + " loss " + fixed4(e.mean_loss));
  });
  nn::save_checkpoint(net, out / "checkpoint.slnet");
  info("wrote " + (out / "checkpoint.slnet").string());
  return kOk;
}

int cmd_eval(const Options& o) {
  const nn::TinySegNet<float> net = load_net(o.checkpoint);
  const auto items = load_dataset(o.data);
  const std::vector<nn::Sample> samples = samples_for(items, o.split, &net);
  if (samples.empty()) throw InvalidInput("no slices in split '" + o.split + "'");
  const nn::DiceReport report = nn::evaluate_dice(net, samples);
  std::string text = "class\tdice\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    text += std::to_string(c + 1) + '\t' + (report.per_class[c] ? fixed4(*report.per_class[c]) : "nan") + '\n';
  }
  text += "mean\t" + fixed4(report.mean) + '\n';
  const fs::path out(o.out);
  fs::create_directories(out);
  write_text(out / "dice.tsv", text);
  std::cout << text;
  return kOk;
}

/// The curve's LUT drawn on a size x size canvas over its own input range, with the diagonal faint.
ScalarGrid2D plot_curve(const IntensityLUT& lut, double lo, double hi, std::size_t size) {
  ScalarGrid2D canvas(size, size, 0.0F);
  const double last = static_cast<double>(size - 1);
  for (std::size_t c = 0; c < size; ++c) canvas(size - 1 - c, c) = 0.3F;
  std::size_t prev_row = size;
  for (std::size_t c = 0; c < size; ++c) {
    const double x = lo + (hi - lo) * static_cast<double>(c) / last;
    const double y = (lut(x) - lo) / (hi - lo);
    const auto row = static_cast<std::size_t>(std::lround((1.0 - std::clamp(y, 0.0, 1.0)) * last));
    const std::size_t a = prev_row == size ? row : std::min(row, prev_row);
    const std::size_t b = prev_row == size ? row : std::max(row, prev_row);
    for (std::size_t r = a; r <= b; ++r) canvas(r, c) = 1.0F;
    prev_row = row;
  }
  return canvas;
}

int cmd_demo(const Options& o) {
  o.aug.validate();
  const fs::path out(o.out);
  fs::create_directories(out);
  const PhantomSpec spec = PhantomSpec::abdominal();
  RandomStream root(o.seed);
  RandomStream phantom_rng = root.child("phantom");
  const Phantom p = generate_phantom(spec, phantom_rng);
  const ScalarGrid2D x = minmax_normalize(p.image);
  export_panel({{"image", x}, {"labels", label_image(p.labels)}}, out / "phantom.pgm");

  const ForegroundMask fg = ForegroundMask::from_image(x, o.aug.foreground_threshold);
  double lo = 1.0, hi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!fg.contains(i)) continue;
    lo = std::min(lo, static_cast<double>(x[i]));
    hi = std::max(hi, static_cast<double>(x[i]));
  }
  for (const bool invert : {false, true}) {
    std::vector<std::pair<std::string, ScalarGrid2D>> panel{{"image", x}};
    RandomStream curve_rng = root.child(invert ? "inverse-curves" : "forward-curves");
    for (int k = 0; k < 3; ++k) {
      LocationScaleDraw draw;
      draw.applied = true;
      draw.curve = sample_control_points(lo, hi, invert, curve_rng);
      const IntensityLUT lut = build_intensity_lut(draw.curve, o.aug.lut_samples);
      panel.emplace_back("curve", plot_curve(lut, lo, hi, x.height()));
      panel.emplace_back("mapped", apply_gla(x, fg, draw, o.aug.lut_samples));
    }
    export_panel(panel, out / (invert ? "bezier_inverse.pgm" : "bezier_forward.pgm"));
  }

  std::optional<nn::TinySegNet<float>> net;
  if (!o.checkpoint.empty()) {
    net.emplace(load_net(o.checkpoint));
  } else {
    info("no checkpoint given: saliency comes from an untrained network");
    nn::NetConfig ncfg;
    ncfg.num_classes = spec.num_classes;
    ncfg.seed = root.child("init").next_u64();
    net.emplace(ncfg);
  }
  Phantom compatible{x, LabelGrid2D(x.height(), x.width(), net->num_classes(),
                                    std::vector<std::uint8_t>(p.labels.labels().begin(), p.labels.labels().end()))};
  check_compatible(*net, {"demo", "test", compatible.image, compatible.labels});
  RandomStream gla_rng = root.child("gla");
  RandomStream lla_rng = root.child("lla");
  RandomStream common_rng = root.child("common");
  const ScalarGrid2D xg = gla(x, fg, o.aug, gla_rng).image;
  const ScalarGrid2D xl = lla(x, compatible.labels, fg, o.aug, lla_rng).image;
  const CommonAugResult c = common_augment(xg, xl, compatible.labels, o.aug, common_rng);
  const SaliencyMap s = saliency_of(*net, c.xg, c.m, o.aug.grid_size);
  export_panel({{"gla", c.xg}, {"saliency", s.weights}, {"lla", c.xl}, {"fused", fuse(c.xg, c.xl, s)}},
               out / "slaug.pgm");
  info("wrote demo panels to " + out.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency-balancing location-scale augmentation for 2D segmentation"};
  app.require_subcommand(1);
  Options o;

  auto* augment = app.add_subcommand("augment", "Write GLA/LLA (and, with a checkpoint, saliency/fused) images");
  augment->add_option("--data", o.data, "Dataset directory")->required();
  augment->add_option("--out", o.out, "Output directory")->required();
  augment->add_option("--checkpoint", o.checkpoint, "Network checkpoint for saliency");
  augment->add_option("--seed", o.seed, "Random seed");
  augment->add_flag("--panels", o.panels, "Also write PGM panels");
  add_aug_flags(augment, o);

  auto* phantom = app.add_subcommand("phantom", "Run the phantom domain generalization experiment");
  phantom->add_option("--out", o.out, "Output directory")->required();
  phantom->add_option("--seed", o.seed, "First seed");
  phantom->add_option("--seeds", o.seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  phantom->add_option("--train-slices", o.train_slices, "Source training slices per seed")->check(CLI::PositiveNumber);
  phantom->add_option("--val-slices", o.val_slices, "Source validation slices per seed")->check(CLI::PositiveNumber);
  phantom->add_option("--target-slices", o.target_slices, "Shifted-domain test slices per seed")
      ->check(CLI::PositiveNumber);
  phantom->add_option("--variant", o.variants, "Variants to train (repeatable)");
  phantom->add_flag("--random-fusion", o.random_fusion, "Also train the random-map fusion variant");
  phantom->add_flag("--compact", o.compact, "Reduced schedule sized for a 15-minute single-core run");
  phantom->add_flag("--save-data", o.save_data, "Write each seed's phantoms as a dataset directory");
  add_aug_flags(phantom, o);
  add_train_flags(phantom, o);

  auto* train = app.add_subcommand("train", "Train a network on a dataset's train split");
  train->add_option("--data", o.data, "Dataset directory")->required();
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--seed", o.seed, "Random seed");
  train->add_option("--variant", o.variant, "erm, gla, lla, gla+lla, no-fusion, slaug or random-fusion");
  add_aug_flags(train, o);
  add_train_flags(train, o);

  auto* eval = app.add_subcommand("eval", "Dice of a checkpoint on a dataset split");
  eval->add_option("--data", o.data, "Dataset directory")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Network checkpoint")->required();
  eval->add_option("--out", o.out, "Output directory")->required();
  eval->add_option("--split", o.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  auto* demo = app.add_subcommand("demo", "Write Bezier curve and SLAug pipeline panels");
  demo->add_option("--out", o.out, "Output directory")->required();
  demo->add_option("--seed", o.seed, "Random seed");
  demo->add_option("--checkpoint", o.checkpoint, "Network checkpoint for saliency");
  add_aug_flags(demo, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*augment) return cmd_augment(o);
    if (*phantom) return cmd_phantom(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*demo) return cmd_demo(o);
  } catch (const CheckpointError& e) {
    std::cerr << "slaug: checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  } catch (const MismatchError& e) {
    std::cerr << "slaug: mismatch: " << e.what() << '\n';
    return kMismatch;
  } catch (const InvalidConfig& e) {
    std::cerr << "slaug: invalid configuration: " << e.what() << '\n';
    return kInputError;
  } catch (const InvalidInput& e) {
    std::cerr << "slaug: input error: " << e.what() << '\n';
    return kInputError;
  } catch (const FormatError& e) {
    std::cerr << "slaug: format error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "slaug: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
