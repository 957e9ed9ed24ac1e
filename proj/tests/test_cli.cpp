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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "slaug/core.hpp"
#include "slaug/data.hpp"
#include "slaug/nnet/net.hpp"

using namespace slaug;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "slaug_cli_tests";

int run(const std::string& args) {
  const std::string cmd = "SLAUG_LOG=quiet " + std::string(SLAUG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under `dir`, keyed by relative path.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path make_dataset(const std::string& name, std::size_t count, std::size_t size = 32) {
  const fs::path dir = kRoot / name;
  fs::remove_all(dir);
  PhantomSpec spec = PhantomSpec::abdominal();
  spec.size = size;
  RandomStream root(41);
  std::vector<DatasetItem> items;
  for (std::size_t i = 0; i < count; ++i) {
    RandomStream rng = root.child(i);
    Phantom p = generate_phantom(spec, rng);
    items.push_back({"slice" + std::to_string(i), i + 1 == count ? "test" : "train", minmax_normalize(p.image),
                     p.labels});
  }
  save_dataset(dir, items);
  return dir;
}

double mean_dice(const fs::path& dice_tsv) {
  std::istringstream in(read_file(dice_tsv));
  std::string key;
  double value = -1;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    if (row >> key && key == "mean") row >> value;
  }
  return value;
}

}  // namespace

TEST_CASE("usage and input errors map to exit codes") {
  CHECK(run("--help") == 0);
  CHECK(run("") != 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("augment --out " + (kRoot / "x").string()) == 2);
  CHECK(run("augment --data " + (kRoot / "does-not-exist").string() + " --out " + (kRoot / "x").string()) == 2);

  const fs::path data = make_dataset("nolabels", 2);
  fs::remove_all(data / "labels");
  CHECK(run("augment --data " + data.string() + " --out " + (kRoot / "x").string()) == 2);
  CHECK(run("train --data " + make_dataset("variant", 2).string() + " --out " + (kRoot / "x").string() +
            " --variant bogus") == 2);
  CHECK(run("phantom --out " + (kRoot / "x").string() + " --grid-size 0") == 2);
}

TEST_CASE("augment is deterministic and writes GLA/LLA pairs") {
  const fs::path data = make_dataset("aug", 3);
  const fs::path a = kRoot / "aug-a", b = kRoot / "aug-b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run("augment --data " + data.string() + " --seed 1 --panels --out " + a.string()) == 0);
  REQUIRE(run("augment --data " + data.string() + " --seed 1 --panels --out " + b.string()) == 0);
  CHECK(snapshot(a) == snapshot(b));
  CHECK(fs::exists(a / "gla" / "slice0.slimg"));
  CHECK(fs::exists(a / "lla" / "slice2.slimg"));
  CHECK_FALSE(fs::exists(a / "fused"));
  CHECK(read_scalar_grid(a / "gla" / "slice1.slimg").height() == 32);

  const fs::path c = kRoot / "aug-c";
  fs::remove_all(c);
  REQUIRE(run("augment --data " + data.string() + " --seed 2 --out " + c.string()) == 0);
  CHECK(read_file(a / "gla" / "slice0.slimg") != read_file(c / "gla" / "slice0.slimg"));
}

TEST_CASE("train, eval and augment with a checkpoint") {
  const fs::path data = make_dataset("train", 5);
  const fs::path out = kRoot / "train-out";
  fs::remove_all(out);
  REQUIRE(run("train --data " + data.string() + " --out " + out.string() +
              " --seed 3 --variant erm --epochs 53 --batch 2 --lr 3e-3") == 0);
  REQUIRE(fs::exists(out / "checkpoint.slnet"));

  std::istringstream log(read_file(out / "loss.tsv"));
  std::string line;
  std::vector<double> lrs;
  while (std::getline(log, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch", 0) == 0) continue;
    std::istringstream row(line);
    int epoch = 0;
    double lr = 0, loss = 0;
    row >> epoch >> lr >> loss;
    CHECK(epoch == static_cast<int>(lrs.size()) + 1);
    lrs.push_back(lr);
  }
  REQUIRE(lrs.size() == 53);
  for (std::size_t i = 1; i < 50; ++i) CHECK(lrs[i] == lrs[0]);
  for (std::size_t i = 50; i < 53; ++i) CHECK(lrs[i] < lrs[i - 1]);

  REQUIRE(run("eval --data " + data.string() + " --checkpoint " + (out / "checkpoint.slnet").string() +
              " --split train --out " + (kRoot / "eval-trained").string()) == 0);
  nn::NetConfig cfg;
  cfg.seed = 99;
  nn::save_checkpoint(nn::TinySegNet<float>(cfg), kRoot / "fresh.slnet");
  REQUIRE(run("eval --data " + data.string() + " --checkpoint " + (kRoot / "fresh.slnet").string() +
              " --split train --out " + (kRoot / "eval-fresh").string()) == 0);
  const double trained = mean_dice(kRoot / "eval-trained" / "dice.tsv");
  const double fresh = mean_dice(kRoot / "eval-fresh" / "dice.tsv");
  CHECK(trained > fresh);

  const fs::path aug = kRoot / "aug-ckpt";
  fs::remove_all(aug);
  REQUIRE(run("augment --data " + data.string() + " --checkpoint " + (out / "checkpoint.slnet").string() +
              " --seed 1 --out " + aug.string()) == 0);
  for (const char* sub : {"gla", "lla", "saliency", "fused"}) CHECK(fs::exists(aug / sub / "slice0.slimg"));
}

TEST_CASE("checkpoint and shape problems use dedicated exit codes") {
  const fs::path data = make_dataset("ckpt", 2);
  {
    std::ofstream(kRoot / "broken.slnet") << "not a checkpoint";
  }
  CHECK(run("eval --data " + data.string() + " --checkpoint " + (kRoot / "broken.slnet").string() + " --out " +
            (kRoot / "x").string()) == 3);
  CHECK(run("augment --data " + data.string() + " --checkpoint " + (kRoot / "missing.slnet").string() +
            " --out " + (kRoot / "x").string()) == 3);

  nn::NetConfig three;
  three.num_classes = 3;
  nn::save_checkpoint(nn::TinySegNet<float>(three), kRoot / "three.slnet");
  CHECK(run("eval --data " + data.string() + " --checkpoint " + (kRoot / "three.slnet").string() +
            " --split all --out " + (kRoot / "x").string()) == 4);

  const fs::path odd = make_dataset("odd", 2, 30);
  nn::save_checkpoint(nn::TinySegNet<float>(nn::NetConfig{}), kRoot / "five.slnet");
  CHECK(run("eval --data " + odd.string() + " --checkpoint " + (kRoot / "five.slnet").string() +
            " --split all --out " + (kRoot / "x").string()) == 4);
}

TEST_CASE("phantom reports are byte identical across runs") {
  const std::string args =
      " --seed 1 --seeds 1 --train-slices 4 --val-slices 4 --target-slices 4 --epochs 1 --batch 2 --variant erm"
      " --variant slaug";
  const fs::path a = kRoot / "ph-a", b = kRoot / "ph-b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run("phantom --out " + a.string() + args) == 0);
  REQUIRE(run("phantom --out " + b.string() + args) == 0);
  const std::string report = read_file(a / "report.tsv");
  CHECK(report == read_file(b / "report.tsv"));
  CHECK(report.find("slaug\t1\t") != std::string::npos);
  CHECK(report.find("erm\t1\t") != std::string::npos);
}

TEST_CASE("demo writes its panels") {
  const fs::path out = kRoot / "demo";
  fs::remove_all(out);
  REQUIRE(run("demo --seed 4 --out " + out.string()) == 0);
  for (const char* f : {"phantom.pgm", "bezier_forward.pgm", "bezier_inverse.pgm", "slaug.pgm"}) {
    REQUIRE(fs::exists(out / f));
    CHECK(read_pgm(out / f).width > 0);
  }
}
