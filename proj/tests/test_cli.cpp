// Copyright 2026 The Fed3CR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/fixtures.hpp"

using fed3cr::testing::read_file;
using fed3cr::testing::TempDir;
using fed3cr::testing::write_file;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "fed3cr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = fed3cr::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

constexpr const char* kSmallConfig = R"([dataset]
source = toy
min_interactions = 2
toy_clients = 12
toy_items = 60
toy_positives = 8

[training]
rounds = 2
local_iterations = 2
dim = 4
batch_size = 64
lr = 0.02
eval_negatives = 20
layers = 2
ace_init = identity

[eval]
k_prime = 10
)";

}  // namespace

TEST_CASE("run: outputs, determinism across workers, overwrite refusal") {
  TempDir dir("cli_run");
  write_file(dir / "small.cfg", kSmallConfig);
  const std::string cfg = (dir / "small.cfg").string();

  const auto a = invoke({"run", "-c", cfg, "--output.dir", (dir / "a").string()});
  INFO(a.err);
  REQUIRE(a.code == fed3cr::cli::kExitOk);
  const auto b = invoke({"run", "-c", cfg, "--output.dir", (dir / "b").string(), "-w", "5"});
  REQUIRE(b.code == fed3cr::cli::kExitOk);
  CHECK(read_file(dir / "a" / "metrics.csv") == read_file(dir / "b" / "metrics.csv"));

  const auto again = invoke({"run", "-c", cfg, "--output.dir", (dir / "a").string()});
  CHECK(again.code == fed3cr::cli::kExitConfig);
  CHECK(again.err.find("--force") != std::string::npos);
  const auto forced = invoke({"run", "-c", cfg, "--output.dir", (dir / "a").string(), "--force"});
  CHECK(forced.code == fed3cr::cli::kExitOk);
  CHECK(read_file(dir / "a" / "metrics.csv") == read_file(dir / "b" / "metrics.csv"));

  // The manifest reproduces the run.
  const auto m = invoke({"run", "-c", (dir / "a" / "manifest.json").string(), "--output.dir",
                         (dir / "m").string()});
  REQUIRE(m.code == fed3cr::cli::kExitOk);
  CHECK(read_file(dir / "m" / "metrics.csv") == read_file(dir / "a" / "metrics.csv"));
}

TEST_CASE("override precedence: file < environment < --set < dotted flag") {
  TempDir dir("cli_prec");
  std::string text = kSmallConfig;
  text.replace(text.find("[training]\n"), 11, "[training]\nseed = 3\n");
  write_file(dir / "small.cfg", text);
  const std::string cfg = (dir / "small.cfg").string();
  auto seed_of = [&](const std::string& sub) {
    const auto j = nlohmann::json::parse(read_file(dir / sub / "manifest.json"));
    return j["config"]["training.seed"].get<std::string>();
  };
  CHECK(invoke({"run", "-c", cfg, "--output.dir", (dir / "f").string()}).code == 0);
  CHECK(seed_of("f") == "3");
  ::setenv("FED3CR_SEED", "11", 1);
  CHECK(invoke({"run", "-c", cfg, "--output.dir", (dir / "e").string()}).code == 0);
  CHECK(invoke({"run", "-c", cfg, "--output.dir", (dir / "s").string(), "--set",
                "training.seed=12"}).code == 0);
  CHECK(invoke({"run", "-c", cfg, "--output.dir", (dir / "d").string(), "--set",
                "training.seed=12", "--training.seed", "13"}).code == 0);
  ::unsetenv("FED3CR_SEED");
  CHECK(seed_of("e") == "11");
  CHECK(seed_of("s") == "12");
  CHECK(seed_of("d") == "13");
}

TEST_CASE("exit codes") {
  TempDir dir("cli_exit");
  write_file(dir / "small.cfg", kSmallConfig);
  const std::string cfg = (dir / "small.cfg").string();

  const auto unknown = invoke({"run", "-c", cfg, "--set", "training.beta_x=1"});
  CHECK(unknown.code == fed3cr::cli::kExitConfig);
  CHECK(unknown.err.find("beta_x") != std::string::npos);

  write_file(dir / "bad.cfg", "[training]\nbeta_x = 1\n");
  const auto bad = invoke({"run", "-c", (dir / "bad.cfg").string()});
  CHECK(bad.code == fed3cr::cli::kExitConfig);
  CHECK(bad.err.find("beta_x") != std::string::npos);

  CHECK(invoke({"run", "--no-such-flag"}).code == fed3cr::cli::kExitConfig);
  CHECK(invoke({"--help"}).code == fed3cr::cli::kExitOk);

  const auto missing = invoke({"dataset", "stats", "--dataset.source", "file", "--dataset.path",
                               (dir / "absent.tsv").string()});
  CHECK(missing.code == fed3cr::cli::kExitData);

  write_file(dir / "broken.dat", "1::2::5::100\n1::3::five::101\n");
  const auto parse = invoke({"dataset", "stats", "--dataset.source", "file", "--dataset.path",
                             (dir / "broken.dat").string(), "--dataset.format", "movielens-dat"});
  CHECK(parse.code == fed3cr::cli::kExitData);
  CHECK(parse.err.find("broken.dat: line 2") != std::string::npos);

  const auto diverge = invoke({"run", "-c", cfg, "--output.dir", (dir / "div").string(),
                               "--training.lr", "1e30"});
  CHECK(diverge.code == fed3cr::cli::kExitRuntime);
  const auto failed = nlohmann::json::parse(read_file(dir / "div" / "manifest.json"));
  CHECK(failed["status"] == "failed");
}

TEST_CASE("ablate and sweep write their tables") {
  TempDir dir("cli_cmp");
  write_file(dir / "small.cfg", kSmallConfig);
  const std::string cfg = (dir / "small.cfg").string();
  const auto ab = invoke({"ablate", "-c", cfg, "--variants", "C0,C1", "--output.dir",
                          (dir / "ab").string()});
  INFO(ab.err);
  REQUIRE(ab.code == 0);
  const std::string csv = read_file(dir / "ab" / "ablation.csv");
  CHECK(csv.find("\nC0,") != std::string::npos);
  CHECK(csv.find("\nC1,") != std::string::npos);

  const auto sw = invoke({"sweep", "-c", cfg, "--param", "layers", "--values", "2,3,4",
                          "--output.dir", (dir / "sw").string()});
  REQUIRE(sw.code == 0);
  const std::string s = read_file(dir / "sw" / "sweep.csv");
  CHECK(s.rfind("layers,round,hr10,ndcg10\n2,", 0) == 0);
  CHECK(s.find("\n3,") != std::string::npos);
  CHECK(s.find("\n4,") != std::string::npos);

  const auto a2 = invoke({"ablate", "-c", cfg, "--variants", "C0,C1", "--output.dir",
                          (dir / "ab2").string(), "-w", "3"});
  REQUIRE(a2.code == 0);
  CHECK(read_file(dir / "ab2" / "ablation.csv") == csv);

  CHECK(invoke({"sweep", "-c", cfg, "--param", "gamma", "--values", "1", "--output.dir",
                (dir / "g").string()}).code == fed3cr::cli::kExitConfig);
}

TEST_CASE("dataset commands") {
  TempDir dir("cli_data");
  const auto stats = invoke({"dataset", "stats"});
  REQUIRE(stats.code == 0);
  const auto j = nlohmann::json::parse(stats.out);
  CHECK(j["clients"] == 120);
  CHECK(j["items"] == 200);
  CHECK(j["interactions"] == 2400);

  const auto toy = invoke({"dataset", "make-toy", "-o", (dir / "toy.tsv").string()});
  REQUIRE(toy.code == 0);
  const auto again = invoke({"dataset", "stats", "--dataset.source", "file", "--dataset.path",
                             (dir / "toy.tsv").string(), "--dataset.min_interactions", "1"});
  REQUIRE(again.code == 0);
  CHECK(nlohmann::json::parse(again.out) == j);
}

TEST_CASE("degradation commands") {
  TempDir dir("cli_deg");
  write_file(dir / "optima.csv", "1,0\n0,1\n-1,0\n");
  const auto bound = invoke({"degradation", "bound", "--optima", (dir / "optima.csv").string(),
                             "--delta-csv", (dir / "delta.csv").string()});
  REQUIRE(bound.code == 0);
  const auto r = nlohmann::json::parse(bound.out);
  CHECK(std::abs(r["distance"][0].get<double>() - 1.0541) < 1e-3);
  CHECK(std::abs(r["bound"][0].get<double>() - 1.1381) < 1e-3);
  CHECK(read_file(dir / "delta.csv").find('\n') != std::string::npos);

  const auto sweep = invoke({"degradation", "bound", "--fixtures", "50"});
  REQUIRE(sweep.code == 0);
  CHECK(nlohmann::json::parse(sweep.out)["violations"] == 0);

  const auto toy = invoke({"degradation", "toy", "--vectors", "1,0;0.7071,0.7071;0,1"});
  REQUIRE(toy.code == 0);
  CHECK(nlohmann::json::parse(toy.out)["degraded"] == true);
  CHECK(invoke({"degradation", "toy", "--vectors", "1,0"}).code == fed3cr::cli::kExitConfig);
}
