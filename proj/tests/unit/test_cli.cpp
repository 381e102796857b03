// Copyright 2026 The NASCTY Authors.
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

#include <doctest.h>

#include <array>
#include <filesystem>
#include <regex>

#include "cli.hpp"
#include "nascty/trace_store.hpp"
#include "nascty/util.hpp"

using namespace nascty;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nascty_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(std::vector<std::string> args) { return cli::run(args); }

void small_data(const fs::path& dir, const std::string& desync = "0") {
  REQUIRE(run_cli({"gen-traces", "--out-dir", dir.string(), "--n-samples", "24", "--leak-point", "12",
               "--noise-sigma", "0.5", "--train-per-class", "4", "--val-per-class", "2",
               "--attack-traces", "300", "--seed", "5", "--desync-level", desync}) == 0);
}

}  // namespace

TEST_CASE("gen-traces writes balanced splits of the requested size") {
  const auto dir = scratch("sizes");
  REQUIRE(run_cli({"gen-traces", "--out-dir", dir.string(), "--n-samples", "16", "--leak-point", "8",
               "--train-per-class", "139", "--val-per-class", "15", "--attack-traces", "100"}) ==
          0);
  const TraceSet train = read_traceset(dir / "train.nct");
  const TraceSet valid = read_traceset(dir / "valid.nct");
  CHECK(train.n_traces == 35584);
  CHECK(valid.n_traces == 3840);
  std::array<int, 256> ht{}, hv{};
  for (auto y : train.labels) ++ht[y];
  for (auto y : valid.labels) ++hv[y];
  for (int c = 0; c < 256; ++c) {
    CHECK(ht[c] == 139);
    CHECK(hv[c] == 15);
  }
  CHECK(read_traceset(dir / "attack.nct").n_traces == 100);
  CHECK(fs::exists(dir / "manifest.json"));
  const std::string manifest = read_file(dir / "manifest.json");
  CHECK(manifest.find(sha256_file(dir / "train.nct")) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("desync level 0 leaves traces aligned and other levels shift them") {
  const auto a = scratch("desync0"), b = scratch("desync10");
  small_data(a, "0");
  small_data(b, "10");
  const TraceSet x = read_traceset(a / "attack.nct");
  const TraceSet y = read_traceset(b / "attack.nct");
  CHECK(x.plaintexts == y.plaintexts);
  CHECK(x.labels == y.labels);
  CHECK_FALSE(x.traces == y.traces);
  for (std::size_t i = 0; i < x.n_traces; ++i) {
    bool found = false;
    for (std::size_t s = 0; s <= 10 && !found; ++s) {
      bool match = true;
      for (std::size_t j = s; j < x.n_samples && match; ++j)
        match = y.trace(i)[j] == x.trace(i)[j - s];
      found = match;
    }
    CHECK(found);
  }
  CHECK(run_cli({"gen-traces", "--out-dir", a.string(), "--desync-level", "20"}) == cli::kExitUsage);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("exit codes separate usage, validation and data errors") {
  const auto dir = scratch("codes");
  small_data(dir / "data");
  CHECK(run_cli({}) == cli::kExitUsage);
  CHECK(run_cli({"evolve", "--no-such-flag"}) == cli::kExitUsage);
  CHECK(run_cli({"gen-traces", "--out-dir", dir.string(), "--mask-point", "3"}) == cli::kExitUsage);
  CHECK(run_cli({"evolve", "--data", (dir / "data").string(), "--out", (dir / "r").string(),
             "--population", "5"}) == cli::kExitValidation);
  CHECK(run_cli({"evolve", "--data", (dir / "nothing").string(), "--out", (dir / "r").string()}) ==
        cli::kExitData);
  write_file(dir / "bad.json", "{\"format\": \"nascty-genome\"}");
  CHECK(run_cli({"eval-genome", "--genome", (dir / "bad.json").string(), "--data",
             (dir / "data").string(), "--out", (dir / "e").string()}) == cli::kExitValidation);
  fs::remove_all(dir);
}

TEST_CASE("evolve resumes to the same logs and rejects changed settings") {
  const auto dir = scratch("resume");
  small_data(dir / "data");
  const std::string data = (dir / "data").string();
  const std::vector<std::string> common{"--data", data, "--population", "4", "--generations",
                                        "3", "--epochs", "1", "--seed", "11"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail = {}) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  REQUIRE(run_cli(with({"evolve", "--out", (dir / "full").string()}, common)) == 0);
  REQUIRE(run_cli(with({"evolve", "--out", (dir / "part").string(), "--stop-before", "2"}, common)) == 0);
  CHECK_FALSE(fs::exists(dir / "part" / "best_genome.json"));
  const std::string ckpt = (dir / "part" / "checkpoint.json").string();
  CHECK(run_cli({"evolve", "--resume", ckpt, "--out", (dir / "part").string(), "--eta", "40"}) ==
        cli::kExitValidation);
  REQUIRE(run_cli({"evolve", "--resume", ckpt, "--out", (dir / "part").string()}) == 0);
  CHECK(read_file(dir / "full" / "generations.csv") == read_file(dir / "part" / "generations.csv"));
  CHECK(read_file(dir / "full" / "best_genome.json") ==
        read_file(dir / "part" / "best_genome.json"));
  fs::remove_all(dir);
}

TEST_CASE("eval-genome reports the hand-computed parameter count") {
  const auto dir = scratch("eval");
  small_data(dir / "data");
  // Conv 4x3 on 24 samples: 3*4 + 4 = 16. Average pool 2/2 gives 12 x 4 = 48
  // features. Dense(5): 48*5 + 5 = 245. Output: 5*256 + 256 = 1536.
  write_file(dir / "g.json",
             "{\"format\":\"nascty-genome\",\"version\":1,\"conv_blocks\":[{\"n_filters\":4,"
             "\"filter_size\":3,\"batch_norm\":false,\"pool\":{\"kind\":\"average\",\"size\":2,"
             "\"stride\":2}}],\"lone_pool\":null,\"dense_layers\":[{\"n_neurons\":5}]}");
  REQUIRE(run_cli({"eval-genome", "--genome", (dir / "g.json").string(), "--data",
               (dir / "data").string(), "--out", (dir / "e").string(), "--epochs", "1", "--folds",
               "4", "--n-traces", "50"}) == 0);
  const std::string summary = read_file(dir / "e" / "summary.txt");
  CHECK(summary.find("trainable parameters: 1797\n") != std::string::npos);
  CHECK(summary.find("Conv1D(filters=4, kernel=3) -> 24 x 4, params 16") != std::string::npos);
  CHECK(fs::exists(dir / "e" / "ge_curve.csv"));

  // The saved network reproduces the report.
  REQUIRE(run_cli({"attack", "--network", (dir / "e" / "network.nnet").string(), "--normalization",
               (dir / "e" / "normalization.json").string(), "--attack",
               (dir / "data" / "attack.nct").string(), "--out", (dir / "a").string(), "--folds",
               "4", "--n-traces", "50"}) == 0);
  CHECK(read_file(dir / "a" / "ge_curve.csv") == read_file(dir / "e" / "ge_curve.csv"));
  CHECK(run_cli({"attack", "--network", (dir / "e" / "network.nnet").string(), "--attack",
             (dir / "data" / "attack.nct").string(), "--out", (dir / "a").string(), "--n-traces",
             "301"}) == cli::kExitValidation);
  fs::remove_all(dir);
}

TEST_CASE("report plots exactly the CSV rows and is idempotent") {
  const auto dir = scratch("report");
  CHECK(run_cli({"report", dir.string()}) == cli::kExitData);
  write_file(dir / "generations.csv",
             "generation,best_fitness,best_so_far,mean_fitness,diversity,n_invalid\n"
             "0,5.5,5.5,5.6,2,1\n1,5.25,5.25,inf,1.5,4\n2,5.3,5.25,5.4,1,0\n");
  write_file(dir / "ge_curve.csv", "n_traces,mean_key_rank\n1,120.5\n2,40\n3,0\n");
  REQUIRE(run_cli({"report", dir.string()}) == 0);
  const std::string svg = read_file(dir / "fitness.svg");
  const std::regex point("data-x=\"([^\"]*)\" data-y=\"([^\"]*)\"");
  auto series_points = [&](const std::string& text, const std::string& name) {
    const auto start = text.find("data-series=\"" + name + "\"");
    const auto end = text.find("</g>", start);
    const std::string block = text.substr(start, end - start);
    std::vector<std::pair<std::string, std::string>> pts;
    for (std::sregex_iterator it(block.begin(), block.end(), point), stop; it != stop; ++it)
      pts.emplace_back((*it)[1], (*it)[2]);
    return pts;
  };
  using P = std::vector<std::pair<std::string, std::string>>;
  CHECK(series_points(svg, "best_fitness") == P{{"0", "5.5"}, {"1", "5.25"}, {"2", "5.3"}});
  CHECK(series_points(svg, "mean_fitness") == P{{"0", "5.6"}, {"2", "5.4"}});
  const std::string ge_svg = read_file(dir / "key_rank.svg");
  CHECK(series_points(ge_svg, "mean_key_rank") == P{{"1", "120.5"}, {"2", "40"}, {"3", "0"}});
  const std::string md = read_file(dir / "report.md");
  CHECK(md.find("traces to rank 0: 3") != std::string::npos);

  REQUIRE(run_cli({"report", dir.string()}) == 0);
  CHECK(read_file(dir / "fitness.svg") == svg);
  CHECK(read_file(dir / "key_rank.svg") == ge_svg);
  CHECK(read_file(dir / "report.md") == md);

  write_file(dir / "ge_curve.csv", "n_traces,mean_key_rank\n1,abc\n");
  CHECK(run_cli({"report", dir.string()}) == cli::kExitData);
  write_file(dir / "ge_curve.csv", "n_traces\n1\n");
  CHECK(run_cli({"report", dir.string()}) == cli::kExitData);
  fs::remove_all(dir);
}

TEST_CASE("config file values are overridden by flags") {
  const auto dir = scratch("config");
  small_data(dir / "data");
  write_file(dir / "cfg.json", "{\"population_size\": 6, \"max_generations\": 1, \"eta\": 40}");
  REQUIRE(run_cli({"evolve", "--config", (dir / "cfg.json").string(), "--data",
               (dir / "data").string(), "--out", (dir / "r").string(), "--population", "4",
               "--epochs", "1"}) == 0);
  const EvolutionConfig cfg = decode_config(read_file(dir / "r" / "config.json"));
  CHECK(cfg.population_size == 4);
  CHECK(cfg.max_generations == 1);
  CHECK(cfg.eta == 40.0);
  CHECK(cfg.train_epochs == 1);
  write_file(dir / "typo.json", "{\"populaton_size\": 6}");
  CHECK(run_cli({"evolve", "--config", (dir / "typo.json").string(), "--data",
             (dir / "data").string(), "--out", (dir / "r2").string()}) == cli::kExitValidation);
  fs::remove_all(dir);
}

TEST_CASE("grid search covers the default eight cells") {
  const auto dir = scratch("grid");
  small_data(dir / "data");
  REQUIRE(run_cli({"grid-search", "--data", (dir / "data").string(), "--out", (dir / "g").string(),
               "--population", "6", "--generations", "1", "--epochs", "1", "--skip-attack"}) == 0);
  const std::string summary = read_file(dir / "g" / "grid_summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 9);
  CHECK(summary.find("mean_incremental_key_rank") != std::string::npos);
  CHECK(fs::exists(dir / "g" / "cell7_rep0" / "generations.csv"));
  fs::remove_all(dir);
}
