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

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nascty/attack_eval.hpp"
#include "nascty/evolution.hpp"
#include "nascty/neural_engine.hpp"
#include "nascty/trace_model.hpp"

namespace nascty::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitValidation = 3,
  kExitData = 4,
  kExitInternal = 5,
};

/// Runs one verb; `args` excludes the program name.
int run(const std::vector<std::string>& args);
int main(int argc, char** argv);

// Default file names inside a data directory written by gen-traces.
inline constexpr const char* kTrainFile = "train.nct";
inline constexpr const char* kValidFile = "valid.nct";
inline constexpr const char* kAttackFile = "attack.nct";

/// Config snapshot, inputs and artifacts of one command, each file with its
/// SHA-256.
class Manifest {
 public:
  explicit Manifest(std::string command);
  void set_config(json config) { config_ = std::move(config); }
  void add_input(const fs::path& path);
  void add_artifact(const fs::path& path);
  /// Writes the manifest to `path`.
  void write(const fs::path& path) const;

 private:
  std::string command_;
  std::string started_;
  json config_ = json::object();
  json inputs_ = json::array();
  json artifacts_ = json::array();
};

/// Writes `content` to dir/name and records it in the manifest.
fs::path write_artifact(Manifest& manifest, const fs::path& dir, const std::string& name,
                        const std::string& content);

/// Training set normalized onto [-1, 1] and the validation set mapped with
/// the training parameters.
struct ProfilingData {
  TraceSet train;
  TraceSet valid;
};
ProfilingData load_profiling(const fs::path& train_path, const fs::path& valid_path);

json normalization_to_json(const NormalizationParams& p);
NormalizationParams normalization_from_json(const std::string& text);

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> action;
};

Command add_gen_traces(CLI::App& root);
Command add_evolve(CLI::App& root);
Command add_grid_search(CLI::App& root);
Command add_eval_genome(CLI::App& root);
Command add_attack(CLI::App& root);
Command add_report(CLI::App& root);

/// Evolution flags shared by evolve and grid-search, applied on top of a
/// config file.
struct EvolutionFlags {
  std::string config_file;
  std::optional<int> population, generations, tournament, epochs, workers;
  std::optional<double> truncation, eta, lr;
  std::optional<std::string> crossover;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App& app);
  EvolutionConfig resolve() const;
};

struct AttackSettings {
  int epochs = 50;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::size_t n_traces = 2000;
  std::size_t folds = 100;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Trains `genome` on the (normalized) training split, then scores it on the
/// attack split mapped with the training normalization.
struct GenomeEvaluation {
  TrainedNetwork network;
  AttackReport report;
};
GenomeEvaluation evaluate_genome(const Genome& genome, const TraceSet& train,
                                 const TraceSet& attack, const AttackSettings& settings);

/// One line per layer with output shape and trainable parameters, then the
/// total.
std::string architecture_summary(const std::vector<LayerSpec>& specs, std::size_t input_length);

}  // namespace nascty::cli
