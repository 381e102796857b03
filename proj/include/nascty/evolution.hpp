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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nascty/common.hpp"
#include "nascty/genome.hpp"
#include "nascty/rng.hpp"

namespace nascty {

struct TraceSet;

enum class CrossoverKind { OnePoint, ParameterWise };

std::string to_string(CrossoverKind kind);
/// Accepts "one-point" / "parameter-wise" (underscores also allowed).
CrossoverKind parse_crossover_kind(const std::string& text);

struct EvolutionConfig {
  int population_size = 52;
  int max_generations = 10;
  int tournament_size = 3;
  double truncation_proportion = 1.0;
  CrossoverKind crossover = CrossoverKind::OnePoint;
  double eta = 20.0;
  int train_epochs = 10;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t master_seed = 0;
  int parallel_workers = 1;

  /// Throws ValidationError. Requires an even population and a tournament no
  /// larger than the truncation pool.
  void validate() const;

  /// ceil(truncation_proportion * population_size).
  std::size_t pool_size() const;
};

/// Fitness of a genome that cannot be expressed or trained; ordered after
/// every finite fitness.
inline constexpr double kWorstFitness = std::numeric_limits<double>::infinity();

/// Lower is better. Called concurrently; must depend only on its arguments.
using FitnessFunction = std::function<double(const Genome& genome, std::uint64_t training_seed)>;

/// Training seed shared by every genome of one generation.
std::uint64_t generation_seed(std::uint64_t master_seed, int generation);

/// Trains the expressed network on `train` and returns the mean validation
/// cross-entropy, or kWorstFitness (with a diagnostic) when the genome is
/// inexpressible or training fails.
double evaluate_fitness(const Genome& genome, const TraceSet& train, const TraceSet& valid,
                        const EvolutionConfig& cfg, std::uint64_t training_seed,
                        std::string* diagnostic = nullptr);

/// evaluate_fitness bound to data sets that must outlive the function.
FitnessFunction training_fitness(const TraceSet& train, const TraceSet& valid,
                                 const EvolutionConfig& cfg);

/// Population indices ordered best first: by fitness, then serialized
/// genome text, then index.
std::vector<std::size_t> rank_population(std::span<const Genome> population,
                                         std::span<const double> fitness);

/// population_size / 2 tournament winners drawn from the truncation pool.
/// `chosen` receives the population index of each parent.
std::vector<Genome> select_parents(std::span<const Genome> population,
                                   std::span<const double> fitness, const EvolutionConfig& cfg,
                                   Rng& rng, std::vector<std::size_t>* chosen = nullptr);

struct Operators {
  std::function<std::pair<Genome, Genome>(const Genome&, const Genome&, Rng&)> crossover;
  std::function<Genome(const Genome&, Rng&)> mutate;
};

Operators default_operators(const EvolutionConfig& cfg);

/// Pairs parents by a random perfect matching, then crossover and mutation.
/// With an odd count the last parent is paired with a random partner and only
/// its first child is kept. Output size equals input size.
std::vector<Genome> produce_offspring(std::span<const Genome> parents, const Operators& ops,
                                      Rng& rng);

/// Mean pairwise layer-count distance.
double population_diversity(std::span<const Genome> population);

struct GenerationRecord {
  int generation = 0;
  std::vector<double> fitness;
  Genome best_genome;
  double best_fitness = kWorstFitness;
  Genome best_so_far_genome;
  double best_so_far = kWorstFitness;
  double mean_fitness = kWorstFitness;  // over finite values
  double diversity = 0.0;
  int n_invalid = 0;
  double duration_seconds = 0.0;
  std::string rng_digest;  // SHA-256 of the GA stream at generation start

  bool operator==(const GenerationRecord&) const = default;
};

/// Everything needed to continue a run at `generation`.
struct RunState {
  EvolutionConfig config;
  int generation = 0;
  std::vector<Genome> population;  // not yet evaluated
  Rng rng;
  std::vector<GenerationRecord> records;
  std::map<std::string, std::string> metadata;

  bool finished() const { return generation >= config.max_generations; }
};

/// Generation 0 population drawn from the master seed.
RunState initial_state(const EvolutionConfig& cfg);

struct RunOptions {
  /// Written at the start of every generation and once at the end.
  std::optional<std::filesystem::path> checkpoint_path;
  /// Stops before evaluating this generation, leaving its checkpoint.
  std::optional<int> stop_before_generation;
  std::function<void(const GenerationRecord&)> on_generation;
};

struct RunResult {
  Genome best_genome;
  double best_fitness = kWorstFitness;
  std::vector<GenerationRecord> records;
  bool completed = false;
  RunState state;
};

RunResult run(const EvolutionConfig& cfg, const FitnessFunction& fitness,
              const RunOptions& options = {});

/// Continues from a state; workers may differ from the original run.
RunResult resume(RunState state, const FitnessFunction& fitness, const RunOptions& options = {});

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Canonical JSON text carrying a SHA-256 of its payload. Decoding rejects
/// any byte-level change.
std::string encode_checkpoint(const RunState& state);
RunState decode_checkpoint(const std::string& text);
void write_checkpoint(const std::filesystem::path& path, const RunState& state);
RunState read_checkpoint(const std::filesystem::path& path);

/// Every field as a JSON object. Decoding accepts any subset of the keys
/// (the rest keep their defaults), rejects unknown keys and validates.
std::string encode_config(const EvolutionConfig& cfg);
EvolutionConfig decode_config(const std::string& json_text);

/// generation,best_fitness,best_so_far,mean_fitness,diversity,n_invalid
std::string generations_csv(std::span<const GenerationRecord> records);
/// generation,duration_seconds
std::string timings_csv(std::span<const GenerationRecord> records);

}  // namespace nascty
