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

#include "cli.hpp"

#include <iostream>
#include <sstream>

#include "nascty/trace_store.hpp"
#include "nascty/util.hpp"

namespace nascty::cli {

Manifest::Manifest(std::string command) : command_(std::move(command)), started_(utc_timestamp()) {}

void Manifest::add_input(const fs::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void Manifest::add_artifact(const fs::path& path) {
  const std::string p = path.string();
  for (auto& a : artifacts_) {
    if (a["path"] == p) {
      a["sha256"] = sha256_file(path);
      return;
    }
  }
  artifacts_.push_back({{"path", p}, {"sha256", sha256_file(path)}});
}

void Manifest::write(const fs::path& path) const {
  json j;
  j["tool"] = "nascty";
  j["version"] = kToolVersion;
  j["command"] = command_;
  j["started_utc"] = started_;
  j["finished_utc"] = utc_timestamp();
  j["config"] = config_;
  j["inputs"] = inputs_;
  j["artifacts"] = artifacts_;
  write_file(path, j.dump(2) + "\n");
}

fs::path write_artifact(Manifest& manifest, const fs::path& dir, const std::string& name,
                        const std::string& content) {
  const fs::path path = dir / name;
  write_file(path, content);
  manifest.add_artifact(path);
  return path;
}

ProfilingData load_profiling(const fs::path& train_path, const fs::path& valid_path) {
  const TraceSet train_raw = read_traceset(train_path);
  const TraceSet valid_raw = read_traceset(valid_path);
  if (train_raw.n_samples != valid_raw.n_samples)
    throw DataError("training traces have " + std::to_string(train_raw.n_samples) +
                    " samples but validation traces have " + std::to_string(valid_raw.n_samples));
  ProfilingData d;
  d.train = normalize(train_raw);
  d.valid = apply_normalization(valid_raw, *d.train.normalization);
  return d;
}

json normalization_to_json(const NormalizationParams& p) {
  json j;
  j["min"] = p.min;
  j["max"] = p.max;
  return j;
}

NormalizationParams normalization_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    NormalizationParams p;
    p.min = j.at("min").get<std::vector<float>>();
    p.max = j.at("max").get<std::vector<float>>();
    if (p.min.size() != p.max.size()) throw DataError("normalization min/max lengths differ");
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad normalization file: ") + e.what());
  }
}

void EvolutionFlags::add_to(CLI::App& app) {
  app.add_option("--config", config_file, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);
  app.add_option("--population", population, "Population size (even)");
  app.add_option("--generations", generations, "Number of generations");
  app.add_option("--tournament", tournament, "Tournament size");
  app.add_option("--truncation", truncation, "Truncation proportion in (0, 1]");
  app.add_option("--crossover", crossover, "one-point or parameter-wise");
  app.add_option("--eta", eta, "Polynomial mutation distribution index");
  app.add_option("--epochs", epochs, "Training epochs per fitness evaluation");
  app.add_option("--batch-size", batch_size, "Mini-batch size");
  app.add_option("--lr", lr, "Adam learning rate");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workers", workers, "Parallel fitness evaluations (NASCTY_WORKERS wins)");
}

EvolutionConfig EvolutionFlags::resolve() const {
  EvolutionConfig cfg;
  if (!config_file.empty()) cfg = decode_config(read_file(config_file));
  if (population) cfg.population_size = *population;
  if (generations) cfg.max_generations = *generations;
  if (tournament) cfg.tournament_size = *tournament;
  if (truncation) cfg.truncation_proportion = *truncation;
  if (crossover) cfg.crossover = parse_crossover_kind(*crossover);
  if (eta) cfg.eta = *eta;
  if (epochs) cfg.train_epochs = *epochs;
  if (batch_size) cfg.batch_size = *batch_size;
  if (lr) cfg.learning_rate = *lr;
  if (seed) cfg.master_seed = *seed;
  if (workers) cfg.parallel_workers = *workers;
  cfg.parallel_workers = resolve_workers(cfg.parallel_workers);
  cfg.validate();
  return cfg;
}

GenomeEvaluation evaluate_genome(const Genome& genome, const TraceSet& train,
                                 const TraceSet& attack, const AttackSettings& s) {
  if (!train.normalization) throw ValidationError("training set must be normalized");
  if (attack.n_samples != train.n_samples)
    throw DataError("attack traces have " + std::to_string(attack.n_samples) +
                    " samples but training traces have " + std::to_string(train.n_samples));
  GenomeEvaluation out{TrainedNetwork(express(genome, train.n_samples), train.n_samples), {}};
  out.network.init_parameters(derive_seed(s.seed, {0x696e6974}));
  TrainConfig tc;
  tc.epochs = s.epochs;
  tc.batch_size = s.batch_size;
  tc.learning_rate = s.learning_rate;
  tc.seed = derive_seed(s.seed, {0x7472});
  nascty::train(out.network, train.traces, train.labels, tc);
  const TraceSet mapped = apply_normalization(attack, *train.normalization);
  out.report = guessing_entropy(out.network, mapped, s.n_traces, s.folds,
                                derive_seed(s.seed, {0x6765}), s.workers);
  return out;
}

std::string architecture_summary(const std::vector<LayerSpec>& specs, std::size_t input_length) {
  const auto shapes = infer_shapes(specs, input_length);
  std::ostringstream os;
  os << "input: " << input_length << " x 1\n";
  std::size_t before = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::size_t upto = count_parameters(std::span(specs.data(), i + 1), input_length);
    os << i << ": " << describe(specs[i]) << " -> " << shapes[i].length << " x "
       << shapes[i].channels << ", params " << (upto - before) << "\n";
    before = upto;
  }
  os << "trainable parameters: " << before << "\n";
  return os.str();
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Neuroevolution of CNN architectures for profiling side-channel attacks", "nascty"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::vector<Command> commands{add_gen_traces(app), add_eval_genome(app), add_attack(app),
                                add_evolve(app),     add_grid_search(app), add_report(app)};

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    for (auto& c : commands) {
      if (c.app->parsed()) c.action();
    }
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace nascty::cli
