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

#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "nascty/trace_store.hpp"
#include "nascty/util.hpp"

namespace nascty::cli {

namespace {

struct DataPaths {
  std::string data_dir;
  std::string train, valid, attack;

  void add_to(CLI::App& app, bool with_attack) {
    app.add_option("--data", data_dir, "Directory written by gen-traces");
    app.add_option("--train", train, "Training trace file (default <data>/train.nct)");
    app.add_option("--valid", valid, "Validation trace file (default <data>/valid.nct)");
    if (with_attack)
      app.add_option("--attack", attack, "Attack trace file (default <data>/attack.nct)");
  }

  fs::path resolve(const std::string& explicit_path, const char* file, const char* flag) const {
    if (!explicit_path.empty()) return explicit_path;
    if (data_dir.empty())
      throw ValidationError(std::string("missing ") + flag + " (or --data DIR)");
    return fs::path(data_dir) / file;
  }
};

std::string fitness_text(double f) {
  if (!std::isfinite(f)) return "invalid";
  std::ostringstream os;
  os << std::fixed << std::setprecision(5) << f;
  return os.str();
}

void log_generation(const std::string& prefix, const GenerationRecord& r) {
  std::cerr << prefix << "generation " << r.generation << ": best " << fitness_text(r.best_fitness)
            << ", best so far " << fitness_text(r.best_so_far) << ", mean "
            << fitness_text(r.mean_fitness) << ", invalid " << r.n_invalid << ", "
            << std::fixed << std::setprecision(1) << r.duration_seconds << " s\n"
            << std::defaultfloat;
}

struct EvolveJob {
  RunState state;
  fs::path out_dir;
  std::optional<int> stop_before;
  std::string log_prefix;
};

// Runs or continues evolution in `out_dir`, keeping the CSV logs, the
// checkpoint and the best genome current.
RunResult run_in_dir(EvolveJob job, const ProfilingData& data, Manifest& manifest) {
  fs::create_directories(job.out_dir);
  const fs::path ckpt = job.out_dir / "checkpoint.json";
  std::vector<GenerationRecord> records = job.state.records;
  auto write_logs = [&] {
    write_artifact(manifest, job.out_dir, "generations.csv", generations_csv(records));
    write_artifact(manifest, job.out_dir, "timings.csv", timings_csv(records));
  };
  RunOptions opts;
  opts.checkpoint_path = ckpt;
  opts.stop_before_generation = job.stop_before;
  opts.on_generation = [&](const GenerationRecord& r) {
    records.push_back(r);
    log_generation(job.log_prefix, r);
    write_logs();
  };
  write_artifact(manifest, job.out_dir, "config.json", encode_config(job.state.config));
  const FitnessFunction fitness = training_fitness(data.train, data.valid, job.state.config);
  RunResult result = resume(std::move(job.state), fitness, opts);
  write_logs();
  manifest.add_artifact(ckpt);
  if (result.completed)
    write_artifact(manifest, job.out_dir, "best_genome.json",
                   serialize_genome(result.best_genome) + "\n");
  return result;
}

void check_digest(const RunState& state, const std::string& key, const fs::path& path) {
  const auto it = state.metadata.find(key);
  if (it == state.metadata.end()) return;
  if (sha256_file(path) != it->second)
    throw DataError(path.string() + " differs from the data the run started with");
}

// ---------------------------------------------------------------------------

struct EvolveOptions {
  DataPaths data;
  EvolutionFlags flags;
  std::string out_dir;
  std::string resume_from;
  std::optional<int> stop_before;
};

void evolve(const EvolveOptions& o) {
  RunState state;
  fs::path train_path, valid_path;
  if (!o.resume_from.empty()) {
    state = read_checkpoint(o.resume_from);
    const auto& f = o.flags;
    if (!f.config_file.empty() || f.population || f.generations || f.tournament || f.epochs ||
        f.truncation || f.eta || f.lr || f.crossover || f.batch_size || f.seed)
      throw ValidationError("a resumed run keeps its configuration; only --workers may change");
    state.config.parallel_workers =
        resolve_workers(f.workers.value_or(state.config.parallel_workers));
    train_path = o.data.train.empty() && o.data.data_dir.empty()
                     ? fs::path(state.metadata.at("train_path"))
                     : o.data.resolve(o.data.train, kTrainFile, "--train");
    valid_path = o.data.valid.empty() && o.data.data_dir.empty()
                     ? fs::path(state.metadata.at("valid_path"))
                     : o.data.resolve(o.data.valid, kValidFile, "--valid");
    check_digest(state, "train_sha256", train_path);
    check_digest(state, "valid_sha256", valid_path);
  } else {
    const EvolutionConfig cfg = o.flags.resolve();
    train_path = o.data.resolve(o.data.train, kTrainFile, "--train");
    valid_path = o.data.resolve(o.data.valid, kValidFile, "--valid");
    state = initial_state(cfg);
    state.metadata["train_path"] = train_path.string();
    state.metadata["valid_path"] = valid_path.string();
    state.metadata["train_sha256"] = sha256_file(train_path);
    state.metadata["valid_sha256"] = sha256_file(valid_path);
  }

  Manifest manifest("evolve");
  manifest.set_config(json::parse(encode_config(state.config)));
  manifest.add_input(train_path);
  manifest.add_input(valid_path);
  const ProfilingData data = load_profiling(train_path, valid_path);
  std::cerr << "evolving: population " << state.config.population_size << ", generations "
            << state.config.max_generations << ", starting at generation " << state.generation
            << ", " << data.train.n_traces << " training traces\n";
  const RunResult r = run_in_dir({std::move(state), o.out_dir, o.stop_before, ""}, data, manifest);
  manifest.write(fs::path(o.out_dir) / "manifest.json");
  if (!r.completed) {
    std::cout << "stopped before generation " << r.state.generation << "; continue with --resume "
              << (fs::path(o.out_dir) / "checkpoint.json").string() << "\n";
    return;
  }
  std::cout << "best fitness " << fitness_text(r.best_fitness) << ": " << summarize(r.best_genome)
            << "\n";
}

// ---------------------------------------------------------------------------

struct GridOptions {
  DataPaths data;
  EvolutionFlags flags;
  std::string out_dir;
  int repeats = 1;
  std::vector<double> etas{20.0, 40.0};
  std::vector<std::string> crossovers{"one-point", "parameter-wise"};
  std::vector<double> truncations{0.5, 1.0};
  bool skip_attack = false;
  AttackSettings attack;
};

struct GridRow {
  std::size_t cell = 0;
  double eta = 0, truncation = 0;
  CrossoverKind crossover = CrossoverKind::OnePoint;
  int repeat = 0;
  std::uint64_t seed = 0;
  double best_fitness = kWorstFitness;
  std::optional<AttackReport> report;
};

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

std::string grid_csv(const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << "cell,eta,crossover,truncation,repeat,seed,best_fitness,mean_incremental_key_rank,"
        "traces_to_rank0,final_key_rank\n";
  for (const auto& r : rows) {
    os << r.cell << "," << format_double(r.eta) << "," << to_string(r.crossover) << ","
       << format_double(r.truncation) << "," << r.repeat << "," << r.seed << ","
       << format_double(r.best_fitness) << ",";
    if (r.report) {
      os << format_double(r.report->mean_incremental_key_rank) << ","
         << (r.report->traces_to_rank0 ? std::to_string(*r.report->traces_to_rank0) : "")
         << "," << format_double(r.report->final_rank());
    } else {
      os << ",,";
    }
    os << "\n";
  }
  return os.str();
}

// One line per cell, and one line per parameter value averaged over the
// cells that use it.
std::pair<std::string, std::string> grid_summaries(const std::vector<GridRow>& rows) {
  std::ostringstream cells, effects;
  cells << "cell,eta,crossover,truncation,runs,best_fitness,mean_best_fitness,"
           "mean_incremental_key_rank,best_mean_incremental_key_rank\n";
  std::map<std::size_t, std::vector<const GridRow*>> by_cell;
  for (const auto& r : rows) by_cell[r.cell].push_back(&r);
  for (const auto& [cell, rs] : by_cell) {
    std::vector<double> fit, mikr;
    for (const auto* r : rs) {
      fit.push_back(r->best_fitness);
      if (r->report) mikr.push_back(r->report->mean_incremental_key_rank);
    }
    cells << cell << "," << format_double(rs[0]->eta) << "," << to_string(rs[0]->crossover) << ","
          << format_double(rs[0]->truncation) << "," << rs.size() << ","
          << format_double(*std::min_element(fit.begin(), fit.end())) << ","
          << format_double(mean(fit)) << ",";
    if (!mikr.empty())
      cells << format_double(mean(mikr)) << ","
            << format_double(*std::min_element(mikr.begin(), mikr.end()));
    else
      cells << ",";
    cells << "\n";
  }
  effects << "parameter,value,runs,mean_best_fitness,mean_incremental_key_rank\n";
  auto effect = [&](const std::string& name, auto key) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : rows) {
      auto& g = groups[key(r)];
      g.first.push_back(r.best_fitness);
      if (r.report) g.second.push_back(r.report->mean_incremental_key_rank);
    }
    for (const auto& [value, g] : groups) {
      effects << name << "," << value << "," << g.first.size() << ","
              << format_double(mean(g.first)) << ","
              << (g.second.empty() ? "" : format_double(mean(g.second))) << "\n";
    }
  };
  effect("eta", [](const GridRow& r) { return format_double(r.eta); });
  effect("crossover", [](const GridRow& r) { return to_string(r.crossover); });
  effect("truncation", [](const GridRow& r) { return format_double(r.truncation); });
  return {cells.str(), effects.str()};
}

void grid_search(const GridOptions& o) {
  if (o.repeats < 1) throw ValidationError("--repeats must be positive");
  if (o.etas.empty() || o.crossovers.empty() || o.truncations.empty())
    throw ValidationError("every grid axis needs at least one value");
  const EvolutionConfig base = o.flags.resolve();
  const fs::path train_path = o.data.resolve(o.data.train, kTrainFile, "--train");
  const fs::path valid_path = o.data.resolve(o.data.valid, kValidFile, "--valid");
  Manifest manifest("grid-search");
  manifest.add_input(train_path);
  manifest.add_input(valid_path);
  const ProfilingData data = load_profiling(train_path, valid_path);
  std::optional<TraceSet> attack;
  if (!o.skip_attack) {
    const fs::path attack_path = o.data.resolve(o.data.attack, kAttackFile, "--attack");
    manifest.add_input(attack_path);
    attack = read_traceset(attack_path);
  }

  json cfg = json::parse(encode_config(base));
  cfg["repeats"] = o.repeats;
  cfg["etas"] = o.etas;
  cfg["crossovers"] = o.crossovers;
  cfg["truncations"] = o.truncations;
  cfg["attack"] = o.skip_attack ? json(nullptr)
                                : json{{"epochs", o.attack.epochs},
                                       {"folds", o.attack.folds},
                                       {"n_traces", o.attack.n_traces}};
  manifest.set_config(cfg);

  const fs::path out = o.out_dir;
  fs::create_directories(out);
  std::vector<GridRow> rows;
  std::size_t cell = 0;
  for (double eta : o.etas) {
    for (const auto& xo : o.crossovers) {
      for (double trunc : o.truncations) {
        for (int rep = 0; rep < o.repeats; ++rep) {
          EvolutionConfig c = base;
          c.eta = eta;
          c.crossover = parse_crossover_kind(xo);
          c.truncation_proportion = trunc;
          // Repeat r uses the same seed in every cell.
          c.master_seed = derive_seed(base.master_seed, {static_cast<std::uint64_t>(rep)});
          c.validate();
          const fs::path dir = out / ("cell" + std::to_string(cell) + "_rep" + std::to_string(rep));
          RunState state = initial_state(c);
          const fs::path ckpt = dir / "checkpoint.json";
          if (fs::exists(ckpt)) {
            RunState previous = read_checkpoint(ckpt);
            previous.config.parallel_workers = c.parallel_workers;
            if (encode_config(previous.config) != encode_config(c))
              throw ValidationError(ckpt.string() + " belongs to a different configuration");
            state = std::move(previous);
          }
          std::ostringstream prefix;
          prefix << "[cell " << cell << " eta " << format_double(eta) << " " << xo << " trunc "
                 << format_double(trunc) << " rep " << rep << "] ";
          const RunResult r = run_in_dir({std::move(state), dir, std::nullopt, prefix.str()}, data,
                                         manifest);
          GridRow row{cell, eta, trunc, c.crossover, rep, c.master_seed, r.best_fitness, {}};
          if (attack && std::isfinite(r.best_fitness)) {
            AttackSettings s = o.attack;
            s.seed = c.master_seed;
            s.batch_size = c.batch_size;
            s.learning_rate = c.learning_rate;
            s.workers = c.parallel_workers;
            const auto ev = evaluate_genome(r.best_genome, data.train, *attack, s);
            row.report = ev.report;
            write_artifact(manifest, dir, "attack_report.json", report_json(ev.report));
            write_artifact(manifest, dir, "ge_curve.csv", ge_curve_csv(ev.report));
            std::cerr << prefix.str() << "mean incremental key rank "
                      << format_double(ev.report.mean_incremental_key_rank) << "\n";
          }
          rows.push_back(std::move(row));
          write_artifact(manifest, out, "grid.csv", grid_csv(rows));
        }
        ++cell;
      }
    }
  }
  const auto [cells, effects] = grid_summaries(rows);
  write_artifact(manifest, out, "grid_summary.csv", cells);
  write_artifact(manifest, out, "grid_effects.csv", effects);
  manifest.write(out / "manifest.json");
  std::cout << cells;
}

}  // namespace

Command add_evolve(CLI::App& root) {
  auto o = std::make_shared<EvolveOptions>();
  CLI::App* app = root.add_subcommand("evolve", "Evolve CNN architectures on profiling traces");
  o->data.add_to(*app, false);
  o->flags.add_to(*app);
  app->add_option("--out", o->out_dir, "Run directory for checkpoint, logs and best genome")
      ->required();
  app->add_option("--resume", o->resume_from, "Continue from a checkpoint file")
      ->check(CLI::ExistingFile);
  app->add_option("--stop-before", o->stop_before,
                  "Stop (after checkpointing) before evaluating this generation");
  return {app, [o] { evolve(*o); }};
}

Command add_grid_search(CLI::App& root) {
  auto o = std::make_shared<GridOptions>();
  CLI::App* app = root.add_subcommand("grid-search", "Run evolution over a grid of GA settings");
  o->data.add_to(*app, true);
  o->flags.add_to(*app);
  app->add_option("--out", o->out_dir, "Output directory")->required();
  app->add_option("--repeats", o->repeats, "Runs per grid cell")->capture_default_str();
  app->add_option("--etas", o->etas, "Polynomial mutation eta values")->delimiter(',');
  app->add_option("--crossovers", o->crossovers, "Crossover kinds")->delimiter(',');
  app->add_option("--truncations", o->truncations, "Truncation proportions")->delimiter(',');
  app->add_flag("--skip-attack", o->skip_attack, "Do not train and attack the champions");
  app->add_option("--eval-epochs", o->attack.epochs, "Champion training epochs")
      ->capture_default_str();
  app->add_option("--folds", o->attack.folds, "Guessing-entropy folds")->capture_default_str();
  app->add_option("--n-traces", o->attack.n_traces, "Attack traces per fold")
      ->capture_default_str();
  return {app, [o] { grid_search(*o); }};
}

}  // namespace nascty::cli
