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

#include "nascty/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "nascty/neural_engine.hpp"
#include "nascty/trace_model.hpp"
#include "nascty/util.hpp"

namespace nascty {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kGaStreamTag = 0x6761;  // "ga"
constexpr std::uint64_t kTrainStreamTag = 0x7472;

double parse_double(const json& j, const char* what) {
  if (!j.is_string()) throw CheckpointError(std::string(what) + " must be a number string");
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw CheckpointError(std::string(what) + " is not a number: " + s);
  return v;
}

}  // namespace

std::string to_string(CrossoverKind kind) {
  return kind == CrossoverKind::OnePoint ? "one-point" : "parameter-wise";
}

CrossoverKind parse_crossover_kind(const std::string& text) {
  if (text == "one-point" || text == "one_point" || text == "onepoint")
    return CrossoverKind::OnePoint;
  if (text == "parameter-wise" || text == "parameter_wise" || text == "parameterwise")
    return CrossoverKind::ParameterWise;
  throw ValidationError("unknown crossover kind '" + text +
                        "', expected one-point or parameter-wise");
}

void EvolutionConfig::validate() const {
  if (population_size < 2 || population_size % 2 != 0)
    throw ValidationError("population_size must be an even number >= 2, got " +
                          std::to_string(population_size));
  if (max_generations < 1) throw ValidationError("max_generations must be positive");
  if (tournament_size < 1) throw ValidationError("tournament_size must be positive");
  if (!(truncation_proportion > 0.0 && truncation_proportion <= 1.0))
    throw ValidationError("truncation_proportion must be in (0, 1]");
  if (static_cast<std::size_t>(tournament_size) > pool_size())
    throw ValidationError("tournament_size " + std::to_string(tournament_size) +
                          " exceeds the truncation pool of " + std::to_string(pool_size()));
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("eta must be positive");
  if (train_epochs < 1) throw ValidationError("train_epochs must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be positive");
  if (parallel_workers < 1) throw ValidationError("parallel_workers must be positive");
}

std::size_t EvolutionConfig::pool_size() const {
  const double raw = truncation_proportion * static_cast<double>(population_size);
  // Guard against 0.5 * 52 landing a hair above 26.
  const auto pool = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(pool, 1, static_cast<std::size_t>(std::max(1, population_size)));
}

std::uint64_t generation_seed(std::uint64_t master_seed, int generation) {
  return derive_seed(master_seed, {kTrainStreamTag, static_cast<std::uint64_t>(generation)});
}

double evaluate_fitness(const Genome& genome, const TraceSet& train, const TraceSet& valid,
                        const EvolutionConfig& cfg, std::uint64_t training_seed,
                        std::string* diagnostic) {
  try {
    const auto specs = express(genome, train.n_samples);
    TrainedNetwork net(specs, train.n_samples);
    net.init_parameters(training_seed);
    TrainConfig tc;
    tc.epochs = cfg.train_epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = derive_seed(training_seed, {1});
    nascty::train(net, train.traces, train.labels, tc);
    const double loss = evaluate_loss(net, valid.traces, valid.labels);
    if (!std::isfinite(loss)) {
      if (diagnostic) *diagnostic = "validation loss is not finite";
      return kWorstFitness;
    }
    return loss;
  } catch (const std::exception& e) {
    if (diagnostic) *diagnostic = e.what();
    return kWorstFitness;
  }
}

FitnessFunction training_fitness(const TraceSet& train, const TraceSet& valid,
                                 const EvolutionConfig& cfg) {
  if (train.n_samples != valid.n_samples)
    throw ValidationError("training and validation traces differ in length");
  return [&train, &valid, cfg](const Genome& g, std::uint64_t seed) {
    std::string why;
    const double f = evaluate_fitness(g, train, valid, cfg, seed, &why);
    if (!why.empty()) std::cerr << "fitness: " << summarize(g) << ": " << why << "\n";
    return f;
  };
}

std::vector<std::size_t> rank_population(std::span<const Genome> population,
                                         std::span<const double> fitness) {
  if (population.size() != fitness.size())
    throw ValidationError("population and fitness sizes differ");
  std::vector<std::string> keys;
  keys.reserve(population.size());
  for (const auto& g : population) keys.push_back(serialize_genome(g));
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    // NaN never reaches here from the built-in fitness; treat it as worst.
    const double fa = std::isnan(fitness[a]) ? kWorstFitness : fitness[a];
    const double fb = std::isnan(fitness[b]) ? kWorstFitness : fitness[b];
    if (fa != fb) return fa < fb;
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return a < b;
  });
  return order;
}

std::vector<Genome> select_parents(std::span<const Genome> population,
                                   std::span<const double> fitness, const EvolutionConfig& cfg,
                                   Rng& rng, std::vector<std::size_t>* chosen) {
  const auto order = rank_population(population, fitness);
  const std::size_t pool = std::min(cfg.pool_size(), order.size());
  const std::size_t n_parents = population.size() / 2;
  std::vector<Genome> parents;
  parents.reserve(n_parents);
  if (chosen) chosen->clear();
  for (std::size_t p = 0; p < n_parents; ++p) {
    // Pool positions are already in preference order, so the lowest
    // position wins the tournament.
    std::size_t best = pool;
    for (int t = 0; t < cfg.tournament_size; ++t) best = std::min(best, rng.index(pool));
    parents.push_back(population[order[best]]);
    if (chosen) chosen->push_back(order[best]);
  }
  return parents;
}

Operators default_operators(const EvolutionConfig& cfg) {
  Operators ops;
  if (cfg.crossover == CrossoverKind::OnePoint) {
    ops.crossover = [](const Genome& a, const Genome& b, Rng& rng) {
      return one_point_crossover(a, b, rng);
    };
  } else {
    ops.crossover = [](const Genome& a, const Genome& b, Rng& rng) {
      return parameterwise_crossover(a, b, rng);
    };
  }
  const double eta = cfg.eta;
  ops.mutate = [eta](const Genome& g, Rng& rng) { return mutate(g, eta, rng); };
  return ops;
}

std::vector<Genome> produce_offspring(std::span<const Genome> parents, const Operators& ops,
                                      Rng& rng) {
  const std::size_t n = parents.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Genome> offspring;
  offspring.reserve(n);
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    auto [c1, c2] = ops.crossover(parents[order[i]], parents[order[i + 1]], rng);
    offspring.push_back(ops.mutate(c1, rng));
    offspring.push_back(ops.mutate(c2, rng));
  }
  if (n % 2 == 1) {
    const std::size_t last = order[n - 1];
    const std::size_t partner = n > 1 ? order[rng.index(n - 1)] : last;
    auto children = ops.crossover(parents[last], parents[partner], rng);
    offspring.push_back(ops.mutate(children.first, rng));
  }
  return offspring;
}

double population_diversity(std::span<const Genome> population) {
  const std::size_t n = population.size();
  if (n < 2) return 0.0;
  long long total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += layer_count_distance(population[i], population[j]);
  return static_cast<double>(total) / static_cast<double>(n * (n - 1) / 2);
}

// ---------------------------------------------------------------------------

RunState initial_state(const EvolutionConfig& cfg) {
  cfg.validate();
  RunState state;
  state.config = cfg;
  state.rng = Rng(derive_seed(cfg.master_seed, {kGaStreamTag}));
  for (int i = 0; i < cfg.population_size; ++i) state.population.push_back(random_genome(state.rng));
  return state;
}

namespace {

GenerationRecord evaluate_generation(RunState& state, const FitnessFunction& fitness) {
  const auto t0 = std::chrono::steady_clock::now();
  const EvolutionConfig& cfg = state.config;
  GenerationRecord rec;
  rec.generation = state.generation;
  rec.rng_digest = sha256_hex(state.rng.state());
  const std::uint64_t seed = generation_seed(cfg.master_seed, state.generation);
  rec.fitness.assign(state.population.size(), kWorstFitness);
  parallel_for(state.population.size(), cfg.parallel_workers, [&](std::size_t i) {
    const double f = fitness(state.population[i], seed);
    rec.fitness[i] = std::isnan(f) ? kWorstFitness : f;
  });

  const auto order = rank_population(state.population, rec.fitness);
  rec.best_genome = state.population[order.front()];
  rec.best_fitness = rec.fitness[order.front()];
  double sum = 0.0;
  int finite = 0;
  for (double f : rec.fitness) {
    if (std::isfinite(f)) {
      sum += f;
      ++finite;
    } else {
      ++rec.n_invalid;
    }
  }
  rec.mean_fitness = finite > 0 ? sum / finite : kWorstFitness;
  rec.diversity = population_diversity(state.population);

  rec.best_so_far_genome = rec.best_genome;
  rec.best_so_far = rec.best_fitness;
  if (!state.records.empty()) {
    const auto& prev = state.records.back();
    // Strict improvement only, so the earliest champion is kept on ties.
    if (!(rec.best_fitness < prev.best_so_far)) {
      rec.best_so_far = prev.best_so_far;
      rec.best_so_far_genome = prev.best_so_far_genome;
    }
  }
  rec.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

RunResult resume(RunState state, const FitnessFunction& fitness, const RunOptions& options) {
  state.config.validate();
  if (state.population.size() != static_cast<std::size_t>(state.config.population_size))
    throw CheckpointError("population size does not match the configuration");
  RunResult result;
  while (!state.finished()) {
    if (options.checkpoint_path) write_checkpoint(*options.checkpoint_path, state);
    if (options.stop_before_generation && state.generation >= *options.stop_before_generation)
      break;
    GenerationRecord rec = evaluate_generation(state, fitness);
    state.records.push_back(rec);
    if (options.on_generation) options.on_generation(state.records.back());
    if (state.generation + 1 < state.config.max_generations) {
      const auto parents = select_parents(state.population, rec.fitness, state.config, state.rng);
      auto offspring = produce_offspring(parents, default_operators(state.config), state.rng);
      state.population = parents;
      state.population.insert(state.population.end(), offspring.begin(), offspring.end());
    }
    ++state.generation;
  }
  result.completed = state.finished();
  if (result.completed && options.checkpoint_path) write_checkpoint(*options.checkpoint_path, state);
  result.records = state.records;
  if (!state.records.empty()) {
    result.best_genome = state.records.back().best_so_far_genome;
    result.best_fitness = state.records.back().best_so_far;
  }
  result.state = std::move(state);
  return result;
}

RunResult run(const EvolutionConfig& cfg, const FitnessFunction& fitness,
              const RunOptions& options) {
  return resume(initial_state(cfg), fitness, options);
}

// ---------------------------------------------------------------------------

namespace {

json config_to_json(const EvolutionConfig& c) {
  json j;
  j["population_size"] = c.population_size;
  j["max_generations"] = c.max_generations;
  j["tournament_size"] = c.tournament_size;
  j["truncation_proportion"] = format_double(c.truncation_proportion);
  j["crossover"] = to_string(c.crossover);
  j["eta"] = format_double(c.eta);
  j["train_epochs"] = c.train_epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = format_double(c.learning_rate);
  j["master_seed"] = std::to_string(c.master_seed);
  j["parallel_workers"] = c.parallel_workers;
  return j;
}

EvolutionConfig config_from_json(const json& j) {
  EvolutionConfig c;
  try {
    c.population_size = j.at("population_size").get<int>();
    c.max_generations = j.at("max_generations").get<int>();
    c.tournament_size = j.at("tournament_size").get<int>();
    c.truncation_proportion = parse_double(j.at("truncation_proportion"), "truncation_proportion");
    c.crossover = parse_crossover_kind(j.at("crossover").get<std::string>());
    c.eta = parse_double(j.at("eta"), "eta");
    c.train_epochs = j.at("train_epochs").get<int>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = parse_double(j.at("learning_rate"), "learning_rate");
    c.master_seed = std::stoull(j.at("master_seed").get<std::string>());
    c.parallel_workers = j.at("parallel_workers").get<int>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad configuration: ") + e.what());
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("bad configuration: ") + e.what());
  }
  return c;
}

json genome_json(const Genome& g) { return json::parse(serialize_genome(g)); }

Genome genome_from(const json& j) {
  try {
    return parse_genome(j.dump());
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("bad genome in checkpoint: ") + e.what());
  }
}

json record_to_json(const GenerationRecord& r) {
  json j;
  j["generation"] = r.generation;
  json fit = json::array();
  for (double f : r.fitness) fit.push_back(format_double(f));
  j["fitness"] = std::move(fit);
  j["best_genome"] = genome_json(r.best_genome);
  j["best_fitness"] = format_double(r.best_fitness);
  j["best_so_far_genome"] = genome_json(r.best_so_far_genome);
  j["best_so_far"] = format_double(r.best_so_far);
  j["mean_fitness"] = format_double(r.mean_fitness);
  j["diversity"] = format_double(r.diversity);
  j["n_invalid"] = r.n_invalid;
  j["duration_seconds"] = format_double(r.duration_seconds);
  j["rng_digest"] = r.rng_digest;
  return j;
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  r.generation = j.at("generation").get<int>();
  for (const auto& f : j.at("fitness")) r.fitness.push_back(parse_double(f, "fitness"));
  r.best_genome = genome_from(j.at("best_genome"));
  r.best_fitness = parse_double(j.at("best_fitness"), "best_fitness");
  r.best_so_far_genome = genome_from(j.at("best_so_far_genome"));
  r.best_so_far = parse_double(j.at("best_so_far"), "best_so_far");
  r.mean_fitness = parse_double(j.at("mean_fitness"), "mean_fitness");
  r.diversity = parse_double(j.at("diversity"), "diversity");
  r.n_invalid = j.at("n_invalid").get<int>();
  r.duration_seconds = parse_double(j.at("duration_seconds"), "duration_seconds");
  r.rng_digest = j.at("rng_digest").get<std::string>();
  return r;
}

}  // namespace

std::string encode_config(const EvolutionConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

EvolutionConfig decode_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("configuration must be a JSON object");
  EvolutionConfig c;
  auto number = [](const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (end != s.c_str() && *end == '\0') return d;
    }
    throw ValidationError("configuration key '" + key + "' must be a number");
  };
  auto integer = [&](const json& v, const std::string& key) {
    const double d = number(v, key);
    if (d != std::floor(d) || std::abs(d) > 9.007199254740992e15)
      throw ValidationError("configuration key '" + key + "' must be an integer");
    return d;
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "population_size") c.population_size = static_cast<int>(integer(v, key));
    else if (key == "max_generations") c.max_generations = static_cast<int>(integer(v, key));
    else if (key == "tournament_size") c.tournament_size = static_cast<int>(integer(v, key));
    else if (key == "truncation_proportion") c.truncation_proportion = number(v, key);
    else if (key == "crossover") {
      if (!v.is_string()) throw ValidationError("configuration key 'crossover' must be a string");
      c.crossover = parse_crossover_kind(v.get<std::string>());
    } else if (key == "eta") c.eta = number(v, key);
    else if (key == "train_epochs") c.train_epochs = static_cast<int>(integer(v, key));
    else if (key == "batch_size") {
      const double d = integer(v, key);
      if (d < 1) throw ValidationError("batch_size must be positive");
      c.batch_size = static_cast<std::size_t>(d);
    } else if (key == "learning_rate") c.learning_rate = number(v, key);
    else if (key == "master_seed") {
      // Seeds may exceed 2^53, so string values are parsed exactly.
      if (v.is_number_unsigned()) c.master_seed = v.get<std::uint64_t>();
      else if (v.is_string()) {
        const std::string s = v.get<std::string>();
        char* end = nullptr;
        c.master_seed = std::strtoull(s.c_str(), &end, 10);
        if (s.empty() || *end != '\0' || s[0] == '-')
          throw ValidationError("configuration key 'master_seed' must be a non-negative integer");
      } else {
        throw ValidationError("configuration key 'master_seed' must be a non-negative integer");
      }
    } else if (key == "parallel_workers") c.parallel_workers = static_cast<int>(integer(v, key));
    else throw ValidationError("unknown configuration key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string encode_checkpoint(const RunState& state) {
  json payload;
  payload["format"] = "nascty-checkpoint";
  payload["version"] = kCheckpointFormatVersion;
  payload["config"] = config_to_json(state.config);
  payload["generation"] = state.generation;
  payload["rng"] = state.rng.state();
  json pop = json::array();
  for (const auto& g : state.population) pop.push_back(genome_json(g));
  payload["population"] = std::move(pop);
  json recs = json::array();
  for (const auto& r : state.records) recs.push_back(record_to_json(r));
  payload["records"] = std::move(recs);
  json meta = json::object();
  for (const auto& [k, v] : state.metadata) meta[k] = v;
  payload["metadata"] = std::move(meta);
  const std::string body = payload.dump();
  json doc;
  doc["sha256"] = sha256_hex(body);
  doc["payload"] = std::move(payload);
  return doc.dump() + "\n";
}

RunState decode_checkpoint(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  RunState state;
  try {
    if (!doc.is_object() || !doc.contains("payload") || !doc.contains("sha256"))
      throw CheckpointError("corrupt checkpoint: missing payload or digest");
    const json& payload = doc.at("payload");
    if (sha256_hex(payload.dump()) != doc.at("sha256").get<std::string>())
      throw CheckpointError("corrupt checkpoint: digest mismatch");
    if (payload.at("format") != "nascty-checkpoint")
      throw CheckpointError("not a checkpoint file");
    const int version = payload.at("version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    state.config = config_from_json(payload.at("config"));
    state.generation = payload.at("generation").get<int>();
    state.rng.set_state(payload.at("rng").get<std::string>());
    for (const auto& g : payload.at("population")) state.population.push_back(genome_from(g));
    for (const auto& r : payload.at("records")) state.records.push_back(record_from_json(r));
    for (const auto& [k, v] : payload.at("metadata").items()) state.metadata[k] = v.get<std::string>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  if (encode_checkpoint(state) != text)
    throw CheckpointError("corrupt checkpoint: content is not in canonical form");
  return state;
}

void write_checkpoint(const std::filesystem::path& path, const RunState& state) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  write_file(tmp, encode_checkpoint(state));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot replace checkpoint " + path.string() + ": " + ec.message());
}

RunState read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

std::string generations_csv(std::span<const GenerationRecord> records) {
  std::string out = "generation,best_fitness,best_so_far,mean_fitness,diversity,n_invalid\n";
  for (const auto& r : records) {
    out += std::to_string(r.generation) + "," + format_double(r.best_fitness) + "," +
           format_double(r.best_so_far) + "," + format_double(r.mean_fitness) + "," +
           format_double(r.diversity) + "," + std::to_string(r.n_invalid) + "\n";
  }
  return out;
}

std::string timings_csv(std::span<const GenerationRecord> records) {
  std::string out = "generation,duration_seconds\n";
  for (const auto& r : records)
    out += std::to_string(r.generation) + "," + format_double(r.duration_seconds) + "\n";
  return out;
}

}  // namespace nascty
