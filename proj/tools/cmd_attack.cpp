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

#include <iostream>

#include "cli.hpp"
#include "nascty/network_io.hpp"
#include "nascty/trace_store.hpp"
#include "nascty/util.hpp"

namespace nascty::cli {

namespace {

void print_report(const AttackReport& r) {
  std::cout << "mean incremental key rank: " << format_double(r.mean_incremental_key_rank) << "\n"
            << "final mean key rank (" << r.n_traces() << " traces): "
            << format_double(r.final_rank()) << "\n"
            << "traces to rank 0: "
            << (r.traces_to_rank0 ? std::to_string(*r.traces_to_rank0) : "not reached") << "\n";
}

void write_report(Manifest& manifest, const fs::path& dir, const AttackReport& r) {
  write_artifact(manifest, dir, "report.json", report_json(r));
  write_artifact(manifest, dir, "ge_curve.csv", ge_curve_csv(r));
}

struct EvalGenomeOptions {
  std::string genome_file;
  std::string data_dir, train, attack;
  std::string out_dir;
  AttackSettings settings;
};

void eval_genome(EvalGenomeOptions o) {
  const Genome genome = parse_genome(read_file(o.genome_file));
  auto path = [&](const std::string& given, const char* file, const char* flag) {
    if (!given.empty()) return fs::path(given);
    if (o.data_dir.empty()) throw ValidationError(std::string("missing ") + flag + " (or --data DIR)");
    return fs::path(o.data_dir) / file;
  };
  const fs::path train_path = path(o.train, kTrainFile, "--train");
  const fs::path attack_path = path(o.attack, kAttackFile, "--attack");
  o.settings.workers = resolve_workers(o.settings.workers);

  Manifest manifest("eval-genome");
  manifest.add_input(o.genome_file);
  manifest.add_input(train_path);
  manifest.add_input(attack_path);
  json cfg;
  cfg["genome"] = json::parse(serialize_genome(genome));
  cfg["epochs"] = o.settings.epochs;
  cfg["batch_size"] = o.settings.batch_size;
  cfg["learning_rate"] = format_double(o.settings.learning_rate);
  cfg["folds"] = o.settings.folds;
  cfg["n_traces"] = o.settings.n_traces;
  cfg["seed"] = std::to_string(o.settings.seed);
  manifest.set_config(cfg);

  const TraceSet train = normalize(read_traceset(train_path));
  const TraceSet attack = read_traceset(attack_path);
  const auto specs = express(genome, train.n_samples);
  const std::string summary = architecture_summary(specs, train.n_samples);
  std::cout << summary;
  std::cerr << "training for " << o.settings.epochs << " epochs on " << train.n_traces
            << " traces\n";
  auto ev = evaluate_genome(genome, train, attack, o.settings);
  print_report(ev.report);

  const fs::path out = o.out_dir;
  fs::create_directories(out);
  write_artifact(manifest, out, "summary.txt", summary);
  write_report(manifest, out, ev.report);
  save_network(out / "network.nnet", ev.network);
  manifest.add_artifact(out / "network.nnet");
  write_artifact(manifest, out, "normalization.json",
                 normalization_to_json(*train.normalization).dump() + "\n");
  manifest.write(out / "manifest.json");
}

struct AttackOptions {
  std::string network, normalization, attack, out_dir;
  std::size_t n_traces = 2000;
  std::size_t folds = 100;
  std::uint64_t seed = 0;
  int workers = 1;
};

void attack(const AttackOptions& o) {
  Manifest manifest("attack");
  manifest.add_input(o.network);
  manifest.add_input(o.attack);
  json cfg;
  cfg["folds"] = o.folds;
  cfg["n_traces"] = o.n_traces;
  cfg["seed"] = std::to_string(o.seed);
  manifest.set_config(cfg);

  const TrainedNetwork net = load_network(o.network);
  TraceSet traces = read_traceset(o.attack);
  if (!o.normalization.empty()) {
    manifest.add_input(o.normalization);
    const auto params = normalization_from_json(read_file(o.normalization));
    if (params.min.size() != traces.n_samples)
      throw DataError("normalization covers " + std::to_string(params.min.size()) +
                      " samples but attack traces have " + std::to_string(traces.n_samples));
    traces = apply_normalization(traces, params);
  }
  if (traces.n_samples != net.input_length())
    throw DataError("network expects " + std::to_string(net.input_length()) +
                    " samples but attack traces have " + std::to_string(traces.n_samples));
  const auto report = guessing_entropy(net, traces, o.n_traces, o.folds,
                                       derive_seed(o.seed, {0x6765}), resolve_workers(o.workers));
  print_report(report);
  const fs::path out = o.out_dir;
  fs::create_directories(out);
  write_report(manifest, out, report);
  manifest.write(out / "manifest.json");
}

}  // namespace

Command add_eval_genome(CLI::App& root) {
  auto o = std::make_shared<EvalGenomeOptions>();
  CLI::App* app = root.add_subcommand(
      "eval-genome", "Train a genome's network and report its key-rank attack performance");
  app->add_option("--genome", o->genome_file, "Genome file")->required()->check(CLI::ExistingFile);
  app->add_option("--data", o->data_dir, "Directory written by gen-traces");
  app->add_option("--train", o->train, "Training trace file (default <data>/train.nct)");
  app->add_option("--attack", o->attack, "Attack trace file (default <data>/attack.nct)");
  app->add_option("--out", o->out_dir, "Output directory")->required();
  app->add_option("--epochs", o->settings.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch-size", o->settings.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--lr", o->settings.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--folds", o->settings.folds, "Guessing-entropy folds")->capture_default_str();
  app->add_option("--n-traces", o->settings.n_traces, "Attack traces per fold")
      ->capture_default_str();
  app->add_option("--seed", o->settings.seed, "Seed for initialization, batches and folds")
      ->capture_default_str();
  app->add_option("--workers", o->settings.workers, "Threads for fold evaluation")
      ->capture_default_str();
  return {app, [o] { eval_genome(*o); }};
}

Command add_attack(CLI::App& root) {
  auto o = std::make_shared<AttackOptions>();
  CLI::App* app = root.add_subcommand("attack", "Score a saved network against attack traces");
  app->add_option("--network", o->network, "Network file from eval-genome")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--normalization", o->normalization,
                  "normalization.json from eval-genome (omit for pre-scaled traces)")
      ->check(CLI::ExistingFile);
  app->add_option("--attack", o->attack, "Attack trace file")->required();
  app->add_option("--out", o->out_dir, "Output directory")->required();
  app->add_option("--folds", o->folds, "Guessing-entropy folds")->capture_default_str();
  app->add_option("--n-traces", o->n_traces, "Attack traces per fold")->capture_default_str();
  app->add_option("--seed", o->seed, "Fold sampling seed")->capture_default_str();
  app->add_option("--workers", o->workers, "Threads for fold evaluation")->capture_default_str();
  return {app, [o] { attack(*o); }};
}

}  // namespace nascty::cli
