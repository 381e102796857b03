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

#include <array>
#include <iostream>

#include "cli.hpp"
#include "nascty/rng.hpp"
#include "nascty/trace_store.hpp"
#include "nascty/util.hpp"

namespace nascty::cli {

namespace {

struct GenTracesOptions {
  std::string out_dir;
  std::size_t n_samples = 700;
  std::size_t leak_point = 350;
  std::optional<std::size_t> mask_point;
  double noise_sigma = 1.0;
  bool masking = false;
  int key = 0x4d;
  std::uint64_t seed = 0;
  std::size_t desync_level = 0;
  std::size_t train_per_class = 139;
  std::size_t val_per_class = 15;
  std::size_t attack_traces = 10000;
};

// Generates a pool large enough for the balanced profiling splits; grows the
// pool until no class is short.
std::vector<TraceSet> profiling_splits(const TraceParams& params, std::size_t train_pc,
                                       std::size_t val_pc, std::uint64_t split_seed) {
  const std::array<std::size_t, 2> counts{train_pc, val_pc};
  std::size_t n = kNumClasses * (train_pc + val_pc) * 5 / 4 + 1024;
  for (;;) {
    try {
      return split_balanced(generate(params, n), counts, split_seed);
    } catch (const DeficientClassError&) {
      n += n / 2;
    }
  }
}

void gen_traces(const GenTracesOptions& o) {
  TraceParams p;
  p.n_samples = o.n_samples;
  p.leak_point_value = o.leak_point;
  p.leak_point_mask = o.mask_point;
  p.noise_sigma = o.noise_sigma;
  p.masking_enabled = o.masking;
  p.key_byte = static_cast<std::uint8_t>(o.key);
  p.max_desync = o.desync_level;
  p.validate();
  if (o.train_per_class == 0) throw ValidationError("--train-per-class must be positive");
  if (o.val_per_class == 0) throw ValidationError("--val-per-class must be positive");
  if (o.attack_traces == 0) throw ValidationError("--attack-traces must be positive");

  TraceParams prof = p;
  prof.seed = derive_seed(o.seed, {0x70726f66});
  TraceParams att = p;
  att.seed = derive_seed(o.seed, {0x61747461});

  std::cerr << "generating profiling traces (" << o.train_per_class << " + " << o.val_per_class
            << " per class, " << o.n_samples << " samples)\n";
  auto splits = profiling_splits(prof, o.train_per_class, o.val_per_class,
                                 derive_seed(o.seed, {0x73706c74}));
  TraceSet attack = generate(att, o.attack_traces);
  if (o.desync_level > 0) {
    splits[0] = desynchronize(splits[0], o.desync_level, derive_seed(o.seed, {0x64, 0}));
    splits[1] = desynchronize(splits[1], o.desync_level, derive_seed(o.seed, {0x64, 1}));
    attack = desynchronize(attack, o.desync_level, derive_seed(o.seed, {0x64, 2}));
  }

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  Manifest manifest("gen-traces");
  json cfg;
  cfg["n_samples"] = o.n_samples;
  cfg["leak_point_value"] = o.leak_point;
  cfg["leak_point_mask"] = o.mask_point ? json(*o.mask_point) : json(nullptr);
  cfg["noise_sigma"] = format_double(o.noise_sigma);
  cfg["masking_enabled"] = o.masking;
  cfg["key_byte"] = o.key;
  cfg["seed"] = std::to_string(o.seed);
  cfg["desync_level"] = o.desync_level;
  cfg["train_per_class"] = o.train_per_class;
  cfg["val_per_class"] = o.val_per_class;
  cfg["attack_traces"] = o.attack_traces;
  manifest.set_config(cfg);
  const std::array<std::pair<const char*, const TraceSet*>, 3> outputs{
      {{kTrainFile, &splits[0]}, {kValidFile, &splits[1]}, {kAttackFile, &attack}}};
  for (const auto& [name, ts] : outputs) {
    write_traceset(*ts, dir / name);
    manifest.add_artifact(dir / name);
    std::cout << (dir / name).string() << ": " << ts->n_traces << " traces\n";
  }
  manifest.write(dir / "manifest.json");
}

}  // namespace

Command add_gen_traces(CLI::App& root) {
  auto o = std::make_shared<GenTracesOptions>();
  CLI::App* app = root.add_subcommand("gen-traces", "Generate synthetic train/validation/attack trace files");
  app->add_option("--out-dir", o->out_dir, "Output directory")->required();
  app->add_option("--n-samples", o->n_samples, "Samples per trace")->capture_default_str();
  app->add_option("--leak-point", o->leak_point, "Sample index leaking HW of the intermediate")
      ->capture_default_str();
  auto* masking = app->add_flag("--masking", o->masking, "Boolean-mask the s-box output");
  app->add_option("--mask-point", o->mask_point, "Sample index leaking HW of the mask")
      ->needs(masking);
  app->add_option("--noise-sigma", o->noise_sigma, "Gaussian noise standard deviation")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--key", o->key, "Secret key byte")
      ->capture_default_str()
      ->check(CLI::Range(0, 255));
  app->add_option("--seed", o->seed, "Generation seed")->capture_default_str();
  app->add_option("--desync-level", o->desync_level, "Maximum desynchronization shift")
      ->capture_default_str()
      ->check(CLI::IsMember({0, 10, 30, 50}));
  app->add_option("--train-per-class", o->train_per_class, "Training traces per label")
      ->capture_default_str();
  app->add_option("--val-per-class", o->val_per_class, "Validation traces per label")
      ->capture_default_str();
  app->add_option("--attack-traces", o->attack_traces, "Attack traces (fixed key)")
      ->capture_default_str();
  return {app, [o] { gen_traces(*o); }};
}

}  // namespace nascty::cli
