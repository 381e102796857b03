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

#include "nascty/attack_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "nascty/rng.hpp"
#include "nascty/trace_model.hpp"
#include "nascty/util.hpp"

namespace nascty {

namespace {

template <typename T>
KeyScores log_probs_impl(std::span<const T> probs, std::span<const std::uint8_t> plaintexts) {
  if (probs.size() != plaintexts.size() * kNumClasses)
    throw ValidationError("probability rows (" + std::to_string(probs.size() / kNumClasses) +
                          ") do not match plaintexts (" + std::to_string(plaintexts.size()) + ")");
  KeyScores scores{};
  for (std::size_t i = 0; i < plaintexts.size(); ++i) {
    const T* row = probs.data() + i * kNumClasses;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const std::uint8_t label = sbox(static_cast<std::uint8_t>(plaintexts[i] ^ k));
      scores[k] += std::log(std::max<double>(row[label], kLogClamp));
    }
  }
  return scores;
}

}  // namespace

KeyScores log_prob_vector(std::span<const float> probs, std::span<const std::uint8_t> plaintexts) {
  return log_probs_impl(probs, plaintexts);
}

KeyScores log_prob_vector(std::span<const double> probs,
                          std::span<const std::uint8_t> plaintexts) {
  return log_probs_impl(probs, plaintexts);
}

int key_rank(std::span<const double> scores, std::uint8_t true_key) {
  if (scores.size() != kNumClasses) throw ValidationError("key rank needs 256 scores");
  const double ref = scores[true_key];
  return static_cast<int>(std::count_if(scores.begin(), scores.end(),
                                        [ref](double s) { return s > ref; }));
}

std::optional<std::size_t> traces_to_rank0(std::span<const double> ge_curve) {
  std::optional<std::size_t> first;
  for (std::size_t i = ge_curve.size(); i-- > 0;) {
    if (ge_curve[i] != 0.0) break;
    first = i + 1;
  }
  return first;
}

AttackReport guessing_entropy(std::span<const float> probs, std::span<const std::uint8_t> plaintexts,
                              std::uint8_t true_key, std::size_t n_traces, std::size_t folds,
                              std::uint64_t seed, int workers) {
  const std::size_t m = plaintexts.size();
  if (probs.size() != m * kNumClasses)
    throw ValidationError("probability rows do not match plaintexts");
  if (n_traces == 0 || folds == 0) throw ValidationError("attack needs n_traces > 0 and folds > 0");
  if (n_traces > m)
    throw ValidationError("attack needs " + std::to_string(n_traces) + " traces, set has " +
                          std::to_string(m));

  // Per-trace candidate contributions, shared by all folds.
  std::vector<double> contrib(m * kNumClasses);
  for (std::size_t i = 0; i < m; ++i) {
    const float* row = probs.data() + i * kNumClasses;
    double* out = contrib.data() + i * kNumClasses;
    for (std::size_t k = 0; k < kNumClasses; ++k)
      out[k] = std::log(std::max<double>(row[sbox(static_cast<std::uint8_t>(plaintexts[i] ^ k))],
                                         kLogClamp));
  }

  std::vector<std::vector<int>> ranks(folds);
  parallel_for(folds, workers, [&](std::size_t f) {
    Rng rng(derive_seed(seed, {f}));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_traces; ++i) std::swap(order[i], order[i + rng.index(m - i)]);
    KeyScores acc{};
    auto& r = ranks[f];
    r.resize(n_traces);
    for (std::size_t i = 0; i < n_traces; ++i) {
      const double* c = contrib.data() + order[i] * kNumClasses;
      for (std::size_t k = 0; k < kNumClasses; ++k) acc[k] += c[k];
      r[i] = key_rank(acc, true_key);
    }
  });

  AttackReport report;
  report.folds = folds;
  report.seed = seed;
  report.ge_curve.assign(n_traces, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n_traces; ++i) {
    long long sum = 0;
    for (std::size_t f = 0; f < folds; ++f) sum += ranks[f][i];
    report.ge_curve[i] = static_cast<double>(sum) / static_cast<double>(folds);
    total += static_cast<double>(sum);
  }
  report.mean_incremental_key_rank = total / static_cast<double>(folds * n_traces);
  report.traces_to_rank0 = traces_to_rank0(report.ge_curve);
  return report;
}

std::uint8_t single_key(const TraceSet& attack_set) {
  if (attack_set.keys.empty()) throw ValidationError("attack set is empty");
  const std::uint8_t key = attack_set.keys.front();
  for (std::uint8_t k : attack_set.keys)
    if (k != key) throw ValidationError("attack set must use a single fixed key");
  return key;
}

AttackReport guessing_entropy(const TrainedNetwork& net, const TraceSet& attack_set,
                              std::size_t n_traces, std::size_t folds, std::uint64_t seed,
                              int workers) {
  const std::uint8_t key = single_key(attack_set);
  if (attack_set.n_samples != net.input_length())
    throw ValidationError("attack traces have " + std::to_string(attack_set.n_samples) +
                          " samples, network expects " + std::to_string(net.input_length()));
  const auto probs = predict(net, attack_set.traces, attack_set.n_traces);
  return guessing_entropy(probs, attack_set.plaintexts, key, n_traces, folds, seed, workers);
}

std::string report_json(const AttackReport& report) {
  nlohmann::ordered_json j;
  j["n_traces"] = report.n_traces();
  j["folds"] = report.folds;
  j["seed"] = report.seed;
  j["mean_incremental_key_rank"] = report.mean_incremental_key_rank;
  j["final_key_rank"] = report.final_rank();
  if (report.traces_to_rank0) {
    j["traces_to_rank0"] = *report.traces_to_rank0;
  } else {
    j["traces_to_rank0"] = "not reached";
  }
  j["ge_curve"] = report.ge_curve;
  return j.dump(2) + "\n";
}

std::string ge_curve_csv(const AttackReport& report) {
  std::string out = "n_traces,mean_key_rank\n";
  for (std::size_t i = 0; i < report.ge_curve.size(); ++i)
    out += std::to_string(i + 1) + "," + format_double(report.ge_curve[i]) + "\n";
  return out;
}

}  // namespace nascty
