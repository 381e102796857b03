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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nascty/neural_engine.hpp"

namespace nascty {

struct TraceSet;

using KeyScores = std::array<double, kNumClasses>;

/// Per-candidate sum over traces of log P_i(SBOX(p_i ^ k)), each probability
/// clamped below at 1e-12. `probs` is n x 256 row-major.
KeyScores log_prob_vector(std::span<const float> probs, std::span<const std::uint8_t> plaintexts);
KeyScores log_prob_vector(std::span<const double> probs, std::span<const std::uint8_t> plaintexts);

/// Number of candidates whose score is strictly greater than the true key's.
int key_rank(std::span<const double> scores, std::uint8_t true_key);

struct AttackReport {
  std::vector<double> ge_curve;  // ge_curve[i]: mean rank using i + 1 traces
  std::optional<std::size_t> traces_to_rank0;
  double mean_incremental_key_rank = 0.0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;

  std::size_t n_traces() const { return ge_curve.size(); }
  double final_rank() const { return ge_curve.empty() ? 0.0 : ge_curve.back(); }
};

/// Smallest trace count whose mean rank is 0 and stays 0 for every larger
/// count in the curve.
std::optional<std::size_t> traces_to_rank0(std::span<const double> ge_curve);

/// Guessing entropy from precomputed attack probabilities (m x 256). Each
/// fold draws n_traces of the m traces without replacement and ranks the key
/// after every additional trace.
AttackReport guessing_entropy(std::span<const float> probs, std::span<const std::uint8_t> plaintexts,
                              std::uint8_t true_key, std::size_t n_traces, std::size_t folds,
                              std::uint64_t seed, int workers = 1);

/// Runs the network over the attack set, then the probability form above.
/// The attack set must use a single key.
AttackReport guessing_entropy(const TrainedNetwork& net, const TraceSet& attack_set,
                              std::size_t n_traces, std::size_t folds, std::uint64_t seed,
                              int workers = 1);

/// The fixed key of an attack set; throws ValidationError if keys differ.
std::uint8_t single_key(const TraceSet& attack_set);

/// Structured text form (JSON).
std::string report_json(const AttackReport& report);

/// "n_traces,mean_key_rank" rows, one per curve point.
std::string ge_curve_csv(const AttackReport& report);

}  // namespace nascty
