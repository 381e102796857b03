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
#include <optional>
#include <span>
#include <vector>

#include "nascty/common.hpp"

namespace nascty {

/// AES forward S-box.
std::uint8_t sbox(std::uint8_t x);

/// SBOX(p ^ k) ^ r when masking is enabled, SBOX(p ^ k) otherwise.
std::uint8_t intermediate(std::uint8_t p, std::uint8_t k, std::uint8_t r, bool masking);

int hamming_weight(std::uint8_t x);

// Synthetic leakage: Gaussian noise everywhere, plus HW(Z) at the value point
// and HW(r) at the optional mask point.
struct TraceParams {
  std::size_t n_samples = 700;
  std::size_t leak_point_value = 350;
  std::optional<std::size_t> leak_point_mask;
  double noise_sigma = 1.0;
  std::size_t max_desync = 0;
  bool masking_enabled = false;
  std::uint8_t key_byte = 0x4d;
  std::uint64_t seed = 0;

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
};

/// Per-sample-index affine map of a profiling set onto [-1, 1].
struct NormalizationParams {
  std::vector<float> min;
  std::vector<float> max;
};

class DeficientClassError : public ValidationError {
 public:
  DeficientClassError(int label, std::size_t available, std::size_t required);
  int label() const { return label_; }

 private:
  int label_;
};

struct TraceSet {
  std::size_t n_traces = 0;
  std::size_t n_samples = 0;
  std::vector<float> traces;  // n_traces x n_samples, row-major
  std::vector<std::uint8_t> plaintexts;
  std::vector<std::uint8_t> keys;
  std::vector<std::uint8_t> labels;
  std::optional<std::vector<std::uint8_t>> masks;
  bool normalized = false;

  // In-memory metadata; not part of the on-disk format.
  double noise_sigma = 0.0;
  std::vector<std::uint32_t> shifts;
  std::optional<NormalizationParams> normalization;

  std::span<const float> trace(std::size_t i) const {
    return {traces.data() + i * n_samples, n_samples};
  }
  std::span<float> trace(std::size_t i) {
    return {traces.data() + i * n_samples, n_samples};
  }

  /// Shape and label consistency; throws ValidationError.
  void validate() const;

  /// Copies the listed traces, in order.
  TraceSet select(std::span<const std::size_t> indices) const;

  /// Equality of the persisted fields only.
  bool same_content(const TraceSet& other) const;
};

TraceSet generate(const TraceParams& params, std::size_t n_traces);

/// Shifts every trace right by an independent uniform d in [0, max_desync].
/// Vacated leading samples receive fresh N(0, ts.noise_sigma) noise.
TraceSet desynchronize(const TraceSet& ts, std::size_t max_desync, std::uint64_t seed);

/// Exactly n_per_class traces per label, shuffled.
TraceSet sample_balanced(const TraceSet& ts, std::size_t n_per_class, std::uint64_t seed);

/// Disjoint balanced subsets, one per entry of `per_class`.
std::vector<TraceSet> split_balanced(const TraceSet& ts,
                                     std::span<const std::size_t> per_class,
                                     std::uint64_t seed);

NormalizationParams fit_normalization(const TraceSet& ts);
TraceSet apply_normalization(const TraceSet& ts, const NormalizationParams& params);

/// Per-sample-index min-max scaling of the set onto [-1, 1]; constant sample
/// indices map to 0. The fitted parameters are kept in `normalization`.
TraceSet normalize(const TraceSet& ts);

}  // namespace nascty
