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

#include "nascty/trace_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <numeric>
#include <string>

#include "nascty/rng.hpp"

namespace nascty {

namespace {

constexpr std::array<std::uint8_t, 256> kSbox = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
};

}  // namespace

std::uint8_t sbox(std::uint8_t x) { return kSbox[x]; }

std::uint8_t intermediate(std::uint8_t p, std::uint8_t k, std::uint8_t r, bool masking) {
  const std::uint8_t z = sbox(static_cast<std::uint8_t>(p ^ k));
  return masking ? static_cast<std::uint8_t>(z ^ r) : z;
}

int hamming_weight(std::uint8_t x) { return std::popcount(x); }

void TraceParams::validate() const {
  if (n_samples == 0) throw ValidationError("n_samples must be positive");
  if (leak_point_value >= n_samples)
    throw ValidationError("leak_point_value " + std::to_string(leak_point_value) +
                          " must be < n_samples " + std::to_string(n_samples));
  if (leak_point_mask) {
    if (*leak_point_mask >= n_samples)
      throw ValidationError("leak_point_mask " + std::to_string(*leak_point_mask) +
                            " must be < n_samples " + std::to_string(n_samples));
    if (*leak_point_mask == leak_point_value)
      throw ValidationError("leak_point_mask must differ from leak_point_value");
  }
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be non-negative");
  if (max_desync >= n_samples)
    throw ValidationError("max_desync " + std::to_string(max_desync) +
                          " must be < n_samples " + std::to_string(n_samples));
}

DeficientClassError::DeficientClassError(int label, std::size_t available,
                                         std::size_t required)
    : ValidationError("label " + std::to_string(label) + " has " +
                      std::to_string(available) + " traces, " +
                      std::to_string(required) + " required"),
      label_(label) {}

void TraceSet::validate() const {
  if (traces.size() != n_traces * n_samples)
    throw ValidationError("trace matrix size does not match n_traces x n_samples");
  if (plaintexts.size() != n_traces || keys.size() != n_traces ||
      labels.size() != n_traces)
    throw ValidationError("per-trace byte columns must have n_traces entries");
  if (masks && masks->size() != n_traces)
    throw ValidationError("mask column must have n_traces entries");
  for (std::size_t i = 0; i < n_traces; ++i) {
    if (labels[i] != sbox(static_cast<std::uint8_t>(plaintexts[i] ^ keys[i])))
      throw ValidationError("label of trace " + std::to_string(i) +
                            " is not SBOX(plaintext ^ key)");
  }
}

TraceSet TraceSet::select(std::span<const std::size_t> indices) const {
  TraceSet out;
  out.n_traces = indices.size();
  out.n_samples = n_samples;
  out.normalized = normalized;
  out.noise_sigma = noise_sigma;
  out.normalization = normalization;
  out.traces.resize(out.n_traces * n_samples);
  out.plaintexts.reserve(out.n_traces);
  out.keys.reserve(out.n_traces);
  out.labels.reserve(out.n_traces);
  if (masks) out.masks.emplace().reserve(out.n_traces);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t i = indices[j];
    std::copy_n(traces.begin() + static_cast<std::ptrdiff_t>(i * n_samples), n_samples,
                out.traces.begin() + static_cast<std::ptrdiff_t>(j * n_samples));
    out.plaintexts.push_back(plaintexts[i]);
    out.keys.push_back(keys[i]);
    out.labels.push_back(labels[i]);
    if (masks) out.masks->push_back((*masks)[i]);
    if (!shifts.empty()) out.shifts.push_back(shifts[i]);
  }
  return out;
}

bool TraceSet::same_content(const TraceSet& other) const {
  return n_traces == other.n_traces && n_samples == other.n_samples &&
         normalized == other.normalized && traces == other.traces &&
         plaintexts == other.plaintexts && keys == other.keys &&
         labels == other.labels && masks == other.masks;
}

TraceSet generate(const TraceParams& params, std::size_t n_traces) {
  params.validate();
  if (n_traces == 0) throw ValidationError("n_traces must be positive");

  TraceSet ts;
  ts.n_traces = n_traces;
  ts.n_samples = params.n_samples;
  ts.noise_sigma = params.noise_sigma;
  ts.traces.resize(n_traces * params.n_samples);
  ts.plaintexts.resize(n_traces);
  ts.keys.assign(n_traces, params.key_byte);
  ts.labels.resize(n_traces);
  if (params.masking_enabled) ts.masks.emplace(n_traces);

  Rng rng(params.seed);
  for (std::size_t i = 0; i < n_traces; ++i) {
    const std::uint8_t p = rng.byte();
    const std::uint8_t r = params.masking_enabled ? rng.byte() : 0;
    ts.plaintexts[i] = p;
    if (ts.masks) (*ts.masks)[i] = r;
    ts.labels[i] = sbox(static_cast<std::uint8_t>(p ^ params.key_byte));

    auto row = ts.trace(i);
    for (float& v : row) v = static_cast<float>(params.noise_sigma * rng.normal());
    const std::uint8_t z = intermediate(p, params.key_byte, r, params.masking_enabled);
    row[params.leak_point_value] += static_cast<float>(hamming_weight(z));
    if (params.masking_enabled && params.leak_point_mask)
      row[*params.leak_point_mask] += static_cast<float>(hamming_weight(r));
  }
  return ts;
}

TraceSet desynchronize(const TraceSet& ts, std::size_t max_desync, std::uint64_t seed) {
  if (max_desync >= ts.n_samples)
    throw ValidationError("max_desync " + std::to_string(max_desync) +
                          " must be < n_samples " + std::to_string(ts.n_samples));
  TraceSet out = ts;
  out.shifts.assign(ts.n_traces, 0);
  if (max_desync == 0) return out;

  Rng rng(seed);
  const std::size_t n = ts.n_samples;
  for (std::size_t i = 0; i < ts.n_traces; ++i) {
    const auto d = static_cast<std::size_t>(rng.uniform_u64(0, max_desync));
    out.shifts[i] = static_cast<std::uint32_t>(d);
    auto src = ts.trace(i);
    auto dst = out.trace(i);
    std::copy_n(src.begin(), n - d, dst.begin() + static_cast<std::ptrdiff_t>(d));
    for (std::size_t j = 0; j < d; ++j)
      dst[j] = static_cast<float>(ts.noise_sigma * rng.normal());
  }
  return out;
}

namespace {

// Per-label index lists, each shuffled by rng.
std::array<std::vector<std::size_t>, kNumClasses> shuffled_classes(const TraceSet& ts,
                                                                   Rng& rng) {
  std::array<std::vector<std::size_t>, kNumClasses> by_label;
  for (std::size_t i = 0; i < ts.n_traces; ++i) by_label[ts.labels[i]].push_back(i);
  for (auto& v : by_label) rng.shuffle(std::span<std::size_t>(v));
  return by_label;
}

}  // namespace

std::vector<TraceSet> split_balanced(const TraceSet& ts,
                                     std::span<const std::size_t> per_class,
                                     std::uint64_t seed) {
  const std::size_t total = std::accumulate(per_class.begin(), per_class.end(), std::size_t{0});
  for (std::size_t n : per_class)
    if (n == 0) throw ValidationError("n_per_class must be positive");

  Rng rng(seed);
  auto by_label = shuffled_classes(ts, rng);
  for (std::size_t label = 0; label < kNumClasses; ++label) {
    if (by_label[label].size() < total)
      throw DeficientClassError(static_cast<int>(label), by_label[label].size(), total);
  }

  std::vector<TraceSet> out;
  std::size_t offset = 0;
  for (std::size_t n : per_class) {
    std::vector<std::size_t> picked;
    picked.reserve(n * kNumClasses);
    for (const auto& v : by_label)
      picked.insert(picked.end(), v.begin() + static_cast<std::ptrdiff_t>(offset),
                    v.begin() + static_cast<std::ptrdiff_t>(offset + n));
    rng.shuffle(std::span<std::size_t>(picked));
    out.push_back(ts.select(picked));
    offset += n;
  }
  return out;
}

TraceSet sample_balanced(const TraceSet& ts, std::size_t n_per_class, std::uint64_t seed) {
  const std::array<std::size_t, 1> counts{n_per_class};
  return std::move(split_balanced(ts, counts, seed).front());
}

NormalizationParams fit_normalization(const TraceSet& ts) {
  if (ts.n_traces == 0 || ts.n_samples == 0)
    throw ValidationError("cannot normalize an empty trace set");
  NormalizationParams p;
  p.min.assign(ts.trace(0).begin(), ts.trace(0).end());
  p.max = p.min;
  for (std::size_t i = 1; i < ts.n_traces; ++i) {
    auto row = ts.trace(i);
    for (std::size_t j = 0; j < ts.n_samples; ++j) {
      p.min[j] = std::min(p.min[j], row[j]);
      p.max[j] = std::max(p.max[j], row[j]);
    }
  }
  return p;
}

TraceSet apply_normalization(const TraceSet& ts, const NormalizationParams& params) {
  if (params.min.size() != ts.n_samples || params.max.size() != ts.n_samples)
    throw ValidationError("normalization parameters do not match trace length");
  TraceSet out = ts;
  for (std::size_t i = 0; i < ts.n_traces; ++i) {
    auto row = out.trace(i);
    for (std::size_t j = 0; j < ts.n_samples; ++j) {
      const double lo = params.min[j];
      const double range = static_cast<double>(params.max[j]) - lo;
      row[j] = range > 0.0 ? static_cast<float>(2.0 * (row[j] - lo) / range - 1.0) : 0.0f;
    }
  }
  out.normalized = true;
  out.normalization = params;
  return out;
}

TraceSet normalize(const TraceSet& ts) {
  return apply_normalization(ts, fit_normalization(ts));
}

}  // namespace nascty
