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

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "nascty/trace_model.hpp"

using namespace nascty;

namespace {

// FIPS-197 S-box rows 0x00 and 0x50, typed in independently of the library table.
constexpr std::array<std::uint8_t, 16> kRow0 = {0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5,
                                                0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76};
constexpr std::array<std::uint8_t, 16> kRow5 = {0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b,
                                                0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf};

TraceParams quiet_params() {
  TraceParams p;
  p.n_samples = 40;
  p.leak_point_value = 20;
  p.noise_sigma = 0.0;
  p.seed = 11;
  return p;
}

}  // namespace

TEST_CASE("sbox matches reference rows and is a bijection") {
  for (int i = 0; i < 16; ++i) {
    CHECK(sbox(static_cast<std::uint8_t>(i)) == kRow0[i]);
    CHECK(sbox(static_cast<std::uint8_t>(0x50 + i)) == kRow5[i]);
  }
  CHECK(sbox(0x00) == 0x63);
  CHECK(sbox(0x53) == 0xED);
  std::set<int> seen;
  for (int x = 0; x < 256; ++x) seen.insert(sbox(static_cast<std::uint8_t>(x)));
  CHECK(seen.size() == 256);
}

TEST_CASE("intermediate follows the masked s-box equation") {
  CHECK(intermediate(0x00, 0x00, 0x00, true) == 0x63);
  CHECK(intermediate(0x5a, 0x5a, 0x63, true) == 0x00);
  CHECK(intermediate(0x12, 0x34, 0x56, true) == (sbox(0x26) ^ 0x56));
  CHECK(intermediate(0x12, 0x34, 0x56, false) == sbox(0x26));
}

TEST_CASE("hamming weight counts set bits") {
  for (int x = 0; x < 256; ++x) {
    int bits = 0;
    for (int b = 0; b < 8; ++b) bits += (x >> b) & 1;
    CHECK(hamming_weight(static_cast<std::uint8_t>(x)) == bits);
  }
}

TEST_CASE("parameter validation") {
  TraceParams p = quiet_params();
  p.leak_point_value = 40;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = quiet_params();
  p.leak_point_mask = 20;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = quiet_params();
  p.max_desync = 40;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(generate(quiet_params(), 0), ValidationError);
}

TEST_CASE("noise-free unmasked traces expose HW of the s-box output") {
  TraceParams p = quiet_params();
  p.key_byte = 0x00;
  const TraceSet ts = generate(p, 500);
  ts.validate();
  for (std::size_t i = 0; i < ts.n_traces; ++i) {
    const std::uint8_t z = sbox(static_cast<std::uint8_t>(ts.plaintexts[i] ^ ts.keys[i]));
    CHECK(ts.labels[i] == z);
    CHECK(ts.trace(i)[p.leak_point_value] == static_cast<float>(hamming_weight(z)));
    if (ts.plaintexts[i] == 0) CHECK(ts.trace(i)[p.leak_point_value] == 4.0f);
    CHECK(ts.trace(i)[0] == 0.0f);
  }
  CHECK(std::all_of(ts.keys.begin(), ts.keys.end(), [](auto k) { return k == 0; }));
}

TEST_CASE("masked traces leak HW(Z) at the value point and HW(r) at the mask point") {
  TraceParams p = quiet_params();
  p.masking_enabled = true;
  p.leak_point_mask = 5;
  const TraceSet ts = generate(p, 300);
  REQUIRE(ts.masks);
  for (std::size_t i = 0; i < ts.n_traces; ++i) {
    const std::uint8_t r = (*ts.masks)[i];
    const std::uint8_t z = intermediate(ts.plaintexts[i], ts.keys[i], r, true);
    CHECK(ts.trace(i)[20] == static_cast<float>(hamming_weight(z)));
    CHECK(ts.trace(i)[5] == static_cast<float>(hamming_weight(r)));
    CHECK(ts.labels[i] == sbox(static_cast<std::uint8_t>(ts.plaintexts[i] ^ ts.keys[i])));
  }
}

TEST_CASE("generation is deterministic by seed") {
  TraceParams p = quiet_params();
  p.noise_sigma = 1.0;
  const TraceSet a = generate(p, 64);
  const TraceSet b = generate(p, 64);
  CHECK(a.same_content(b));
  CHECK(a.traces == b.traces);
  p.seed = 12;
  CHECK_FALSE(generate(p, 64).traces == a.traces);
}

TEST_CASE("noise has the requested spread") {
  TraceParams p = quiet_params();
  p.noise_sigma = 0.5;
  const TraceSet ts = generate(p, 2000);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < ts.n_traces; ++i) {
    const double v = ts.trace(i)[0];
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(ts.n_traces);
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("desynchronize shifts right and records the shift") {
  TraceParams p = quiet_params();
  p.noise_sigma = 1.0;
  const TraceSet ts = generate(p, 1000);
  CHECK(desynchronize(ts, 0, 3).traces == ts.traces);
  const TraceSet d = desynchronize(ts, 30, 3);
  REQUIRE(d.shifts.size() == ts.n_traces);
  double mean = 0.0;
  for (std::size_t i = 0; i < ts.n_traces; ++i) {
    const std::size_t s = d.shifts[i];
    CHECK(s <= 30);
    mean += static_cast<double>(s);
    for (std::size_t j = s; j < ts.n_samples; ++j) CHECK(d.trace(i)[j] == ts.trace(i)[j - s]);
  }
  CHECK(d.labels == ts.labels);
  CHECK_THROWS_AS(desynchronize(ts, 40, 3), ValidationError);
}

TEST_CASE("desync shifts are uniform on [0, 50]") {
  TraceParams p = quiet_params();
  p.n_samples = 100;
  const TraceSet d = desynchronize(generate(p, 1000), 50, 8);
  double mean = 0.0;
  for (auto s : d.shifts) mean += s;
  mean /= 1000.0;
  const double se = std::sqrt((51.0 * 51.0 - 1.0) / 12.0 / 1000.0);
  CHECK(std::abs(mean - 25.0) < 3.0 * se);
  CHECK(*std::max_element(d.shifts.begin(), d.shifts.end()) <= 50);
}

TEST_CASE("balanced sampling gives flat class histograms") {
  TraceParams p = quiet_params();
  const TraceSet ts = generate(p, 20000);
  const TraceSet one = sample_balanced(ts, 1, 5);
  CHECK(one.n_traces == 256);
  const TraceSet s = sample_balanced(ts, 20, 5);
  CHECK(s.n_traces == 256 * 20);
  std::array<int, 256> hist{};
  for (auto y : s.labels) ++hist[y];
  CHECK(std::all_of(hist.begin(), hist.end(), [](int c) { return c == 20; }));
  s.validate();
  CHECK(sample_balanced(ts, 20, 5).traces == s.traces);
}

TEST_CASE("balanced splits are disjoint") {
  TraceParams p = quiet_params();
  p.noise_sigma = 1.0;
  const TraceSet ts = generate(p, 10000);
  const std::array<std::size_t, 3> counts{10, 5, 3};
  const auto parts = split_balanced(ts, counts, 9);
  REQUIRE(parts.size() == 3);
  std::set<std::vector<float>> rows;
  std::size_t total = 0;
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < part.n_traces; ++i) {
      auto r = part.trace(i);
      rows.insert(std::vector<float>(r.begin(), r.end()));
    }
    total += part.n_traces;
  }
  CHECK(total == 18 * 256);
  CHECK(rows.size() == total);
}

TEST_CASE("deficient class is reported") {
  TraceParams p = quiet_params();
  const TraceSet ts = generate(p, 300);
  try {
    sample_balanced(ts, 3, 1);
    FAIL("expected DeficientClassError");
  } catch (const DeficientClassError& e) {
    CHECK(e.label() >= 0);
    CHECK(e.label() < 256);
    CHECK(std::string(e.what()).find(std::to_string(e.label())) != std::string::npos);
  }
}

TEST_CASE("min-max normalization maps columns onto [-1, 1]") {
  TraceSet ts;
  ts.n_traces = 3;
  ts.n_samples = 2;
  ts.traces = {-3.0f, 7.0f, 5.0f, 7.0f, 1.0f, 7.0f};
  ts.plaintexts = {0, 0, 0};
  ts.keys = {0, 0, 0};
  ts.labels = {0x63, 0x63, 0x63};
  const TraceSet n = normalize(ts);
  CHECK(n.trace(0)[0] == -1.0f);
  CHECK(n.trace(1)[0] == 1.0f);
  CHECK(n.trace(2)[0] == 0.0f);
  for (std::size_t i = 0; i < 3; ++i) CHECK(n.trace(i)[1] == 0.0f);
  CHECK(n.normalized);
  REQUIRE(n.normalization);
}

TEST_CASE("recorded normalization keeps in-range held-out values in [-1, 1]") {
  TraceParams p = quiet_params();
  p.noise_sigma = 1.0;
  const TraceSet all = generate(p, 12000);
  const std::array<std::size_t, 2> counts{10, 5};
  const auto parts = split_balanced(all, counts, 2);
  const TraceSet prof = normalize(parts[0]);
  const TraceSet held = apply_normalization(parts[1], *prof.normalization);
  const auto& np = *prof.normalization;
  for (std::size_t i = 0; i < held.n_traces; ++i) {
    for (std::size_t j = 0; j < held.n_samples; ++j) {
      const float raw = parts[1].trace(i)[j];
      if (raw >= np.min[j] && raw <= np.max[j]) {
        CHECK(held.trace(i)[j] >= -1.0f);
        CHECK(held.trace(i)[j] <= 1.0f);
      }
    }
  }
  for (float v : prof.traces) CHECK((v >= -1.0f && v <= 1.0f));
}
