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
#include <cmath>
#include <numeric>

#include "nascty/attack_eval.hpp"
#include "nascty/rng.hpp"
#include "nascty/trace_model.hpp"

using namespace nascty;

namespace {

// Brute-force oracles, written without the library's accumulation code.
std::vector<double> oracle_log_probs(const std::vector<double>& probs,
                                     const std::vector<std::uint8_t>& pts) {
  std::vector<double> out(256, 0.0);
  for (int k = 0; k < 256; ++k)
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int label = sbox(static_cast<std::uint8_t>(pts[i] ^ k));
      out[k] += std::log(std::max(probs[i * 256 + label], 1e-12));
    }
  return out;
}

int oracle_rank(const std::vector<double>& scores, int key) {
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  int rank = 0;
  while (rank < 256 && sorted[rank] > scores[key]) ++rank;
  return rank;
}

std::vector<double> random_probs(std::size_t n, Rng& rng) {
  std::vector<double> p(n * 256);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < 256; ++j) s += p[i * 256 + j] = rng.uniform() + 1e-3;
    for (int j = 0; j < 256; ++j) p[i * 256 + j] /= s;
  }
  return p;
}

}  // namespace

TEST_CASE("uniform probabilities give equal candidate scores") {
  std::vector<double> probs(256, 1.0 / 256);
  std::vector<std::uint8_t> pts{17};
  const auto v = log_prob_vector(probs, pts);
  for (double s : v) CHECK(s == doctest::Approx(std::log(1.0 / 256)));
  CHECK(key_rank(v, 5) == 0);
}

TEST_CASE("a delta on the true label makes the true key the unique argmax") {
  const std::uint8_t key = 0x4d, p = 0x10;
  std::vector<double> probs(256, 0.0);
  probs[sbox(p ^ key)] = 1.0;
  std::vector<std::uint8_t> pts{p};
  const auto v = log_prob_vector(probs, pts);
  CHECK(std::max_element(v.begin(), v.end()) - v.begin() == key);
  CHECK(std::count(v.begin(), v.end(), v[key]) == 1);
  CHECK(key_rank(v, key) == 0);
}

TEST_CASE("log-prob vector matches the double-loop oracle") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.index(4);
    const auto probs = random_probs(n, rng);
    std::vector<std::uint8_t> pts(n);
    for (auto& p : pts) p = rng.byte();
    const auto got = log_prob_vector(probs, pts);
    const auto want = oracle_log_probs(probs, pts);
    for (int k = 0; k < 256; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
  std::vector<double> probs(512, 1.0 / 256);
  std::vector<std::uint8_t> pts{1};
  CHECK_THROWS_AS(log_prob_vector(probs, pts), ValidationError);
}

TEST_CASE("key rank counts strictly greater candidates") {
  std::vector<double> equal(256, -3.0);
  CHECK(key_rank(equal, 9) == 0);
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(256);
    // Coarse values so ties occur.
    for (auto& x : v) x = static_cast<double>(rng.uniform_int(0, 40));
    const int key = rng.uniform_int(0, 255);
    CHECK(key_rank(v, static_cast<std::uint8_t>(key)) == oracle_rank(v, key));
  }
}

TEST_CASE("permuting traces and adding uniform rows leave ranks unchanged") {
  Rng rng(3);
  const std::size_t n = 6;
  auto probs = random_probs(n, rng);
  std::vector<std::uint8_t> pts(n);
  for (auto& p : pts) p = rng.byte();
  const auto base = log_prob_vector(probs, pts);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<double> probs2(probs.size());
  std::vector<std::uint8_t> pts2(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(probs.begin() + perm[i] * 256, 256, probs2.begin() + i * 256);
    pts2[i] = pts[perm[i]];
  }
  const auto shuffled = log_prob_vector(probs2, pts2);
  for (int k = 0; k < 256; ++k) CHECK(shuffled[k] == doctest::Approx(base[k]));

  probs.insert(probs.end(), 256, 1.0 / 256);
  pts.push_back(77);
  const auto extra = log_prob_vector(probs, pts);
  for (int k = 0; k < 256; ++k)
    CHECK(key_rank(extra, static_cast<std::uint8_t>(k)) == key_rank(base, static_cast<std::uint8_t>(k)));
}

TEST_CASE("a perfect attacker reaches rank 0 with one trace") {
  const std::uint8_t key = 0x2b;
  Rng rng(4);
  const std::size_t m = 500;
  std::vector<std::uint8_t> pts(m);
  std::vector<float> probs(m * 256, 0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    pts[i] = rng.byte();
    probs[i * 256 + sbox(pts[i] ^ key)] = 1.0f;
  }
  const auto r = guessing_entropy(probs, pts, key, 200, 100, 7);
  CHECK(r.ge_curve.size() == 200);
  CHECK(std::all_of(r.ge_curve.begin(), r.ge_curve.end(), [](double v) { return v == 0.0; }));
  REQUIRE(r.traces_to_rank0);
  CHECK(*r.traces_to_rank0 == 1);
  CHECK(r.mean_incremental_key_rank == 0.0);
}

TEST_CASE("a near-uniform attacker sits at the random baseline") {
  const std::uint8_t key = 0x2b;
  Rng rng(5);
  const std::size_t m = 5000;
  std::vector<std::uint8_t> pts(m);
  std::vector<float> probs(m * 256);
  for (std::size_t i = 0; i < m; ++i) {
    pts[i] = rng.byte();
    double s = 0.0;
    for (int j = 0; j < 256; ++j) s += probs[i * 256 + j] = static_cast<float>(1.0 + 1e-3 * rng.normal());
    for (int j = 0; j < 256; ++j) probs[i * 256 + j] = static_cast<float>(probs[i * 256 + j] / s);
  }
  const auto r = guessing_entropy(probs, pts, key, 200, 100, 9);
  CHECK(r.mean_incremental_key_rank >= 100.0);
  CHECK(r.mean_incremental_key_rank <= 155.0);
  for (double v : r.ge_curve) {
    CHECK(v >= 0.0);
    CHECK(v <= 255.0);
  }
}

TEST_CASE("guessing entropy is deterministic and validates sizes") {
  Rng rng(6);
  const std::size_t m = 300;
  std::vector<std::uint8_t> pts(m);
  for (auto& p : pts) p = rng.byte();
  const auto pd = random_probs(m, rng);
  std::vector<float> probs(pd.begin(), pd.end());
  const auto a = guessing_entropy(probs, pts, 1, 50, 10, 3, 1);
  const auto b = guessing_entropy(probs, pts, 1, 50, 10, 3, 4);
  CHECK(a.ge_curve == b.ge_curve);
  CHECK(a.mean_incremental_key_rank == b.mean_incremental_key_rank);
  CHECK_THROWS_AS(guessing_entropy(probs, pts, 1, 301, 10, 3), ValidationError);
  CHECK_THROWS_AS(guessing_entropy(probs, pts, 1, 10, 0, 3), ValidationError);
}

TEST_CASE("mean incremental key rank is the average of the curve") {
  Rng rng(7);
  const std::size_t m = 400;
  std::vector<std::uint8_t> pts(m);
  for (auto& p : pts) p = rng.byte();
  std::vector<float> probs(m * 256);
  for (std::size_t i = 0; i < m; ++i) {
    for (int j = 0; j < 256; ++j) probs[i * 256 + j] = 0.5f / 255;
    probs[i * 256 + sbox(pts[i] ^ 3)] = 0.5f;
    // Mislead some traces.
    if (i % 3 == 0) std::swap(probs[i * 256 + sbox(pts[i] ^ 3)], probs[i * 256 + 7]);
  }
  const auto r = guessing_entropy(probs, pts, 3, 30, 20, 1);
  const double mean = std::accumulate(r.ge_curve.begin(), r.ge_curve.end(), 0.0) / 30.0;
  CHECK(r.mean_incremental_key_rank == doctest::Approx(mean));
  if (r.traces_to_rank0) {
    for (std::size_t i = *r.traces_to_rank0 - 1; i < 30; ++i) CHECK(r.ge_curve[i] == 0.0);
    if (*r.traces_to_rank0 > 1) CHECK(r.ge_curve[*r.traces_to_rank0 - 2] > 0.0);
  }
}

TEST_CASE("traces to rank 0 requires a stable zero tail") {
  const std::vector<double> c1{3, 0, 1, 0, 0};
  CHECK(traces_to_rank0(c1) == std::optional<std::size_t>(4));
  const std::vector<double> c2{3, 0, 1, 0, 0.5};
  CHECK_FALSE(traces_to_rank0(c2));
}

TEST_CASE("report text and csv") {
  AttackReport r;
  r.ge_curve = {2.5, 0.0};
  r.traces_to_rank0 = 2;
  r.mean_incremental_key_rank = 1.25;
  r.folds = 4;
  const std::string csv = ge_curve_csv(r);
  CHECK(csv == "n_traces,mean_key_rank\n1,2.5\n2,0\n");
  const std::string js = report_json(r);
  CHECK(js.find("\"traces_to_rank0\": 2") != std::string::npos);
  r.traces_to_rank0.reset();
  CHECK(report_json(r).find("not reached") != std::string::npos);
}

TEST_CASE("attack sets must use one key") {
  TraceParams p;
  p.n_samples = 10;
  p.leak_point_value = 3;
  TraceSet ts = generate(p, 20);
  CHECK(single_key(ts) == p.key_byte);
  ts.keys[3] ^= 1;
  CHECK_THROWS_AS(single_key(ts), ValidationError);
}
