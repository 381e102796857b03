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
#include <map>

#include "nascty/genome.hpp"
#include "nascty/rng.hpp"

using namespace nascty;

namespace {

ConvBlockGene block(int filters) {
  return ConvBlockGene{filters, 3, false, PoolGene{PoolKind::Average, 2, 2}};
}

Genome genome(std::vector<int> conv, std::vector<int> dense) {
  Genome g;
  for (int f : conv) g.conv_blocks.push_back(block(f));
  for (int n : dense) g.dense_layers.push_back(DenseGene{n});
  return g;
}

std::vector<std::string> gene_keys(const Genome& g) {
  std::vector<std::string> keys;
  for (const auto& c : g.conv_blocks) {
    Genome one;
    one.conv_blocks = {c};
    one.dense_layers = {DenseGene{1}};
    keys.push_back("c" + serialize_genome(one));
  }
  for (const auto& d : g.dense_layers) keys.push_back("d" + std::to_string(d.n_neurons));
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

TEST_CASE("random genomes cover the count range uniformly and respect bounds") {
  Rng rng(1);
  std::array<int, 6> conv_hist{};
  int min_f = 1000, max_f = 0, lone = 0, zero_conv = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Genome g = random_genome(rng);
    REQUIRE(g.is_valid());
    ++conv_hist[g.conv_blocks.size()];
    for (const auto& c : g.conv_blocks) {
      min_f = std::min(min_f, c.n_filters);
      max_f = std::max(max_f, c.n_filters);
    }
    if (g.conv_blocks.empty()) {
      ++zero_conv;
      lone += g.lone_pool ? 1 : 0;
    }
  }
  const double p = 1.0 / 6.0;
  const double se = std::sqrt(p * (1 - p) / n);
  for (int c : conv_hist) CHECK(std::abs(c / double(n) - p) < 3 * se);
  CHECK(min_f >= 2);
  CHECK(max_f <= 128);
  CHECK(min_f == 2);
  CHECK(max_f == 128);
  CHECK(std::abs(lone / double(zero_conv) - 0.5) < 0.06);
}

TEST_CASE("validation names field and bound") {
  Genome g = genome({200}, {5});
  try {
    g.validate();
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("n_filters") != std::string::npos);
    CHECK(std::string(e.what()).find("[2,128]") != std::string::npos);
  }
  CHECK_FALSE(genome({}, {}).is_valid());
  Genome lone_with_conv = genome({8}, {3});
  lone_with_conv.lone_pool = PoolGene{};
  CHECK_FALSE(lone_with_conv.is_valid());
}

TEST_CASE("minimal genome expresses to flatten, dense, output") {
  const auto specs = express(genome({}, {10}), 700);
  REQUIRE(specs.size() == 4);
  CHECK(std::holds_alternative<FlattenSpec>(specs[0]));
  CHECK(std::get<DenseSpec>(specs[1]).n_neurons == 10);
  CHECK(std::get<ActivationSpec>(specs[2]).kind == ActivationKind::Selu);
  CHECK(std::get<SoftmaxOutputSpec>(specs[3]).n_classes == 256);
}

TEST_CASE("two-block genome expresses block by block") {
  Genome g = genome({8, 16}, {10, 5});
  g.conv_blocks[0].batch_norm = true;
  g.conv_blocks[1].pool.kind = PoolKind::Max;
  const auto specs = express(g, 700);
  const std::vector<std::string> want = {
      "Conv1D(filters=8, kernel=3)", "BatchNorm", "SELU", "AveragePool(size=2, stride=2)",
      "Conv1D(filters=16, kernel=3)", "SELU", "MaxPool(size=2, stride=2)", "Flatten",
      "Dense(10)", "SELU", "Dense(5)", "SELU", "SoftmaxOutput(256)"};
  REQUIRE(specs.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(describe(specs[i]) == want[i]);
}

TEST_CASE("pool chain that collapses the length is inexpressible") {
  Genome g = genome({4, 4}, {5});
  g.conv_blocks[0].pool = PoolGene{PoolKind::Average, 50, 50};
  g.conv_blocks[1].pool = PoolGene{PoolKind::Average, 50, 50};
  try {
    express(g, 700);
    FAIL("expected InexpressibleGenome");
  } catch (const InexpressibleGenome& e) {
    CHECK(e.layer_index() == 5);
    CHECK(std::string(e.what()).find("AveragePool(size=50, stride=50)") != std::string::npos);
  }
  Genome lone = genome({}, {5});
  lone.lone_pool = PoolGene{PoolKind::Max, 50, 2};
  CHECK_THROWS_AS(express(lone, 20), InexpressibleGenome);
  CHECK(express(lone, 50).size() == 5);
}

TEST_CASE("express is total over random genomes") {
  Rng rng(3);
  int ok = 0, rejected = 0;
  for (int i = 0; i < 2000; ++i) {
    try {
      express(random_genome(rng), 700);
      ++ok;
    } catch (const InexpressibleGenome&) {
      ++rejected;
    }
  }
  CHECK(ok > 0);
  CHECK(rejected > 0);
}

TEST_CASE("one-point crossover with boundary cuts reproduces the parents") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Genome a = random_genome(rng);
    const Genome b = random_genome(rng);
    CutPoints cuts{a.conv_blocks.size(), b.conv_blocks.size(), a.dense_layers.size(),
                   b.dense_layers.size(), false};
    auto [c1, c2] = one_point_crossover_at(a, b, cuts);
    CHECK(c1 == a);
    CHECK(c2 == b);
  }
}

TEST_CASE("one-point crossover follows the worked example") {
  Genome a = genome({1, 2, 3}, {4});
  Genome b = genome({11, 12}, {14});
  auto [c1, c2] = one_point_crossover_at(a, b, CutPoints{1, 1, 1, 1, false});
  REQUIRE(c1.conv_blocks.size() == 2);
  CHECK(c1.conv_blocks[0].n_filters == 1);
  CHECK(c1.conv_blocks[1].n_filters == 12);
  REQUIRE(c2.conv_blocks.size() == 3);
  CHECK(c2.conv_blocks[0].n_filters == 11);
  CHECK(c2.conv_blocks[1].n_filters == 2);
  CHECK(c2.conv_blocks[2].n_filters == 3);
}

TEST_CASE("one-point crossover conserves genes unless repaired") {
  Rng rng(5);
  int conserved = 0;
  for (int i = 0; i < 2000; ++i) {
    const Genome a = random_genome(rng);
    const Genome b = random_genome(rng);
    auto [c1, c2] = one_point_crossover(a, b, rng);
    REQUIRE(c1.is_valid());
    REQUIRE(c2.is_valid());
    const std::size_t parent_conv = a.conv_blocks.size() + b.conv_blocks.size();
    const std::size_t parent_dense = a.dense_layers.size() + b.dense_layers.size();
    if (c1.conv_blocks.size() + c2.conv_blocks.size() == parent_conv &&
        c1.dense_layers.size() + c2.dense_layers.size() == parent_dense) {
      auto pk = gene_keys(a), bk = gene_keys(b), ck1 = gene_keys(c1), ck2 = gene_keys(c2);
      pk.insert(pk.end(), bk.begin(), bk.end());
      ck1.insert(ck1.end(), ck2.begin(), ck2.end());
      std::sort(pk.begin(), pk.end());
      std::sort(ck1.begin(), ck1.end());
      CHECK(pk == ck1);
      ++conserved;
    }
  }
  CHECK(conserved > 1500);
}

TEST_CASE("one-point crossover repairs overlong and empty children") {
  Genome a = genome({2, 3, 4, 5, 6}, {1, 2, 3, 4, 5});
  Genome b = genome({7, 8, 9, 10, 11}, {6, 7, 8, 9, 10});
  auto [c1, c2] = one_point_crossover_at(a, b, CutPoints{5, 0, 0, 5, false});
  REQUIRE(c1.conv_blocks.size() == 5);
  CHECK(c1.conv_blocks[4].n_filters == 6);
  CHECK(c2.conv_blocks.empty());
  CHECK(c1.dense_layers.size() == 1);
  CHECK(c1.dense_layers[0].n_neurons == 10);
  CHECK(c2.dense_layers.size() == 5);
  CHECK(c1.is_valid());
  CHECK(c2.is_valid());
}

TEST_CASE("lone pools travel to one child each and yield to conv blocks") {
  Genome a = genome({}, {3});
  a.lone_pool = PoolGene{PoolKind::Max, 4, 4};
  Genome b = genome({7}, {5});
  auto [c1, c2] = one_point_crossover_at(a, b, CutPoints{0, 0, 1, 1, true});
  CHECK_FALSE(c1.lone_pool);  // would carry b's (none)
  CHECK(c1.conv_blocks.size() == 1);
  CHECK(c2.conv_blocks.empty());
  REQUIRE(c2.lone_pool);
  CHECK(*c2.lone_pool == *a.lone_pool);
  auto [d1, d2] = one_point_crossover_at(a, b, CutPoints{0, 1, 1, 1, false});
  CHECK(d1.conv_blocks.empty());
  REQUIRE(d1.lone_pool);
  CHECK(d2.conv_blocks.size() == 1);
  CHECK_FALSE(d2.lone_pool);
}

TEST_CASE("parameter-wise crossover of identical parents is the identity") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const Genome a = random_genome(rng);
    auto [c1, c2] = parameterwise_crossover(a, a, rng);
    CHECK(c1 == a);
    CHECK(c2 == a);
  }
}

TEST_CASE("parameter-wise crossover is complementary gene by gene") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const Genome a = random_genome(rng);
    const Genome b = random_genome(rng);
    auto [c1, c2] = parameterwise_crossover(a, b, rng);
    REQUIRE(c1.is_valid());
    REQUIRE(c2.is_valid());
    const std::size_t nc = std::min(a.conv_blocks.size(), b.conv_blocks.size());
    CHECK(c1.conv_blocks.size() == std::max(a.conv_blocks.size(), b.conv_blocks.size()));
    CHECK(c2.conv_blocks.size() == nc);
    for (std::size_t k = 0; k < nc; ++k) {
      const auto &x = a.conv_blocks[k], &y = b.conv_blocks[k];
      const auto &g1 = c1.conv_blocks[k], &g2 = c2.conv_blocks[k];
      auto pair_ok = [](auto v1, auto v2, auto p, auto q) {
        return (v1 == p && v2 == q) || (v1 == q && v2 == p);
      };
      CHECK(pair_ok(g1.n_filters, g2.n_filters, x.n_filters, y.n_filters));
      CHECK(pair_ok(g1.filter_size, g2.filter_size, x.filter_size, y.filter_size));
      CHECK(pair_ok(g1.batch_norm, g2.batch_norm, x.batch_norm, y.batch_norm));
      CHECK(pair_ok(g1.pool.kind, g2.pool.kind, x.pool.kind, y.pool.kind));
      CHECK(pair_ok(g1.pool.size, g2.pool.size, x.pool.size, y.pool.size));
      CHECK(pair_ok(g1.pool.stride, g2.pool.stride, x.pool.stride, y.pool.stride));
    }
    const auto& longer = a.conv_blocks.size() >= b.conv_blocks.size() ? a : b;
    for (std::size_t k = nc; k < longer.conv_blocks.size(); ++k)
      CHECK(c1.conv_blocks[k] == longer.conv_blocks[k]);
  }
}

TEST_CASE("parameter-wise crossover, 3 blocks against 1") {
  Rng rng(8);
  const Genome a = genome({10, 20, 30}, {4});
  const Genome b = genome({40}, {5, 6});
  auto [c1, c2] = parameterwise_crossover(a, b, rng);
  REQUIRE(c1.conv_blocks.size() == 3);
  CHECK(c2.conv_blocks.size() == 1);
  CHECK(c1.conv_blocks[1] == a.conv_blocks[1]);
  CHECK(c1.conv_blocks[2] == a.conv_blocks[2]);
  CHECK(c1.dense_layers.size() == 2);
  CHECK(c1.dense_layers[1].n_neurons == 6);
  CHECK(c2.dense_layers.size() == 1);
}

TEST_CASE("polynomial mutation endpoints and fixed point") {
  for (double eta : {20.0, 40.0}) {
    CHECK(polynomial_mutation(64, 2, 128, eta, 0.5) == 64.0);
    CHECK(polynomial_mutation(64, 2, 128, eta, 0.0) == 2.0);
    CHECK(polynomial_mutation(64, 2, 128, eta, 1.0) == 128.0);
    CHECK(polynomial_mutation_int(64, 2, 128, eta, 0.5) == 64);
  }
  // Continuous-domain step, hand computed for u = 0.25, eta = 20.
  const double delta = std::pow(0.5, 1.0 / 21.0) - 1.0;
  CHECK(polynomial_mutation(64, 2, 128, 20, 0.25) == doctest::Approx(64 + delta * 62));
  CHECK(polynomial_mutation_int(3, 1, 50, 20, 0.5) == 3);
}

TEST_CASE("larger eta gives smaller mutation spread") {
  auto variance = [](double eta) {
    Rng rng(9);
    double s = 0, sq = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const int x = polynomial_mutation_int(64, 2, 128, eta, rng.uniform());
      REQUIRE(x >= 2);
      REQUIRE(x <= 128);
      s += x;
      sq += double(x) * x;
    }
    return sq / n - (s / n) * (s / n);
  };
  CHECK(variance(40) < variance(20));
}

TEST_CASE("mutation is closed and changes at most one list count by one") {
  Rng rng(10);
  std::map<MutationKind, int> kinds;
  for (int i = 0; i < 5000; ++i) {
    const Genome g = random_genome(rng);
    MutationKind kind;
    const Genome m = mutate(g, 20, rng, &kind);
    REQUIRE(m.is_valid());
    ++kinds[kind];
    const int dc = std::abs(int(m.conv_blocks.size()) - int(g.conv_blocks.size()));
    const int dd = std::abs(int(m.dense_layers.size()) - int(g.dense_layers.size()));
    CHECK(dc + dd <= 1);
    if (kind == MutationKind::Polynomial) CHECK(dc + dd == 0);
    if (kind != MutationKind::Polynomial) CHECK(dc + dd == 1);
  }
  CHECK(kinds[MutationKind::Add] > 1300);
  CHECK(kinds[MutationKind::Remove] > 1300);
  CHECK(kinds[MutationKind::Polynomial] > 1300);
}

TEST_CASE("add and remove fall through when impossible") {
  Rng rng(11);
  Genome full = genome({8, 8, 8, 8, 8}, {1, 1, 1, 1, 1});
  bool applied = true;
  CHECK(mutate_add(full, rng, &applied) == full);
  CHECK_FALSE(applied);
  Genome minimal = genome({}, {4});
  CHECK(mutate_remove(minimal, rng, &applied) == minimal);
  CHECK_FALSE(applied);
  for (int i = 0; i < 50; ++i) {
    MutationKind kind;
    mutate(full, 20, rng, &kind);
    CHECK(kind != MutationKind::Add);
    mutate(minimal, 20, rng, &kind);
    CHECK(kind != MutationKind::Remove);
  }
}

TEST_CASE("adding a conv block drops a lone pool") {
  Rng rng(12);
  Genome g = genome({}, {5, 5, 5, 5, 5});
  g.lone_pool = PoolGene{};
  bool applied = false;
  const Genome m = mutate_add(g, rng, &applied);
  CHECK(applied);
  CHECK(m.conv_blocks.size() == 1);
  CHECK_FALSE(m.lone_pool);
}

TEST_CASE("serialization round trip") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const Genome g = random_genome(rng);
    const std::string text = serialize_genome(g);
    CHECK(parse_genome(text) == g);
    CHECK(serialize_genome(parse_genome(text)) == text);
  }
}

TEST_CASE("parse errors cite bounds") {
  const std::string big =
      R"({"conv_blocks":[{"n_filters":200,"filter_size":3,"batch_norm":false,)"
      R"("pool":{"kind":"max","size":2,"stride":2}}],"lone_pool":null,"dense_layers":[{"n_neurons":3}]})";
  try {
    parse_genome(big);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("[2,128]") != std::string::npos);
  }
  std::string six = R"({"conv_blocks":[)";
  for (int i = 0; i < 6; ++i) {
    six += std::string(i ? "," : "") +
           R"({"n_filters":4,"filter_size":3,"batch_norm":false,"pool":{"kind":"max","size":2,"stride":2}})";
  }
  six += R"(],"dense_layers":[{"n_neurons":3}]})";
  try {
    parse_genome(six);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("max 5") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_genome("{"), ValidationError);
  CHECK_THROWS_AS(parse_genome(R"({"conv_blocks":[],"dense_layers":[]})"), ValidationError);
  CHECK_THROWS_AS(parse_genome(R"({"conv_blocks":[],"dense_layers":[{"n_neurons":"x"}]})"),
                  ValidationError);
}

TEST_CASE("summary and distance") {
  Genome g = genome({16}, {10, 10});
  g.conv_blocks[0].filter_size = 11;
  g.conv_blocks[0].batch_norm = true;
  g.conv_blocks[0].pool.kind = PoolKind::Max;
  CHECK(summarize(g) == "C[16x11 bn max 2/2] D[10 10]");
  CHECK(layer_count_distance(g, genome({}, {1})) == 2);
}
