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

#include "nascty/genome.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "nascty/rng.hpp"

namespace nascty {

using json = nlohmann::json;
using B = GeneBounds;

namespace {

std::string range_text(int lo, int hi) {
  return "[" + std::to_string(lo) + "," + std::to_string(hi) + "]";
}

void check_range(const std::string& field, int value, int lo, int hi) {
  if (value < lo || value > hi)
    throw ValidationError(field + " = " + std::to_string(value) + " is outside " +
                          range_text(lo, hi));
}

void check_pool(const std::string& where, const PoolGene& p) {
  check_range(where + ".size", p.size, B::kMinPoolSize, B::kMaxPoolSize);
  check_range(where + ".stride", p.stride, B::kMinPoolStride, B::kMaxPoolStride);
}

PoolKind random_pool_kind(Rng& rng) { return rng.coin() ? PoolKind::Max : PoolKind::Average; }

}  // namespace

void Genome::validate() const {
  if (conv_blocks.size() > static_cast<std::size_t>(B::kMaxConvBlocks))
    throw ValidationError("conv_blocks has " + std::to_string(conv_blocks.size()) +
                          " entries, max " + std::to_string(B::kMaxConvBlocks));
  if (dense_layers.size() < static_cast<std::size_t>(B::kMinDenseLayers) ||
      dense_layers.size() > static_cast<std::size_t>(B::kMaxDenseLayers))
    throw ValidationError("dense_layers has " + std::to_string(dense_layers.size()) +
                          " entries, expected " +
                          range_text(B::kMinDenseLayers, B::kMaxDenseLayers));
  if (lone_pool && !conv_blocks.empty())
    throw ValidationError("lone_pool is only allowed when conv_blocks is empty");
  for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
    const auto& c = conv_blocks[i];
    const std::string where = "conv_blocks[" + std::to_string(i) + "]";
    check_range(where + ".n_filters", c.n_filters, B::kMinFilters, B::kMaxFilters);
    check_range(where + ".filter_size", c.filter_size, B::kMinFilterSize, B::kMaxFilterSize);
    check_pool(where + ".pool", c.pool);
  }
  if (lone_pool) check_pool("lone_pool", *lone_pool);
  for (std::size_t i = 0; i < dense_layers.size(); ++i)
    check_range("dense_layers[" + std::to_string(i) + "].n_neurons", dense_layers[i].n_neurons,
                B::kMinNeurons, B::kMaxNeurons);
}

bool Genome::is_valid() const {
  try {
    validate();
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

std::size_t Genome::n_hyperparameters() const {
  return 6 * conv_blocks.size() + (lone_pool ? 3 : 0) + dense_layers.size();
}

PoolGene random_pool_gene(Rng& rng) {
  PoolGene p;
  p.kind = random_pool_kind(rng);
  p.size = rng.uniform_int(B::kMinPoolSize, B::kMaxPoolSize);
  p.stride = rng.uniform_int(B::kMinPoolStride, B::kMaxPoolStride);
  return p;
}

ConvBlockGene random_conv_block(Rng& rng) {
  ConvBlockGene c;
  c.n_filters = rng.uniform_int(B::kMinFilters, B::kMaxFilters);
  c.filter_size = rng.uniform_int(B::kMinFilterSize, B::kMaxFilterSize);
  c.batch_norm = rng.coin();
  c.pool = random_pool_gene(rng);
  return c;
}

DenseGene random_dense_gene(Rng& rng) {
  return DenseGene{rng.uniform_int(B::kMinNeurons, B::kMaxNeurons)};
}

Genome random_genome(Rng& rng) {
  Genome g;
  const int n_conv = rng.uniform_int(0, B::kMaxConvBlocks);
  for (int i = 0; i < n_conv; ++i) g.conv_blocks.push_back(random_conv_block(rng));
  if (n_conv == 0 && rng.coin()) g.lone_pool = random_pool_gene(rng);
  const int n_dense = rng.uniform_int(B::kMinDenseLayers, B::kMaxDenseLayers);
  for (int i = 0; i < n_dense; ++i) g.dense_layers.push_back(random_dense_gene(rng));
  return g;
}

// ---------------------------------------------------------------------------

InexpressibleGenome::InexpressibleGenome(std::size_t layer_index, const std::string& layer,
                                         const std::string& why)
    : ValidationError("inexpressible genome: layer " + std::to_string(layer_index) + " (" +
                      layer + "): " + why),
      layer_index_(layer_index) {}

std::vector<LayerSpec> express(const Genome& g, std::size_t input_length) {
  g.validate();
  std::vector<LayerSpec> specs;
  auto pool_spec = [](const PoolGene& p) { return PoolSpec{p.kind, p.size, p.stride}; };
  for (const auto& c : g.conv_blocks) {
    specs.emplace_back(Conv1DSpec{c.n_filters, c.filter_size});
    if (c.batch_norm) specs.emplace_back(BatchNormSpec{});
    specs.emplace_back(ActivationSpec{ActivationKind::Selu});
    specs.emplace_back(pool_spec(c.pool));
  }
  if (g.lone_pool) specs.emplace_back(pool_spec(*g.lone_pool));
  specs.emplace_back(FlattenSpec{});
  for (const auto& d : g.dense_layers) {
    specs.emplace_back(DenseSpec{d.n_neurons});
    specs.emplace_back(ActivationSpec{ActivationKind::Selu});
  }
  specs.emplace_back(SoftmaxOutputSpec{});
  try {
    infer_shapes(specs, input_length);
  } catch (const ShapeError& e) {
    const std::size_t i = e.layer_index();
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    throw InexpressibleGenome(i, i < specs.size() ? describe(specs[i]) : "input",
                              colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return specs;
}

// ---------------------------------------------------------------------------

namespace {

template <typename G>
void splice(const std::vector<G>& a, const std::vector<G>& b, std::size_t ca, std::size_t cb,
            std::vector<G>& child1, std::vector<G>& child2) {
  child1.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(ca));
  child1.insert(child1.end(), b.begin() + static_cast<std::ptrdiff_t>(cb), b.end());
  child2.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cb));
  child2.insert(child2.end(), a.begin() + static_cast<std::ptrdiff_t>(ca), a.end());
}

void assign_lone_pools(const Genome& a, const Genome& b, bool swap, Genome& c1, Genome& c2) {
  c1.lone_pool = swap ? b.lone_pool : a.lone_pool;
  c2.lone_pool = swap ? a.lone_pool : b.lone_pool;
  if (!c1.conv_blocks.empty()) c1.lone_pool.reset();
  if (!c2.conv_blocks.empty()) c2.lone_pool.reset();
}

void repair_counts(Genome& child, const Genome& other_parent) {
  if (child.conv_blocks.size() > static_cast<std::size_t>(B::kMaxConvBlocks))
    child.conv_blocks.resize(B::kMaxConvBlocks);
  if (child.dense_layers.size() > static_cast<std::size_t>(B::kMaxDenseLayers))
    child.dense_layers.resize(B::kMaxDenseLayers);
  if (child.dense_layers.empty()) child.dense_layers.push_back(other_parent.dense_layers.back());
}

bool within(std::size_t n, std::size_t lo, std::size_t hi) { return n >= lo && n <= hi; }

}  // namespace

std::pair<Genome, Genome> one_point_crossover_at(const Genome& a, const Genome& b,
                                                 const CutPoints& cuts) {
  if (cuts.conv_a > a.conv_blocks.size() || cuts.conv_b > b.conv_blocks.size() ||
      cuts.dense_a > a.dense_layers.size() || cuts.dense_b > b.dense_layers.size())
    throw ValidationError("crossover cut point beyond list length");
  Genome c1, c2;
  splice(a.conv_blocks, b.conv_blocks, cuts.conv_a, cuts.conv_b, c1.conv_blocks, c2.conv_blocks);
  splice(a.dense_layers, b.dense_layers, cuts.dense_a, cuts.dense_b, c1.dense_layers,
         c2.dense_layers);
  repair_counts(c1, b);
  repair_counts(c2, a);
  assign_lone_pools(a, b, cuts.swap_lone_pools, c1, c2);
  return {std::move(c1), std::move(c2)};
}

std::pair<Genome, Genome> one_point_crossover(const Genome& a, const Genome& b, Rng& rng) {
  constexpr int kAttempts = 16;
  CutPoints cuts;
  auto draw = [&](std::size_t na, std::size_t nb, std::size_t lo, std::size_t hi,
                  std::size_t& ca, std::size_t& cb) {
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      ca = rng.index(na + 1);
      cb = rng.index(nb + 1);
      if (within(ca + (nb - cb), lo, hi) && within(cb + (na - ca), lo, hi)) return;
    }
  };
  draw(a.conv_blocks.size(), b.conv_blocks.size(), 0, B::kMaxConvBlocks, cuts.conv_a,
       cuts.conv_b);
  draw(a.dense_layers.size(), b.dense_layers.size(), B::kMinDenseLayers, B::kMaxDenseLayers,
       cuts.dense_a, cuts.dense_b);
  cuts.swap_lone_pools = rng.coin();
  return one_point_crossover_at(a, b, cuts);
}

std::pair<Genome, Genome> parameterwise_crossover(const Genome& a, const Genome& b, Rng& rng) {
  Genome c1, c2;
  auto pick = [&rng](auto x, auto y, auto& to1, auto& to2) {
    if (rng.coin()) std::swap(x, y);
    to1 = x;
    to2 = y;
  };
  const std::size_t nc = std::min(a.conv_blocks.size(), b.conv_blocks.size());
  for (std::size_t i = 0; i < nc; ++i) {
    const auto& x = a.conv_blocks[i];
    const auto& y = b.conv_blocks[i];
    ConvBlockGene g1, g2;
    pick(x.n_filters, y.n_filters, g1.n_filters, g2.n_filters);
    pick(x.filter_size, y.filter_size, g1.filter_size, g2.filter_size);
    pick(x.batch_norm, y.batch_norm, g1.batch_norm, g2.batch_norm);
    pick(x.pool.kind, y.pool.kind, g1.pool.kind, g2.pool.kind);
    pick(x.pool.size, y.pool.size, g1.pool.size, g2.pool.size);
    pick(x.pool.stride, y.pool.stride, g1.pool.stride, g2.pool.stride);
    c1.conv_blocks.push_back(g1);
    c2.conv_blocks.push_back(g2);
  }
  const auto& longer_conv = a.conv_blocks.size() > nc ? a.conv_blocks : b.conv_blocks;
  c1.conv_blocks.insert(c1.conv_blocks.end(), longer_conv.begin() + static_cast<std::ptrdiff_t>(nc),
                        longer_conv.end());

  const std::size_t nd = std::min(a.dense_layers.size(), b.dense_layers.size());
  for (std::size_t i = 0; i < nd; ++i) {
    DenseGene g1, g2;
    pick(a.dense_layers[i].n_neurons, b.dense_layers[i].n_neurons, g1.n_neurons, g2.n_neurons);
    c1.dense_layers.push_back(g1);
    c2.dense_layers.push_back(g2);
  }
  const auto& longer_dense = a.dense_layers.size() > nd ? a.dense_layers : b.dense_layers;
  c1.dense_layers.insert(c1.dense_layers.end(),
                         longer_dense.begin() + static_cast<std::ptrdiff_t>(nd),
                         longer_dense.end());

  assign_lone_pools(a, b, rng.coin(), c1, c2);
  return {std::move(c1), std::move(c2)};
}

// ---------------------------------------------------------------------------

double polynomial_mutation(double x, double lo, double hi, double eta, double u) {
  if (hi <= lo) return lo;
  const double p = 1.0 / (1.0 + eta);
  double y;
  if (u < 0.5) {
    const double delta = std::pow(2.0 * u, p) - 1.0;
    y = x + delta * (x - lo);
  } else {
    const double delta = 1.0 - std::pow(2.0 * (1.0 - u), p);
    y = x + delta * (hi - x);
  }
  return std::clamp(y, lo, hi);
}

int polynomial_mutation_int(int x, int lo, int hi, double eta, double u) {
  const double y = polynomial_mutation(x, lo, hi, eta, u);
  return std::clamp(static_cast<int>(std::floor(y + 0.5)), lo, hi);
}

Genome mutate_add(const Genome& g, Rng& rng, bool* applied) {
  const bool conv_ok = g.conv_blocks.size() < static_cast<std::size_t>(B::kMaxConvBlocks);
  const bool dense_ok = g.dense_layers.size() < static_cast<std::size_t>(B::kMaxDenseLayers);
  if (applied) *applied = conv_ok || dense_ok;
  if (!conv_ok && !dense_ok) return g;
  Genome out = g;
  const bool add_conv = conv_ok && (!dense_ok || rng.coin());
  if (add_conv) {
    const std::size_t pos = rng.index(out.conv_blocks.size() + 1);
    out.conv_blocks.insert(out.conv_blocks.begin() + static_cast<std::ptrdiff_t>(pos),
                           random_conv_block(rng));
    out.lone_pool.reset();
  } else {
    const std::size_t pos = rng.index(out.dense_layers.size() + 1);
    out.dense_layers.insert(out.dense_layers.begin() + static_cast<std::ptrdiff_t>(pos),
                            random_dense_gene(rng));
  }
  return out;
}

Genome mutate_remove(const Genome& g, Rng& rng, bool* applied) {
  const std::size_t n_conv = g.conv_blocks.size();
  const std::size_t n_dense =
      g.dense_layers.size() > static_cast<std::size_t>(B::kMinDenseLayers) ? g.dense_layers.size()
                                                                            : 0;
  if (applied) *applied = n_conv + n_dense > 0;
  if (n_conv + n_dense == 0) return g;
  Genome out = g;
  const std::size_t k = rng.index(n_conv + n_dense);
  if (k < n_conv) {
    out.conv_blocks.erase(out.conv_blocks.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    out.dense_layers.erase(out.dense_layers.begin() + static_cast<std::ptrdiff_t>(k - n_conv));
  }
  return out;
}

Genome mutate_polynomial(const Genome& g, double eta, Rng& rng) {
  Genome out = g;
  const double rate = 1.0 / static_cast<double>(std::max<std::size_t>(1, g.n_hyperparameters()));
  auto integer = [&](int& x, int lo, int hi) {
    if (rng.uniform() < rate) x = polynomial_mutation_int(x, lo, hi, eta, rng.uniform());
  };
  auto pool = [&](PoolGene& p) {
    if (rng.uniform() < rate) p.kind = random_pool_kind(rng);
    integer(p.size, B::kMinPoolSize, B::kMaxPoolSize);
    integer(p.stride, B::kMinPoolStride, B::kMaxPoolStride);
  };
  for (auto& c : out.conv_blocks) {
    integer(c.n_filters, B::kMinFilters, B::kMaxFilters);
    integer(c.filter_size, B::kMinFilterSize, B::kMaxFilterSize);
    if (rng.uniform() < rate) c.batch_norm = rng.coin();
    pool(c.pool);
  }
  if (out.lone_pool) pool(*out.lone_pool);
  for (auto& d : out.dense_layers) integer(d.n_neurons, B::kMinNeurons, B::kMaxNeurons);
  return out;
}

Genome mutate(const Genome& g, double eta, Rng& rng, MutationKind* applied) {
  const int method = rng.uniform_int(0, 2);
  bool ok = false;
  Genome out;
  if (method == 0) {
    out = mutate_add(g, rng, &ok);
    if (ok) {
      if (applied) *applied = MutationKind::Add;
      return out;
    }
  } else if (method == 1) {
    out = mutate_remove(g, rng, &ok);
    if (ok) {
      if (applied) *applied = MutationKind::Remove;
      return out;
    }
  }
  if (applied) *applied = MutationKind::Polynomial;
  return mutate_polynomial(g, eta, rng);
}

// ---------------------------------------------------------------------------

namespace {

json pool_to_json(const PoolGene& p) {
  return json{{"kind", p.kind == PoolKind::Max ? "max" : "average"},
              {"size", p.size},
              {"stride", p.stride}};
}

const json& field(const json& obj, const std::string& where, const char* key) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + "." + key + " is missing");
  return *it;
}

int int_field(const json& obj, const std::string& where, const char* key) {
  const json& v = field(obj, where, key);
  if (!v.is_number_integer()) throw ValidationError(where + "." + key + " must be an integer");
  const auto x = v.get<long long>();
  if (x < -1000000 || x > 1000000)
    throw ValidationError(where + "." + key + " = " + std::to_string(x) + " is out of range");
  return static_cast<int>(x);
}

PoolGene pool_from_json(const json& j, const std::string& where) {
  PoolGene p;
  const json& kind = field(j, where, "kind");
  if (kind == "max") {
    p.kind = PoolKind::Max;
  } else if (kind == "average") {
    p.kind = PoolKind::Average;
  } else {
    throw ValidationError(where + ".kind must be \"max\" or \"average\"");
  }
  p.size = int_field(j, where, "size");
  p.stride = int_field(j, where, "stride");
  return p;
}

}  // namespace

std::string serialize_genome(const Genome& g) {
  json conv = json::array();
  for (const auto& c : g.conv_blocks)
    conv.push_back(json{{"n_filters", c.n_filters},
                        {"filter_size", c.filter_size},
                        {"batch_norm", c.batch_norm},
                        {"pool", pool_to_json(c.pool)}});
  json dense = json::array();
  for (const auto& d : g.dense_layers) dense.push_back(json{{"n_neurons", d.n_neurons}});
  json j{{"format", "nascty-genome"},
         {"version", kGenomeFormatVersion},
         {"conv_blocks", std::move(conv)},
         {"lone_pool", g.lone_pool ? pool_to_json(*g.lone_pool) : json(nullptr)},
         {"dense_layers", std::move(dense)}};
  return j.dump();
}

Genome parse_genome(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("genome is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("genome must be a JSON object");
  if (j.contains("format") && j["format"] != "nascty-genome")
    throw ValidationError("not a genome document (format field)");
  if (j.contains("version")) {
    if (!j["version"].is_number_integer() || j["version"].get<int>() != kGenomeFormatVersion)
      throw ValidationError("unsupported genome version " + j["version"].dump() + ", expected " +
                            std::to_string(kGenomeFormatVersion));
  }
  Genome g;
  const json& conv = field(j, "genome", "conv_blocks");
  if (!conv.is_array()) throw ValidationError("conv_blocks must be an array");
  if (conv.size() > static_cast<std::size_t>(B::kMaxConvBlocks))
    throw ValidationError("conv_blocks has " + std::to_string(conv.size()) + " entries, max " +
                          std::to_string(B::kMaxConvBlocks));
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const std::string where = "conv_blocks[" + std::to_string(i) + "]";
    ConvBlockGene c;
    c.n_filters = int_field(conv[i], where, "n_filters");
    c.filter_size = int_field(conv[i], where, "filter_size");
    const json& bn = field(conv[i], where, "batch_norm");
    if (!bn.is_boolean()) throw ValidationError(where + ".batch_norm must be a boolean");
    c.batch_norm = bn.get<bool>();
    c.pool = pool_from_json(field(conv[i], where, "pool"), where + ".pool");
    g.conv_blocks.push_back(c);
  }
  if (j.contains("lone_pool") && !j["lone_pool"].is_null())
    g.lone_pool = pool_from_json(j["lone_pool"], "lone_pool");
  const json& dense = field(j, "genome", "dense_layers");
  if (!dense.is_array()) throw ValidationError("dense_layers must be an array");
  for (std::size_t i = 0; i < dense.size(); ++i)
    g.dense_layers.push_back(
        DenseGene{int_field(dense[i], "dense_layers[" + std::to_string(i) + "]", "n_neurons")});
  g.validate();
  return g;
}

std::string summarize(const Genome& g) {
  std::ostringstream os;
  auto pool = [&os](const PoolGene& p) {
    os << (p.kind == PoolKind::Max ? "max " : "avg ") << p.size << "/" << p.stride;
  };
  os << "C[";
  for (std::size_t i = 0; i < g.conv_blocks.size(); ++i) {
    const auto& c = g.conv_blocks[i];
    if (i) os << ", ";
    os << c.n_filters << "x" << c.filter_size << (c.batch_norm ? " bn " : " ");
    pool(c.pool);
  }
  os << "]";
  if (g.lone_pool) {
    os << " P[";
    pool(*g.lone_pool);
    os << "]";
  }
  os << " D[";
  for (std::size_t i = 0; i < g.dense_layers.size(); ++i)
    os << (i ? " " : "") << g.dense_layers[i].n_neurons;
  os << "]";
  return os.str();
}

int layer_count_distance(const Genome& a, const Genome& b) {
  return std::abs(static_cast<int>(a.conv_blocks.size()) - static_cast<int>(b.conv_blocks.size())) +
         std::abs(static_cast<int>(a.dense_layers.size()) -
                  static_cast<int>(b.dense_layers.size()));
}

}  // namespace nascty
