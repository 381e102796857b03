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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nascty/common.hpp"
#include "nascty/neural_engine.hpp"

namespace nascty {

class Rng;

/// Inclusive hyperparameter ranges of the search space.
struct GeneBounds {
  static constexpr int kMaxConvBlocks = 5;
  static constexpr int kMinDenseLayers = 1;
  static constexpr int kMaxDenseLayers = 5;
  static constexpr int kMinFilters = 2;
  static constexpr int kMaxFilters = 128;
  static constexpr int kMinFilterSize = 1;
  static constexpr int kMaxFilterSize = 50;
  static constexpr int kMinPoolSize = 2;
  static constexpr int kMaxPoolSize = 50;
  static constexpr int kMinPoolStride = 2;
  static constexpr int kMaxPoolStride = 50;
  static constexpr int kMinNeurons = 1;
  static constexpr int kMaxNeurons = 20;
};

struct PoolGene {
  PoolKind kind = PoolKind::Average;
  int size = 2;
  int stride = 2;
  bool operator==(const PoolGene&) const = default;
};

struct ConvBlockGene {
  int n_filters = 2;
  int filter_size = 1;
  bool batch_norm = false;
  PoolGene pool;
  bool operator==(const ConvBlockGene&) const = default;
};

struct DenseGene {
  int n_neurons = 1;
  bool operator==(const DenseGene&) const = default;
};

struct Genome {
  std::vector<ConvBlockGene> conv_blocks;
  std::optional<PoolGene> lone_pool;  // only without conv blocks
  std::vector<DenseGene> dense_layers;

  bool operator==(const Genome&) const = default;

  /// Throws ValidationError naming the first violated bound or count.
  void validate() const;
  bool is_valid() const;

  /// Number of scalar genes polynomial mutation can touch.
  std::size_t n_hyperparameters() const;
};

PoolGene random_pool_gene(Rng& rng);
ConvBlockGene random_conv_block(Rng& rng);
DenseGene random_dense_gene(Rng& rng);

/// Uniform draws over every count and range; a lone pool is added with
/// probability 1/2 when no conv blocks are drawn.
Genome random_genome(Rng& rng);

class InexpressibleGenome : public ValidationError {
 public:
  InexpressibleGenome(std::size_t layer_index, const std::string& layer, const std::string& why);
  std::size_t layer_index() const { return layer_index_; }

 private:
  std::size_t layer_index_;
};

/// Conv -> [BatchNorm] -> SELU -> Pool per block (or the lone pool), Flatten,
/// Dense -> SELU per dense gene, SoftmaxOutput(256).
std::vector<LayerSpec> express(const Genome& g, std::size_t input_length);

/// Explicit cut points for one-point crossover. `swap_lone_pools` sends the
/// first parent's lone pool to the second child and vice versa.
struct CutPoints {
  std::size_t conv_a = 0;
  std::size_t conv_b = 0;
  std::size_t dense_a = 0;
  std::size_t dense_b = 0;
  bool swap_lone_pools = false;
};

/// Children a[0, cut_a) ++ b[cut_b, end) and b[0, cut_b) ++ a[cut_a, end) for
/// each list. Counts outside bounds are repaired by truncation, and an empty
/// dense list receives the other parent's last dense gene.
std::pair<Genome, Genome> one_point_crossover_at(const Genome& a, const Genome& b,
                                                 const CutPoints& cuts);

/// Random cut points, redrawn up to 16 times per list until both children
/// are within bounds, then repaired as above.
std::pair<Genome, Genome> one_point_crossover(const Genome& a, const Genome& b, Rng& rng);

/// Per-scalar-gene uniform exchange at aligned positions; positions past the
/// shorter parent go to the first child unchanged.
std::pair<Genome, Genome> parameterwise_crossover(const Genome& a, const Genome& b, Rng& rng);

/// Bounded polynomial mutation of x in [lo, hi] for a uniform draw u in [0, 1).
double polynomial_mutation(double x, double lo, double hi, double eta, double u);

/// Integer form: continuous step, then round half up and clamp.
int polynomial_mutation_int(int x, int lo, int hi, double eta, double u);

enum class MutationKind { Add, Remove, Polynomial };

/// Applies one of add / remove / polynomial (probability 1/3 each). Add and
/// remove fall through to polynomial mutation when structurally impossible.
Genome mutate(const Genome& g, double eta, Rng& rng, MutationKind* applied = nullptr);

Genome mutate_add(const Genome& g, Rng& rng, bool* applied = nullptr);
Genome mutate_remove(const Genome& g, Rng& rng, bool* applied = nullptr);
Genome mutate_polynomial(const Genome& g, double eta, Rng& rng);

inline constexpr int kGenomeFormatVersion = 1;

/// Compact, canonical JSON text; equal genomes give equal text.
std::string serialize_genome(const Genome& g);

/// Parses and validates genome text; throws ValidationError naming the field
/// and its bound.
Genome parse_genome(const std::string& text);

/// One-line human summary, e.g. "C[16x11 bn max 2/2] D[10 10]".
std::string summarize(const Genome& g);

/// Layer-count distance |dconv| + |ddense|.
int layer_count_distance(const Genome& a, const Genome& b);

}  // namespace nascty
