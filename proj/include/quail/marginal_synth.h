// Copyright 2026 The Quail Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QUAIL_MARGINAL_SYNTH_H_
#define QUAIL_MARGINAL_SYNTH_H_

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"
#include "quail/dp_core.h"
#include "quail/tabular.h"

namespace quail {

struct SynthConfig {
  // Share of the synthesizer budget spent choosing the tree; the rest
  // measures the chosen marginals.
  double structure_fraction = 0.3;
  // Floor applied to noisy counts before normalization.
  double pseudocount = 1e-3;

  void Validate() const;
};

// A 1-way or 2-way table of post-processed noisy counts (non-negative).
// For a 2-way table, cells are row-major over (features[0], features[1]).
struct NoisyMarginal {
  std::vector<size_t> features;
  std::vector<size_t> shape;
  std::vector<double> counts;
  Epsilon epsilon_spent = Epsilon::NonPrivate();
};

struct TreeEdge {
  size_t parent = 0;
  size_t child = 0;
  double mutual_information = 0;  // from the noisy structure tables
  NoisyMarginal marginal;         // over (parent, child)
  // P(child | parent), row-normalized over child levels.
  std::vector<double> conditional;
};

// Chow-Liu style spanning tree over all features with noisy marginals on its
// root and edges. Edges are stored parent-before-child (breadth-first from
// the root), so ancestral sampling can walk them in order.
struct MarginalTree {
  std::shared_ptr<const Schema> schema;
  size_t root = 0;
  NoisyMarginal root_marginal;
  std::vector<double> root_probabilities;
  std::vector<TreeEdge> edges;
  std::optional<Epsilon> structure_epsilon;  // unset for a single feature
  Epsilon measurement_epsilon = Epsilon::NonPrivate();

  nlohmann::json ToJson(bool include_tables = false) const;
};

// Spends `budget` in two ledger entries: "<label>/structure" on noisy 2-way
// counts for every feature pair (Laplace, one unit of sensitivity per table),
// and "<label>/measure" re-measuring the root and each edge marginal. A
// single-feature dataset yields an edgeless tree and spends everything on
// the root.
MarginalTree FitSynth(const Dataset& d, Allocation& budget,
                      const SynthConfig& cfg, RandomStream& rng);

// Ancestral sampling. Pure post-processing.
Dataset Sample(const MarginalTree& tree, size_t n, RandomStream& rng);

// Plug-in mutual information (nats) of a non-negative 2-way table.
double MutualInformation(const std::vector<double>& table, size_t rows,
                         size_t cols);

}  // namespace quail

#endif  // QUAIL_MARGINAL_SYNTH_H_
