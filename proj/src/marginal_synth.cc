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

#include "quail/marginal_synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "quail/errors.h"

namespace quail {

namespace {

std::vector<double> CountPair(const Dataset& d, size_t a, size_t b) {
  const size_t ka = d.schema().feature(a).num_levels();
  const size_t kb = d.schema().feature(b).num_levels();
  std::vector<double> t(ka * kb, 0.0);
  for (size_t r = 0; r < d.num_rows(); ++r) {
    t[d.at(r, a) * kb + d.at(r, b)] += 1.0;
  }
  return t;
}

std::vector<double> CountSingle(const Dataset& d, size_t a) {
  std::vector<double> t(d.schema().feature(a).num_levels(), 0.0);
  for (size_t r = 0; r < d.num_rows(); ++r) t[d.at(r, a)] += 1.0;
  return t;
}

// Adds Laplace(scale) to every cell (skipped when scale is 0) and clamps to
// the floor.
void NoiseAndClamp(std::vector<double>& t, double scale, double floor,
                   RandomStream& rng) {
  for (double& c : t) {
    if (scale > 0) c += LaplaceNoise(scale, rng);
    c = std::max(c, floor);
  }
}

struct DisjointSets {
  std::vector<size_t> parent;
  explicit DisjointSets(size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  size_t Find(size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool Union(size_t a, size_t b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

nlohmann::json MarginalJson(const NoisyMarginal& m, const Schema& s,
                            bool include_tables) {
  nlohmann::json names = nlohmann::json::array();
  for (size_t f : m.features) names.push_back(s.feature(f).name);
  nlohmann::json j;
  j["features"] = std::move(names);
  j["epsilon_spent"] = m.epsilon_spent.is_non_private()
                           ? nlohmann::json("non-private")
                           : nlohmann::json(m.epsilon_spent.value());
  if (include_tables) {
    j["shape"] = m.shape;
    j["counts"] = m.counts;
  }
  return j;
}

}  // namespace

void SynthConfig::Validate() const {
  if (!(structure_fraction > 0 && structure_fraction < 1)) {
    throw ConfigError("structure fraction must lie in (0, 1)");
  }
  if (!(pseudocount > 0) || !std::isfinite(pseudocount)) {
    throw ConfigError("pseudocount must be positive");
  }
}

double MutualInformation(const std::vector<double>& table, size_t rows,
                         size_t cols) {
  double total = std::accumulate(table.begin(), table.end(), 0.0);
  if (!(total > 0)) return 0;
  std::vector<double> pr(rows, 0.0), pc(cols, 0.0);
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < cols; ++j) {
      pr[i] += table[i * cols + j] / total;
      pc[j] += table[i * cols + j] / total;
    }
  }
  double mi = 0;
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < cols; ++j) {
      double p = table[i * cols + j] / total;
      if (p > 0) mi += p * std::log(p / (pr[i] * pc[j]));
    }
  }
  return std::max(mi, 0.0);
}

MarginalTree FitSynth(const Dataset& d, Allocation& budget,
                      const SynthConfig& cfg, RandomStream& rng) {
  cfg.Validate();
  const Schema& schema = d.schema();
  const size_t nf = schema.num_features();

  MarginalTree tree;
  tree.schema = d.schema_ptr();
  tree.root = 0;

  std::vector<Allocation> parts =
      nf == 1 ? budget.Partition({{"measure", 1.0}})
              : budget.Partition({{"structure", cfg.structure_fraction},
                                  {"measure", 1.0 - cfg.structure_fraction}});
  const Epsilon measure_eps = parts.back().Consume();
  tree.measurement_epsilon = measure_eps;
  if (nf > 1) {
    const Epsilon structure_eps = parts[0].Consume();
    tree.structure_epsilon = structure_eps;

    // Structure: every pair table gets Laplace noise of scale P / eps since
    // one record touches one cell in each of the P tables.
    const size_t num_pairs = nf * (nf - 1) / 2;
    const double scale = structure_eps.is_non_private()
                             ? 0.0
                             : static_cast<double>(num_pairs) / structure_eps.value();
    RandomStream srng = rng.Fork("structure");
    std::vector<std::tuple<double, size_t, size_t>> candidates;
    for (size_t a = 0; a < nf; ++a) {
      for (size_t b = a + 1; b < nf; ++b) {
        std::vector<double> t = CountPair(d, a, b);
        NoiseAndClamp(t, scale, cfg.pseudocount, srng);
        double mi = MutualInformation(t, schema.feature(a).num_levels(),
                                      schema.feature(b).num_levels());
        candidates.emplace_back(mi, a, b);
      }
    }
    // Heaviest first; ties by (a, b) ascending.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& x, const auto& y) {
                       if (std::get<0>(x) != std::get<0>(y)) {
                         return std::get<0>(x) > std::get<0>(y);
                       }
                       return std::make_pair(std::get<1>(x), std::get<2>(x)) <
                              std::make_pair(std::get<1>(y), std::get<2>(y));
                     });
    DisjointSets sets(nf);
    std::vector<std::vector<std::pair<size_t, double>>> adjacency(nf);
    for (const auto& [mi, a, b] : candidates) {
      if (sets.Union(a, b)) {
        adjacency[a].emplace_back(b, mi);
        adjacency[b].emplace_back(a, mi);
      }
    }
    for (auto& adj : adjacency) std::sort(adj.begin(), adj.end());

    // Orient breadth-first from the root.
    std::vector<bool> visited(nf, false);
    std::vector<size_t> queue{tree.root};
    visited[tree.root] = true;
    for (size_t q = 0; q < queue.size(); ++q) {
      size_t u = queue[q];
      for (const auto& [v, mi] : adjacency[u]) {
        if (visited[v]) continue;
        visited[v] = true;
        queue.push_back(v);
        TreeEdge e;
        e.parent = u;
        e.child = v;
        e.mutual_information = mi;
        tree.edges.push_back(std::move(e));
      }
    }
  }

  // Measurement: root plus one table per edge, each with sensitivity 1.
  const size_t num_measurements = tree.edges.size() + 1;
  const double scale = measure_eps.is_non_private()
                           ? 0.0
                           : static_cast<double>(num_measurements) /
                                 measure_eps.value();
  const Epsilon per_table =
      measure_eps.is_non_private()
          ? Epsilon::NonPrivate()
          : SplitEpsilon(measure_eps,
                         std::vector<double>(num_measurements, 1.0))[0];
  RandomStream mrng = rng.Fork("measure");

  tree.root_marginal.features = {tree.root};
  tree.root_marginal.shape = {schema.feature(tree.root).num_levels()};
  tree.root_marginal.counts = CountSingle(d, tree.root);
  tree.root_marginal.epsilon_spent = per_table;
  NoiseAndClamp(tree.root_marginal.counts, scale, cfg.pseudocount, mrng);
  double root_total = std::accumulate(tree.root_marginal.counts.begin(),
                                      tree.root_marginal.counts.end(), 0.0);
  for (double c : tree.root_marginal.counts) {
    tree.root_probabilities.push_back(c / root_total);
  }

  for (TreeEdge& e : tree.edges) {
    const size_t kp = schema.feature(e.parent).num_levels();
    const size_t kc = schema.feature(e.child).num_levels();
    e.marginal.features = {e.parent, e.child};
    e.marginal.shape = {kp, kc};
    e.marginal.counts = CountPair(d, e.parent, e.child);
    e.marginal.epsilon_spent = per_table;
    NoiseAndClamp(e.marginal.counts, scale, cfg.pseudocount, mrng);
    e.conditional = e.marginal.counts;
    for (size_t i = 0; i < kp; ++i) {
      double row = 0;
      for (size_t j = 0; j < kc; ++j) row += e.conditional[i * kc + j];
      for (size_t j = 0; j < kc; ++j) e.conditional[i * kc + j] /= row;
    }
  }
  return tree;
}

Dataset Sample(const MarginalTree& tree, size_t n, RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  const Schema& schema = *tree.schema;
  const size_t nf = schema.num_features();
  std::vector<int> levels(n * nf, 0);
  for (size_t r = 0; r < n; ++r) {
    int* row = levels.data() + r * nf;
    row[tree.root] = static_cast<int>(rng.Categorical(tree.root_probabilities));
    for (const TreeEdge& e : tree.edges) {
      const size_t kc = schema.feature(e.child).num_levels();
      std::span<const double> cond(e.conditional.data() + row[e.parent] * kc, kc);
      row[e.child] = static_cast<int>(rng.Categorical(cond));
    }
  }
  return Dataset(tree.schema, std::move(levels));
}

nlohmann::json MarginalTree::ToJson(bool include_tables) const {
  const Schema& s = *schema;
  nlohmann::json edges_json = nlohmann::json::array();
  for (const TreeEdge& e : edges) {
    edges_json.push_back({{"parent", s.feature(e.parent).name},
                          {"child", s.feature(e.child).name},
                          {"mutual_information", e.mutual_information},
                          {"marginal", MarginalJson(e.marginal, s, include_tables)}});
  }
  auto eps = [](Epsilon e) {
    return e.is_non_private() ? nlohmann::json("non-private")
                              : nlohmann::json(e.value());
  };
  nlohmann::json j;
  j["root"] = s.feature(root).name;
  j["root_marginal"] = MarginalJson(root_marginal, s, include_tables);
  j["edges"] = std::move(edges_json);
  j["structure_epsilon"] =
      structure_epsilon ? eps(*structure_epsilon) : nlohmann::json(nullptr);
  j["measurement_epsilon"] = eps(measurement_epsilon);
  return j;
}

}  // namespace quail
