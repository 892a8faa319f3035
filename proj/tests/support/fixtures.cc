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

#include "support/fixtures.h"

#include <cmath>

#include "quail/dp_core.h"

namespace quail::testing {
namespace {

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Feature Binary(std::string name) { return Feature{std::move(name), {0, 1}, {}}; }

Feature Range(std::string name, int lo, int hi) {
  Feature f{std::move(name), {}, {}};
  for (int c = lo; c <= hi; ++c) f.codes.push_back(c);
  return f;
}

int Bernoulli(double p, RandomStream& rng) { return rng.Uniform() < p ? 1 : 0; }

}  // namespace

std::shared_ptr<const Schema> BinarySchema(const std::vector<std::string>& names,
                                           std::optional<std::string> sensitive,
                                           std::optional<int> protected_value) {
  std::vector<Feature> features;
  for (const std::string& n : names) features.push_back(Binary(n));
  features.push_back(Binary("y"));
  return std::make_shared<const Schema>(std::move(features), "y", sensitive,
                                        protected_value);
}

IndependentLogit PlantedImportance() {
  return IndependentLogit{{0.5, 0.4, 0.6}, -1.2, {2.5, 1.2, 0.0}};
}

Dataset SampleIndependentLogit(const IndependentLogit& f, size_t n,
                               uint64_t seed) {
  std::vector<std::string> names;
  for (size_t i = 0; i < f.p.size(); ++i) names.push_back("x" + std::to_string(i + 1));
  auto schema = BinarySchema(names);
  RandomStream rng(seed, "independent_logit");
  std::vector<int> levels;
  levels.reserve(n * (f.p.size() + 1));
  for (size_t r = 0; r < n; ++r) {
    double z = f.intercept;
    for (size_t i = 0; i < f.p.size(); ++i) {
      const int x = Bernoulli(f.p[i], rng);
      z += f.weights[i] * x;
      levels.push_back(x);
    }
    levels.push_back(Bernoulli(Sigmoid(z), rng));
  }
  return Dataset(schema, std::move(levels));
}

Dataset SampleMajorityFixture(size_t n, double noise, uint64_t seed) {
  std::vector<Feature> features = {Binary("x1"), Binary("x2"), Binary("x3"),
                                   Range("w", 0, 3), Range("v", 0, 3),
                                   Binary("y")};
  auto schema = std::make_shared<const Schema>(std::move(features), "y");
  RandomStream rng(seed, "majority");
  std::vector<int> levels;
  levels.reserve(n * 6);
  for (size_t r = 0; r < n; ++r) {
    const int x1 = Bernoulli(0.5, rng);
    const int x2 = Bernoulli(0.5, rng);
    const int x3 = Bernoulli(0.5, rng);
    int y = x1 + x2 + x3 >= 2 ? 1 : 0;
    if (rng.Uniform() < noise) y = 1 - y;
    levels.insert(levels.end(), {x1, x2, x3, 2 * x1 + x2, 2 * x2 + x3, y});
  }
  return Dataset(schema, std::move(levels));
}

std::shared_ptr<const Schema> FairSchema() {
  std::vector<Feature> features = {Binary("g"), Range("s", 0, 2), Binary("x1"),
                                   Binary("x2"), Binary("y")};
  return std::make_shared<const Schema>(std::move(features), "y", "g", 1);
}

Dataset SampleFairFixture(const FairFixture& f, size_t n, uint64_t seed) {
  auto schema = FairSchema();
  RandomStream rng(seed, "fair");
  std::vector<int> levels;
  levels.reserve(n * 5);
  for (size_t r = 0; r < n; ++r) {
    const int g = Bernoulli(f.protected_share, rng);
    const int s = static_cast<int>(rng.Categorical(g ? f.s_mass_b : f.s_mass_a));
    const int x1 = Bernoulli(0.5, rng);
    const int x2 = Bernoulli(0.5, rng);
    const int y = Bernoulli(f.y_given_s[static_cast<size_t>(s)], rng);
    levels.insert(levels.end(), {g, s, x1, x2, y});
  }
  return Dataset(schema, std::move(levels));
}

std::shared_ptr<const Schema> CensusSchema() {
  std::vector<Feature> features = {
      Range("AGEP", 0, 7),     Range("SCHL", 0, 5),   Range("MAR", 1, 5),
      Range("RELP", 0, 4),     Binary("DIS"),         Range("ESP", 0, 3),
      Range("CIT", 1, 5),      Range("MIG", 1, 3),    Range("MIL", 1, 4),
      Range("ANC", 1, 4),      Binary("NATIVITY"),    Binary("DEAR"),
      Binary("DEYE"),          Binary("DREM"),        Range("SEX", 1, 2),
      Range("RAC1P", 1, 9),    Binary("ESR")};
  return std::make_shared<const Schema>(std::move(features), "ESR", "RAC1P", 2);
}

Dataset SampleCensusLike(size_t n, uint64_t seed) {
  auto schema = CensusSchema();
  const size_t race = *schema->sensitive_index();
  RandomStream rng(seed, "census");
  // Exact group counts, then a shuffle of their positions.
  const size_t white = static_cast<size_t>(std::llround(0.614 * n));
  const size_t black = static_cast<size_t>(std::llround(0.048 * n));
  std::vector<int> race_levels(n);
  for (size_t r = 0; r < n; ++r) {
    if (r < white) {
      race_levels[r] = 0;
    } else if (r < white + black) {
      race_levels[r] = 1;
    } else {
      race_levels[r] = 2 + static_cast<int>((r - white - black) % 7);
    }
  }
  rng.Shuffle(race_levels);
  std::vector<int> levels;
  levels.reserve(n * schema->num_features());
  for (size_t r = 0; r < n; ++r) {
    for (size_t f = 0; f < schema->num_features(); ++f) {
      if (f == race) {
        levels.push_back(race_levels[r]);
      } else {
        levels.push_back(static_cast<int>(
            rng.UniformIndex(schema->feature(f).num_levels())));
      }
    }
  }
  return Dataset(schema, std::move(levels));
}

}  // namespace quail::testing
