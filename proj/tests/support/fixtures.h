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

#ifndef QUAIL_TESTS_SUPPORT_FIXTURES_H_
#define QUAIL_TESTS_SUPPORT_FIXTURES_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "quail/tabular.h"

namespace quail::testing {

// Binary features named as given, plus a binary target "y" last.
std::shared_ptr<const Schema> BinarySchema(
    const std::vector<std::string>& names,
    std::optional<std::string> sensitive = std::nullopt,
    std::optional<int> protected_value = std::nullopt);

// Independent Bernoulli(p[i]) features and
//   P(y = 1 | x) = sigmoid(intercept + sum_i weights[i] x_i).
struct IndependentLogit {
  std::vector<double> p;
  double intercept = 0;
  std::vector<double> weights;
};

// x1 strong, x2 weak, x3 null.
IndependentLogit PlantedImportance();

Dataset SampleIndependentLogit(const IndependentLogit& f, size_t n,
                               uint64_t seed);

// y is the majority of x1, x2, x3 flipped with probability `noise`; w and v
// are 4-level encodings of (x1, x2) and (x2, x3). No pairwise table links y
// to all three inputs.
Dataset SampleMajorityFixture(size_t n, double noise, uint64_t seed);

// Group feature g (code 1 = protected, share `protected_share`), a 3-level
// score s whose distribution depends on the group, two noise bits x1 and x2,
// and P(y = 1 | s) = y_given_s[s]. The protected group sits mostly at the
// middle score, so its false negatives jump when the decision moves from
// s >= 1 to s >= 2.
struct FairFixture {
  double protected_share = 0.1;
  std::vector<double> y_given_s = {0.15, 0.40, 0.85};
  std::vector<double> s_mass_a = {0.35, 0.02, 0.63};
  std::vector<double> s_mass_b = {0.26, 0.64, 0.10};
};

std::shared_ptr<const Schema> FairSchema();
Dataset SampleFairFixture(const FairFixture& f, size_t n, uint64_t seed);

// Census-style schema: 17 features, sensitive RAC1P (protected code 2),
// target PINCP (positive code 1).
std::shared_ptr<const Schema> CensusSchema();
// Rows with the group mix 61.4% code 1, 4.8% code 2, the rest spread over
// the remaining codes; other columns uniform.
Dataset SampleCensusLike(size_t n, uint64_t seed);

}  // namespace quail::testing

#endif  // QUAIL_TESTS_SUPPORT_FIXTURES_H_
