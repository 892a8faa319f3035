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

#ifndef QUAIL_FAIRQUAIL_H_
#define QUAIL_FAIRQUAIL_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "quail/dp_classifier.h"
#include "quail/dp_core.h"
#include "quail/marginal_synth.h"
#include "quail/superquail.h"
#include "quail/tabular.h"

namespace quail {

enum class FairMode {
  kBalanced,  // minimize |FNR(protected) - FNR(rest)|
  kFnr,       // minimize FNR(protected)
};

struct FairConfig {
  QuailConfig quail;
  FairMode mode = FairMode::kBalanced;
  // Defaults to the schema's sensitive feature and protected value.
  std::optional<std::string> sensitive;
  std::optional<int> protected_value;  // a code of the sensitive feature
  double accuracy_weight = 0.5;
  double fairness_weight = 0.5;
  double grid_step = 0.01;
  double grid_min = 0.05;
  double grid_max = 0.95;
  size_t min_group_rows = 10;
  // Synthetic rows used to tune the threshold; 0 means quail.samples.
  size_t tuning_samples = 0;

  // Returns the schema with the resolved sensitive declaration. Throws
  // ConfigError.
  Schema Resolve(const Schema& schema) const;
  void Validate(const Schema& schema) const;
};

struct GroupwiseSageOutput {
  GroupImportance importance;
  MarginalTree synth;
  // One per group, in the order of importance.levels.
  std::vector<LogitModel> group_models;
};

// One shared synthesizer ("<label>/synth", gamma) and one target classifier
// per group ("<label>/group_classifiers/group=<code>", equal shares of the
// rest), each trained on its group's rows without the sensitive feature and
// audited on those rows. The sensitive feature is reported with value 0.
// Throws DataError for fewer than two groups or a group below
// min_group_rows.
GroupwiseSageOutput GroupwiseDpSage(const Dataset& d, Allocation& budget,
                                    const FairConfig& cfg, RandomStream& rng);

// Takes ranked features from each group in turn, largest group first,
// skipping features already taken. In the final round (remaining picks no
// more than the number of groups) the protected group picks first.
std::vector<std::string> RoundRobinSelect(const GroupImportance& importance,
                                          size_t beta, int protected_level);

struct ThresholdResult {
  double threshold = 0.5;
  double score = 0;
  double penalty = 0;
  double baseline_penalty = 0;  // at 0.5
  std::optional<std::string> warning;
};

// Grid search over target thresholds in [grid_min, grid_max], visited
// outward from 0.5 (lower first on equal distance). Maximizes
//   accuracy_weight * accuracy - fairness_weight * penalty
// among thresholds whose penalty does not exceed the penalty at 0.5, with
// earlier grid points winning ties. The target column of `batch` is the
// pseudo-truth. Spends nothing.
ThresholdResult TuneThreshold(const QuailModel& m, const Dataset& batch,
                              const FairConfig& cfg);

// Group-aware SuperQUAIL. Same ledger layout as FitQuail; generation routes
// each row to its group's target classifier at the tuned threshold.
QuailModel FitFsq(const Dataset& d, const FairConfig& cfg);

}  // namespace quail

#endif  // QUAIL_FAIRQUAIL_H_
