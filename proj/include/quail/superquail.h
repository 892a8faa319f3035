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

#ifndef QUAIL_SUPERQUAIL_H_
#define QUAIL_SUPERQUAIL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "quail/dp_classifier.h"
#include "quail/dp_core.h"
#include "quail/dpsage.h"
#include "quail/marginal_synth.h"
#include "quail/tabular.h"

namespace quail {

struct QuailConfig {
  Epsilon epsilon = Epsilon::FromMicros(Epsilon::kMicrosPerUnit);
  // Share of epsilon given to importance estimation (synthesizer and target
  // classifier); the remainder is divided across the feature classifiers.
  double alpha = 0.5;
  // Number of top-ranked features that get their own classifier.
  int beta = 2;
  size_t samples = 1000;
  uint64_t seed = 0;
  FitConfig classifier;
  SynthConfig synth;
  SageConfig sage;

  // Throws ConfigError. Needs the schema to bound beta.
  void Validate(const Schema& schema) const;
  nlohmann::json ToJson() const;
};

// Chooses the target classifier for a row: a single pooled model, or one
// model per level of a group feature.
struct TargetRefiner {
  std::vector<LogitModel> models;
  std::optional<size_t> group_feature;
  std::vector<size_t> model_for_level;  // used when group_feature is set

  const LogitModel& For(std::span<const int> row) const;
  nlohmann::json ToJson(const Schema& schema) const;
};

struct GroupImportance {
  size_t group_feature = 0;
  std::vector<int> levels;
  std::vector<size_t> sizes;
  std::vector<ImportanceReport> reports;

  nlohmann::json ToJson(const Schema& schema) const;
};

struct QuailModel {
  std::shared_ptr<const Schema> schema;
  MarginalTree synth;
  // Unset only for a refinement-free model that replays the synthesizer.
  std::optional<TargetRefiner> target;
  std::vector<FeatureClassifier> feature_models;
  ImportanceReport importance;
  std::optional<GroupImportance> group_importance;
  // Applied to the target classifier; feature classifiers always use 0.5.
  double threshold = 0.5;
  BudgetLedger ledger = BudgetLedger(Epsilon::NonPrivate());
  std::vector<std::string> warnings;

  nlohmann::json ToJson() const;
};

// Visit orders chosen by Generate, one per sample. Index i < feature_models
// size names a feature classifier; the next index names the target.
struct GenerateTrace {
  std::vector<std::vector<size_t>> orders;
};

// Fits the ensemble. Ledger layout: "dpsage" = alpha * epsilon (split inside
// by gamma), "feature_classifiers" = the rest, divided equally among the
// top-beta features. The ledger is closed on return.
QuailModel FitQuail(const Dataset& d, const QuailConfig& cfg);

// Draws n rows from the synthesizer, then for each row visits every
// classifier once in a fresh uniformly random order and overwrites its
// feature with the prediction from the row's current values. Spends nothing.
Dataset Generate(const QuailModel& m, size_t n, RandomStream& rng,
                 GenerateTrace* trace = nullptr);

// Refines an existing batch in place of sampling. With refine_target false
// the target column is left as given.
Dataset Refine(const QuailModel& m, const Dataset& batch, RandomStream& order_rng,
               bool refine_target, GenerateTrace* trace = nullptr);

}  // namespace quail

#endif  // QUAIL_SUPERQUAIL_H_
