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

#ifndef QUAIL_EVAL_H_
#define QUAIL_EVAL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "quail/dp_classifier.h"
#include "quail/dp_core.h"
#include "quail/tabular.h"

namespace quail {

struct Confusion {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  int64_t total() const { return tp + fp + tn + fn; }
};

// Metrics of one slice of the test set. Rates with a zero denominator are
// unset.
struct GroupMetrics {
  std::string group;  // "overall" or "<feature>=<code>"
  Confusion confusion;
  double accuracy = 0;
  std::optional<double> f1;
  std::optional<double> fnr;
  std::optional<double> fpr;

  static GroupMetrics FromConfusion(std::string group, const Confusion& c);
  nlohmann::json ToJson() const;
};

// Overall metrics, then one entry per level of `group_feature` present in
// `test`, in domain order.
std::vector<GroupMetrics> ComputeMetrics(const Dataset& test,
                                         std::span<const int> predicted,
                                         int positive_level,
                                         std::optional<size_t> group_feature);

struct RunReport {
  nlohmann::json config;  // echo of the run configuration
  nlohmann::json ledger;  // the evaluation classifier's own ledger
  std::vector<GroupMetrics> metrics;
  uint64_t seed = 0;
  double duration_seconds = 0;

  nlohmann::json ToJson() const;
  static RunReport FromJson(const nlohmann::json& j);
};

// Trains a DP logistic regression on `synthetic` (target from every other
// feature) under its own ledger of `eval_epsilon`, and scores `test` at 0.5.
// Throws DataError when the schemas differ.
RunReport Evaluate(const Dataset& synthetic, const Dataset& test,
                   Epsilon eval_epsilon, const FitConfig& cfg,
                   RandomStream& rng, nlohmann::json config = {});

// Overall and per-group metrics of a fitted model on `test` at threshold 0.5.
std::vector<GroupMetrics> ScoreModel(const LogitModel& model, const Dataset& test);

struct MetricSummary {
  double mean = 0;
  double stddev = 0;  // sample standard deviation; 0 for a single value
  size_t count = 0;   // runs where the metric was defined
};

struct Summary {
  size_t runs = 0;
  nlohmann::json config;  // shared config, seed removed
  // group -> metric -> summary
  std::map<std::string, std::map<std::string, MetricSummary>> groups;

  nlohmann::json ToJson() const;
  // Columns: group, metric, mean, stddev, count.
  std::string ToCsv() const;
};

// Throws ConfigError when the reports' configs differ in anything but seed.
Summary Aggregate(std::span<const RunReport> reports);

}  // namespace quail

#endif  // QUAIL_EVAL_H_
