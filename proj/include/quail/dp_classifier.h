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

#ifndef QUAIL_DP_CLASSIFIER_H_
#define QUAIL_DP_CLASSIFIER_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "quail/dp_core.h"
#include "quail/tabular.h"

namespace quail {

struct FitConfig {
  // Total L2 weight: the fitted objective is
  //   sum_i loss_i + (lambda / 2) |w|^2 + b.w
  // divided through by n. Must be positive for the privacy guarantee.
  double lambda = 1.0;
  int max_iterations = 5000;
  // Max-norm of the gradient at which the optimizer stops.
  double tolerance = 1e-7;

  void Validate() const;
};

// Which feature a model predicts and from which inputs.
struct LogitTask {
  size_t target = 0;
  int positive_level = 1;
  std::vector<size_t> inputs;  // schema feature indices, ascending
};

// Predict `target` from every other feature. The positive level is the
// schema's for the schema target, level 1 for any other binary feature.
// Throws ConfigError for a multinary feature with no declared positive.
LogitTask TaskForFeature(const Schema& schema, size_t target);

// Reference-category one-hot layout: column 0 is the intercept, then
// (levels - 1) columns per input feature. Level 0 of each input is the
// reference and has no column.
class LogitLayout {
 public:
  struct Block {
    size_t feature = 0;
    size_t num_levels = 0;
    size_t offset = 0;  // column of level 1
  };

  LogitLayout() = default;
  LogitLayout(const Schema& schema, std::span<const size_t> inputs);

  size_t num_columns() const { return num_columns_; }
  size_t num_schema_features() const { return num_schema_features_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  // Constant scale giving every encoded row (intercept included) an L2 norm
  // of at most 1.
  double row_scale() const { return row_scale_; }
  // Column for (block, level), or -1 for the reference level.
  long Column(const Block& b, int level) const {
    return level == 0 ? -1 : static_cast<long>(b.offset + level - 1);
  }

 private:
  std::vector<Block> blocks_;
  size_t num_columns_ = 1;
  size_t num_schema_features_ = 0;
  double row_scale_ = 1.0;
};

struct LogitModel {
  size_t target = 0;
  std::string target_name;
  int positive_level = 1;
  int negative_level = 0;
  LogitLayout layout;
  // Coefficients on raw 0/1 one-hot inputs; [0] is the intercept.
  std::vector<double> coefficients;
  Epsilon epsilon_spent = Epsilon::NonPrivate();
  bool converged = true;
  int iterations = 0;

  nlohmann::json ToJson(const Schema& schema) const;
  static LogitModel FromJson(const nlohmann::json& j, const Schema& schema);
};

// The differentiable training objective in scaled coordinates:
//   F(w) = (1/n) sum_i log(1 + exp(-y_i w.x_i)) + ((L + D)/2) |w|^2 + b.w / n
// with L = lambda / n, D the extra ridge added at small epsilon and b the
// privacy perturbation.
class LogitObjective {
 public:
  LogitObjective(const Dataset& d, const LogitTask& task,
                 const LogitLayout& layout, double lambda,
                 std::vector<double> perturbation, double extra_ridge);

  size_t dimension() const { return dim_; }
  double Value(std::span<const double> w) const;
  double ValueAndGradient(std::span<const double> w, std::span<double> grad) const;

 private:
  size_t dim_;
  size_t n_;
  size_t active_per_row_;
  double scale_;
  double ridge_;  // L + D
  std::vector<long> active_;  // n_ * active_per_row_, -1 for reference
  std::vector<double> labels_;  // +1 / -1
  std::vector<double> perturbation_;
};

// Objective perturbation for L2-regularized logistic regression. The
// allocation is consumed whole. A non-private allocation fits without noise.
LogitModel FitDpLogit(const Dataset& d, const LogitTask& task,
                      Allocation& budget, const FitConfig& cfg,
                      RandomStream& rng);
LogitModel FitDpLogit(const Dataset& d, std::string_view target,
                      Allocation& budget, const FitConfig& cfg,
                      RandomStream& rng);

// Linear score on one full schema row. Throws std::invalid_argument when the
// row does not match the layout.
double PredictScore(const LogitModel& m, std::span<const int> row);
double PredictProba(const LogitModel& m, std::span<const int> row);
// Positive level iff proba >= p; ties go to the positive class.
int PredictLabel(const LogitModel& m, std::span<const int> row, double p);

double Logistic(double z);

// Classifier for one (possibly multinary) feature: a single binary model, or
// one-vs-rest models sharing the allocation equally.
struct FeatureClassifier {
  size_t feature = 0;
  std::vector<LogitModel> models;

  // Binary: level 1 iff proba >= 0.5. One-vs-rest: argmax, ties to the
  // lower level.
  int PredictLevel(std::span<const int> row) const;
  nlohmann::json ToJson(const Schema& schema) const;
};

FeatureClassifier FitFeatureClassifier(const Dataset& d, size_t feature,
                                       Allocation& budget, const FitConfig& cfg,
                                       RandomStream& rng);

}  // namespace quail

#endif  // QUAIL_DP_CLASSIFIER_H_
