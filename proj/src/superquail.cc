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

#include "quail/superquail.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "quail/errors.h"

namespace quail {

void QuailConfig::Validate(const Schema& schema) const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0, 1)");
  }
  const int d = static_cast<int>(schema.num_features()) - 1;
  if (beta < 1 || beta > d) {
    throw ConfigError("beta must lie in [1, " + std::to_string(d) + "]");
  }
  if (samples < 1) throw ConfigError("samples must be at least 1");
  if (!epsilon.is_non_private() && epsilon.micros() <= 0) {
    throw ConfigError("epsilon must be positive");
  }
  classifier.Validate();
  synth.Validate();
  sage.Validate();
}

nlohmann::json QuailConfig::ToJson() const {
  nlohmann::json j;
  j["epsilon"] = epsilon.ToString();
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["gamma"] = sage.gamma;
  j["samples"] = samples;
  j["seed"] = seed;
  j["lambda"] = classifier.lambda;
  j["permutations"] = sage.permutations;
  j["imputation_draws"] = sage.imputation_draws;
  j["structure_fraction"] = synth.structure_fraction;
  return j;
}

const LogitModel& TargetRefiner::For(std::span<const int> row) const {
  if (!group_feature) return models.front();
  return models[model_for_level[static_cast<size_t>(row[*group_feature])]];
}

nlohmann::json TargetRefiner::ToJson(const Schema& schema) const {
  nlohmann::json j;
  j["models"] = nlohmann::json::array();
  for (const LogitModel& m : models) j["models"].push_back(m.ToJson(schema));
  if (group_feature) {
    j["group_feature"] = schema.feature(*group_feature).name;
    nlohmann::json routing = nlohmann::json::object();
    const Feature& g = schema.feature(*group_feature);
    for (size_t level = 0; level < model_for_level.size(); ++level) {
      routing[std::to_string(g.codes[level])] = model_for_level[level];
    }
    j["model_for_code"] = routing;
  }
  return j;
}

nlohmann::json GroupImportance::ToJson(const Schema& schema) const {
  nlohmann::json j = nlohmann::json::array();
  const Feature& g = schema.feature(group_feature);
  for (size_t i = 0; i < levels.size(); ++i) {
    j.push_back({{"group", g.name},
                 {"code", g.codes[static_cast<size_t>(levels[i])]},
                 {"rows", sizes[i]},
                 {"importance", reports[i].ToJson()}});
  }
  return j;
}

nlohmann::json QuailModel::ToJson() const {
  nlohmann::json j;
  j["schema"] = schema->ToJson();
  j["synthesizer"] = synth.ToJson(false);
  j["target"] = target ? target->ToJson(*schema) : nlohmann::json(nullptr);
  j["feature_classifiers"] = nlohmann::json::array();
  for (const FeatureClassifier& f : feature_models) {
    j["feature_classifiers"].push_back(f.ToJson(*schema));
  }
  j["importance"] = importance.features.empty() ? nlohmann::json(nullptr)
                                                : importance.ToJson();
  j["group_importance"] = group_importance ? group_importance->ToJson(*schema)
                                           : nlohmann::json(nullptr);
  j["threshold"] = threshold;
  j["ledger"] = ledger.ToJson();
  j["warnings"] = warnings;
  return j;
}

QuailModel FitQuail(const Dataset& d, const QuailConfig& cfg) {
  const Schema& schema = d.schema();
  cfg.Validate(schema);
  RandomStream rng(cfg.seed, "fit_quail");

  QuailModel m;
  m.schema = d.schema_ptr();
  m.ledger = BudgetLedger(cfg.epsilon);
  const double weights[] = {cfg.alpha, 1.0 - cfg.alpha};
  std::vector<Epsilon> split = SplitEpsilon(cfg.epsilon, weights);
  Allocation sage_budget = m.ledger.Allocate("dpsage", split[0]);
  Allocation clf_budget = m.ledger.Allocate("feature_classifiers", split[1]);

  RandomStream sage_rng = rng.Fork("dpsage");
  SageOutput sage = DpSage(d, sage_budget, cfg.sage, cfg.classifier, cfg.synth,
                           sage_rng);

  std::vector<std::string> selected(sage.report.ranking.begin(),
                                    sage.report.ranking.begin() + cfg.beta);
  std::vector<Allocation> parts = clf_budget.Divide(selected);
  for (size_t i = 0; i < selected.size(); ++i) {
    const size_t f = schema.RequireIndex(selected[i]);
    RandomStream frng = rng.Fork("feature", f);
    m.feature_models.push_back(
        FitFeatureClassifier(d, f, parts[i], cfg.classifier, frng));
  }

  m.synth = std::move(sage.synth);
  m.target = TargetRefiner{{std::move(sage.target_model)}, std::nullopt, {}};
  m.importance = std::move(sage.report);
  return m;
}

Dataset Refine(const QuailModel& m, const Dataset& batch, RandomStream& order_rng,
               bool refine_target, GenerateTrace* trace) {
  const size_t nf = batch.num_features();
  const size_t num_features_models = m.feature_models.size();
  const bool use_target = refine_target && m.target.has_value();
  const size_t num_models = num_features_models + (use_target ? 1 : 0);
  const size_t target = m.schema->target_index();

  std::vector<int> levels = batch.levels();
  std::vector<size_t> order(num_models);
  if (trace) trace->orders.reserve(trace->orders.size() + batch.num_rows());
  for (size_t r = 0; r < batch.num_rows(); ++r) {
    std::span<int> row(levels.data() + r * nf, nf);
    std::iota(order.begin(), order.end(), size_t{0});
    order_rng.Shuffle(order);
    if (trace) trace->orders.push_back(order);
    for (size_t k : order) {
      if (k < num_features_models) {
        const FeatureClassifier& fc = m.feature_models[k];
        row[fc.feature] = fc.PredictLevel(row);
      } else {
        row[target] = PredictLabel(m.target->For(row), row, m.threshold);
      }
    }
  }
  return Dataset(batch.schema_ptr(), std::move(levels));
}

Dataset Generate(const QuailModel& m, size_t n, RandomStream& rng,
                 GenerateTrace* trace) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  RandomStream synth_rng = rng.Fork("synth");
  Dataset raw = Sample(m.synth, n, synth_rng);
  RandomStream order_rng = rng.Fork("order");
  return Refine(m, raw, order_rng, true, trace);
}

}  // namespace quail
