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

#include "quail/fairquail.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <utility>

#include "quail/dpsage.h"
#include "quail/errors.h"

namespace quail {

Schema FairConfig::Resolve(const Schema& schema) const {
  if (sensitive) {
    std::optional<int> pv = protected_value;
    if (!pv && schema.sensitive_index() &&
        schema.feature(*schema.sensitive_index()).name == *sensitive &&
        schema.protected_level()) {
      pv = schema.feature(*schema.sensitive_index())
               .codes[static_cast<size_t>(*schema.protected_level())];
    }
    if (!pv) throw ConfigError("no protected value for " + *sensitive);
    return schema.WithSensitive(*sensitive, pv);
  }
  if (!schema.sensitive_index()) {
    throw ConfigError("a sensitive feature is required for fair modes");
  }
  const Feature& s = schema.feature(*schema.sensitive_index());
  if (protected_value) return schema.WithSensitive(s.name, protected_value);
  if (!schema.protected_level()) {
    throw ConfigError("no protected value for " + s.name);
  }
  return schema;
}

void FairConfig::Validate(const Schema& schema) const {
  Schema resolved = Resolve(schema);
  if (*resolved.sensitive_index() == resolved.target_index()) {
    throw ConfigError("the sensitive feature cannot be the target");
  }
  quail.Validate(resolved);
  if (!(accuracy_weight >= 0 && fairness_weight >= 0) ||
      accuracy_weight + fairness_weight <= 0) {
    throw ConfigError("accuracy and fairness weights must be non-negative "
                      "and not both zero");
  }
  if (!(grid_step > 0) || !(grid_min > 0) || !(grid_max < 1) ||
      !(grid_min <= 0.5 && 0.5 <= grid_max)) {
    throw ConfigError("threshold grid must lie in (0, 1) and contain 0.5");
  }
  if (min_group_rows < 1) throw ConfigError("min_group_rows must be positive");
}

GroupwiseSageOutput GroupwiseDpSage(const Dataset& d, Allocation& budget,
                                    const FairConfig& cfg, RandomStream& rng) {
  const Schema& schema = d.schema();
  if (!schema.sensitive_index()) {
    throw ConfigError("a sensitive feature is required");
  }
  const size_t sens = *schema.sensitive_index();
  const Feature& sf = schema.feature(sens);
  if (schema.num_features() < 4) {
    throw ConfigError("group importance needs at least 2 features besides "
                      "the target and the sensitive feature");
  }
  std::vector<GroupSlice> groups = SplitByGroup(d, sf.name);
  if (groups.size() < 2) {
    throw DataError("need at least two groups of " + sf.name + " in the data");
  }
  for (const GroupSlice& g : groups) {
    if (g.rows.size() < cfg.min_group_rows) {
      throw DataError("group " + sf.name + "=" + std::to_string(g.code) +
                      " has " + std::to_string(g.rows.size()) +
                      " rows; at least " + std::to_string(cfg.min_group_rows) +
                      " are required");
    }
  }
  const SageConfig& sage_cfg = cfg.quail.sage;
  LogitTask task = TaskForFeature(schema, schema.target_index());
  task.inputs.erase(std::remove(task.inputs.begin(), task.inputs.end(), sens),
                    task.inputs.end());

  std::vector<Allocation> parts = budget.Partition(
      {{"synth", sage_cfg.gamma}, {"group_classifiers", 1.0 - sage_cfg.gamma}});
  std::vector<std::string> labels;
  for (const GroupSlice& g : groups) {
    labels.push_back("group=" + std::to_string(g.code));
  }
  std::vector<Allocation> group_budgets = parts[1].Divide(labels);

  GroupwiseSageOutput out;
  RandomStream synth_rng = rng.Fork("synth");
  out.synth = FitSynth(d, parts[0], cfg.quail.synth, synth_rng);
  RandomStream pool_rng = rng.Fork("pool");
  Dataset pool =
      Sample(out.synth, static_cast<size_t>(sage_cfg.imputation_pool), pool_rng);

  out.importance.group_feature = sens;
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const GroupSlice& g = groups[gi];
    Dataset slice = d.Subset(g.rows);
    RandomStream clf_rng = rng.Fork("classifier", static_cast<uint64_t>(g.level));
    LogitModel model =
        FitDpLogit(slice, task, group_budgets[gi], cfg.quail.classifier, clf_rng);
    RandomStream sage_rng = rng.Fork("sage", static_cast<uint64_t>(g.level));
    ImportanceReport report = EstimateSage(slice, model, pool, sage_cfg, sage_rng);

    // Report over every non-target feature so group rankings are comparable.
    auto pos = std::find_if(report.features.begin(), report.features.end(),
                            [&](const std::string& name) {
                              return schema.RequireIndex(name) > sens;
                            });
    const auto at = pos - report.features.begin();
    report.features.insert(pos, sf.name);
    report.values.insert(report.values.begin() + at, 0.0);
    report.standard_errors.insert(report.standard_errors.begin() + at, 0.0);
    report.Rank();

    out.importance.levels.push_back(g.level);
    out.importance.sizes.push_back(g.rows.size());
    out.importance.reports.push_back(std::move(report));
    out.group_models.push_back(std::move(model));
  }
  return out;
}

std::vector<std::string> RoundRobinSelect(const GroupImportance& importance,
                                          size_t beta, int protected_level) {
  const size_t k = importance.levels.size();
  if (k == 0 || importance.reports.size() != k || importance.sizes.size() != k) {
    throw std::invalid_argument("malformed group importance");
  }
  std::set<std::string> all;
  for (const ImportanceReport& r : importance.reports) {
    all.insert(r.ranking.begin(), r.ranking.end());
  }
  if (beta < 1 || beta > all.size()) {
    throw ConfigError("beta must lie in [1, " + std::to_string(all.size()) + "]");
  }
  std::vector<size_t> by_size(k);
  std::iota(by_size.begin(), by_size.end(), size_t{0});
  std::stable_sort(by_size.begin(), by_size.end(), [&](size_t a, size_t b) {
    if (importance.sizes[a] != importance.sizes[b]) {
      return importance.sizes[a] > importance.sizes[b];
    }
    return importance.levels[a] < importance.levels[b];
  });
  auto prot = std::find_if(by_size.begin(), by_size.end(), [&](size_t g) {
    return importance.levels[g] == protected_level;
  });
  if (prot == by_size.end()) {
    throw std::invalid_argument("protected group has no importance report");
  }
  std::vector<size_t> final_round = by_size;
  std::rotate(final_round.begin(),
              final_round.begin() + (prot - by_size.begin()),
              final_round.begin() + (prot - by_size.begin()) + 1);

  std::vector<std::string> selected;
  std::set<std::string> taken;
  std::vector<size_t> cursor(k, 0);
  while (selected.size() < beta) {
    const bool last = beta - selected.size() <= k;
    const std::vector<size_t>& order = last ? final_round : by_size;
    for (size_t g : order) {
      if (selected.size() == beta) break;
      const std::vector<std::string>& ranking = importance.reports[g].ranking;
      while (cursor[g] < ranking.size() && taken.count(ranking[cursor[g]])) {
        ++cursor[g];
      }
      if (cursor[g] < ranking.size()) {
        taken.insert(ranking[cursor[g]]);
        selected.push_back(ranking[cursor[g]]);
        ++cursor[g];
      }
    }
  }
  return selected;
}

namespace {

struct GridStats {
  double accuracy = 0;
  double penalty = 0;
};

// Thresholds in search order: 0.5, then alternately below and above.
std::vector<double> OutwardGrid(const FairConfig& cfg) {
  std::vector<double> grid = {0.5};
  const double eps = 1e-9;
  for (int k = 1;; ++k) {
    const double lo = std::round((0.5 - k * cfg.grid_step) * 1e9) / 1e9;
    const double hi = std::round((0.5 + k * cfg.grid_step) * 1e9) / 1e9;
    const bool lo_ok = lo >= cfg.grid_min - eps;
    const bool hi_ok = hi <= cfg.grid_max + eps;
    if (!lo_ok && !hi_ok) break;
    if (lo_ok) grid.push_back(lo);
    if (hi_ok) grid.push_back(hi);
  }
  return grid;
}

}  // namespace

ThresholdResult TuneThreshold(const QuailModel& m, const Dataset& batch,
                              const FairConfig& cfg) {
  if (!m.target) throw std::invalid_argument("model has no target classifier");
  const Schema& schema = batch.schema();
  if (!schema.sensitive_index() || !schema.protected_level() ||
      !schema.positive_level()) {
    throw ConfigError("threshold tuning needs sensitive, protected and "
                      "positive declarations");
  }
  const size_t target = schema.target_index();
  const size_t sens = *schema.sensitive_index();
  const int protected_level = *schema.protected_level();
  const int positive = *schema.positive_level();

  const size_t n = batch.num_rows();
  std::vector<double> proba(n);
  std::vector<char> truth(n), is_protected(n);
  size_t positives[2] = {0, 0};
  for (size_t r = 0; r < n; ++r) {
    std::span<const int> row = batch.row(r);
    proba[r] = PredictProba(m.target->For(row), row);
    truth[r] = row[target] == positive;
    is_protected[r] = row[sens] == protected_level;
    if (truth[r]) ++positives[is_protected[r] ? 0 : 1];
  }

  ThresholdResult result;
  const size_t total_pos = positives[0] + positives[1];
  if (total_pos == 0 || total_pos == n) {
    result.warning = "tuning batch holds a single target class; using 0.5";
    return result;
  }
  const bool need_rest = cfg.mode == FairMode::kBalanced;
  if (positives[0] == 0 || (need_rest && positives[1] == 0)) {
    result.warning = "tuning batch has no positives in a compared group; "
                     "using 0.5";
    return result;
  }

  auto evaluate = [&](double p) {
    size_t correct = 0, fn[2] = {0, 0};
    for (size_t r = 0; r < n; ++r) {
      const bool pred = proba[r] >= p;
      if (pred == static_cast<bool>(truth[r])) ++correct;
      if (truth[r] && !pred) ++fn[is_protected[r] ? 0 : 1];
    }
    GridStats s;
    s.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    const double fnr_p =
        static_cast<double>(fn[0]) / static_cast<double>(positives[0]);
    if (cfg.mode == FairMode::kFnr) {
      s.penalty = fnr_p;
    } else {
      const double fnr_r =
          static_cast<double>(fn[1]) / static_cast<double>(positives[1]);
      s.penalty = std::abs(fnr_p - fnr_r);
    }
    return s;
  };

  const GridStats base = evaluate(0.5);
  result.baseline_penalty = base.penalty;
  result.penalty = base.penalty;
  result.score = cfg.accuracy_weight * base.accuracy -
                 cfg.fairness_weight * base.penalty;
  for (double p : OutwardGrid(cfg)) {
    const GridStats s = evaluate(p);
    if (s.penalty > base.penalty + 1e-12) continue;
    const double score =
        cfg.accuracy_weight * s.accuracy - cfg.fairness_weight * s.penalty;
    if (score > result.score + 1e-12) {
      result.threshold = p;
      result.score = score;
      result.penalty = s.penalty;
    }
  }
  return result;
}

QuailModel FitFsq(const Dataset& input, const FairConfig& cfg) {
  cfg.Validate(input.schema());
  auto schema = std::make_shared<const Schema>(cfg.Resolve(input.schema()));
  Dataset d(schema, input.levels());
  const QuailConfig& qc = cfg.quail;
  RandomStream rng(qc.seed, "fit_fsq");

  QuailModel m;
  m.schema = schema;
  m.ledger = BudgetLedger(qc.epsilon);
  const double weights[] = {qc.alpha, 1.0 - qc.alpha};
  std::vector<Epsilon> split = SplitEpsilon(qc.epsilon, weights);
  Allocation sage_budget = m.ledger.Allocate("dpsage", split[0]);
  Allocation clf_budget = m.ledger.Allocate("feature_classifiers", split[1]);

  RandomStream sage_rng = rng.Fork("dpsage");
  GroupwiseSageOutput gs = GroupwiseDpSage(d, sage_budget, cfg, sage_rng);
  std::vector<std::string> selected = RoundRobinSelect(
      gs.importance, static_cast<size_t>(qc.beta), *schema->protected_level());

  std::vector<Allocation> parts = clf_budget.Divide(selected);
  for (size_t i = 0; i < selected.size(); ++i) {
    const size_t f = schema->RequireIndex(selected[i]);
    RandomStream frng = rng.Fork("feature", f);
    m.feature_models.push_back(
        FitFeatureClassifier(d, f, parts[i], qc.classifier, frng));
  }

  const size_t sens = *schema->sensitive_index();
  TargetRefiner refiner;
  refiner.group_feature = sens;
  refiner.models = std::move(gs.group_models);
  // Levels absent from the data fall back to the largest group's model.
  const size_t largest = static_cast<size_t>(
      std::max_element(gs.importance.sizes.begin(), gs.importance.sizes.end()) -
      gs.importance.sizes.begin());
  refiner.model_for_level.assign(schema->feature(sens).num_levels(), largest);
  for (size_t gi = 0; gi < gs.importance.levels.size(); ++gi) {
    refiner.model_for_level[static_cast<size_t>(gs.importance.levels[gi])] = gi;
  }
  m.synth = std::move(gs.synth);
  m.target = std::move(refiner);
  m.group_importance = std::move(gs.importance);

  const size_t tuning_n = cfg.tuning_samples ? cfg.tuning_samples : qc.samples;
  RandomStream tune_rng = rng.Fork("tuning");
  RandomStream tune_synth = tune_rng.Fork("synth");
  RandomStream tune_order = tune_rng.Fork("order");
  Dataset raw = Sample(m.synth, tuning_n, tune_synth);
  Dataset batch = Refine(m, raw, tune_order, false);
  ThresholdResult tr = TuneThreshold(m, batch, cfg);
  m.threshold = tr.threshold;
  if (tr.warning) m.warnings.push_back(*tr.warning);
  return m;
}

}  // namespace quail
