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

#include "quail/eval.h"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "quail/errors.h"

namespace quail {
namespace {

std::optional<double> Ratio(int64_t num, int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> OptionalFrom(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

GroupMetrics GroupMetrics::FromConfusion(std::string group, const Confusion& c) {
  GroupMetrics g;
  g.group = std::move(group);
  g.confusion = c;
  g.accuracy = c.total() ? static_cast<double>(c.tp + c.tn) /
                               static_cast<double>(c.total())
                         : 0.0;
  g.f1 = Ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  g.fnr = Ratio(c.fn, c.fn + c.tp);
  g.fpr = Ratio(c.fp, c.fp + c.tn);
  return g;
}

nlohmann::json GroupMetrics::ToJson() const {
  return {{"group", group},
          {"tp", confusion.tp},
          {"fp", confusion.fp},
          {"tn", confusion.tn},
          {"fn", confusion.fn},
          {"support", confusion.total()},
          {"accuracy", accuracy},
          {"f1", OptionalJson(f1)},
          {"fnr", OptionalJson(fnr)},
          {"fpr", OptionalJson(fpr)}};
}

std::vector<GroupMetrics> ComputeMetrics(const Dataset& test,
                                         std::span<const int> predicted,
                                         int positive_level,
                                         std::optional<size_t> group_feature) {
  if (predicted.size() != test.num_rows()) {
    throw std::invalid_argument("one prediction per test row is required");
  }
  const Schema& schema = test.schema();
  const size_t target = schema.target_index();
  const size_t num_groups =
      group_feature ? schema.feature(*group_feature).num_levels() : 0;
  Confusion overall;
  std::vector<Confusion> per_group(num_groups);
  for (size_t r = 0; r < test.num_rows(); ++r) {
    const bool truth = test.at(r, target) == positive_level;
    const bool pred = predicted[r] == positive_level;
    Confusion* slots[2] = {&overall,
                           group_feature
                               ? &per_group[static_cast<size_t>(
                                     test.at(r, *group_feature))]
                               : nullptr};
    for (Confusion* c : slots) {
      if (!c) continue;
      if (truth && pred) ++c->tp;
      if (truth && !pred) ++c->fn;
      if (!truth && pred) ++c->fp;
      if (!truth && !pred) ++c->tn;
    }
  }
  std::vector<GroupMetrics> out;
  out.push_back(GroupMetrics::FromConfusion("overall", overall));
  for (size_t level = 0; level < num_groups; ++level) {
    if (per_group[level].total() == 0) continue;
    const Feature& f = schema.feature(*group_feature);
    out.push_back(GroupMetrics::FromConfusion(
        f.name + "=" + std::to_string(f.codes[level]), per_group[level]));
  }
  return out;
}

nlohmann::json RunReport::ToJson() const {
  nlohmann::json j;
  j["config"] = config;
  j["ledger"] = ledger;
  j["metrics"] = nlohmann::json::array();
  for (const GroupMetrics& g : metrics) j["metrics"].push_back(g.ToJson());
  j["seed"] = seed;
  j["duration_seconds"] = duration_seconds;
  return j;
}

RunReport RunReport::FromJson(const nlohmann::json& j) {
  RunReport r;
  try {
    r.config = j.value("config", nlohmann::json::object());
    r.ledger = j.value("ledger", nlohmann::json::object());
    r.seed = j.value("seed", uint64_t{0});
    r.duration_seconds = j.value("duration_seconds", 0.0);
    for (const nlohmann::json& g : j.at("metrics")) {
      GroupMetrics m;
      m.group = g.at("group").get<std::string>();
      m.confusion = {g.at("tp").get<int64_t>(), g.at("fp").get<int64_t>(),
                     g.at("tn").get<int64_t>(), g.at("fn").get<int64_t>()};
      m.accuracy = g.at("accuracy").get<double>();
      m.f1 = OptionalFrom(g, "f1");
      m.fnr = OptionalFrom(g, "fnr");
      m.fpr = OptionalFrom(g, "fpr");
      r.metrics.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

RunReport Evaluate(const Dataset& synthetic, const Dataset& test,
                   Epsilon eval_epsilon, const FitConfig& cfg,
                   RandomStream& rng, nlohmann::json config) {
  const auto start = std::chrono::steady_clock::now();
  const Schema& schema = test.schema();
  if (!(synthetic.schema() == schema)) {
    throw DataError("synthetic and test data have different schemas");
  }
  if (!schema.positive_level()) {
    throw ConfigError("the target needs a positive value for evaluation");
  }
  BudgetLedger ledger(eval_epsilon);
  Allocation budget = ledger.Allocate("evaluation_classifier", eval_epsilon);
  LogitModel model =
      FitDpLogit(synthetic, TaskForFeature(schema, schema.target_index()),
                 budget, cfg, rng);
  RunReport report;
  report.config = std::move(config);
  report.ledger = ledger.ToJson();
  report.metrics = ScoreModel(model, test);
  report.seed = rng.seed();
  report.duration_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start)
                                .count();
  return report;
}

std::vector<GroupMetrics> ScoreModel(const LogitModel& model, const Dataset& test) {
  const Schema& schema = test.schema();
  std::vector<int> predicted(test.num_rows());
  for (size_t r = 0; r < test.num_rows(); ++r) {
    predicted[r] = PredictLabel(model, test.row(r), 0.5);
  }
  return ComputeMetrics(test, predicted, model.positive_level,
                        schema.sensitive_index());
}

nlohmann::json Summary::ToJson() const {
  nlohmann::json j;
  j["runs"] = runs;
  j["config"] = config;
  nlohmann::json g = nlohmann::json::object();
  for (const auto& [group, metrics] : groups) {
    for (const auto& [name, s] : metrics) {
      g[group][name] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
    }
  }
  j["groups"] = g;
  return j;
}

std::string Summary::ToCsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "group,metric,mean,stddev,count\n";
  for (const auto& [group, metrics] : groups) {
    for (const auto& [name, s] : metrics) {
      out << group << ',' << name << ',' << s.mean << ',' << s.stddev << ','
          << s.count << '\n';
    }
  }
  return out.str();
}

Summary Aggregate(std::span<const RunReport> reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  auto strip = [](nlohmann::json c) {
    if (c.is_object()) c.erase("seed");
    return c;
  };
  Summary s;
  s.runs = reports.size();
  s.config = strip(reports.front().config);
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const RunReport& r : reports) {
    if (strip(r.config) != s.config) {
      throw ConfigError("reports come from different configurations");
    }
    for (const GroupMetrics& g : r.metrics) {
      auto& v = values[g.group];
      v["accuracy"].push_back(g.accuracy);
      if (g.f1) v["f1"].push_back(*g.f1);
      if (g.fnr) v["fnr"].push_back(*g.fnr);
      if (g.fpr) v["fpr"].push_back(*g.fpr);
    }
  }
  for (const auto& [group, metrics] : values) {
    for (const auto& [name, v] : metrics) {
      MetricSummary m;
      m.count = v.size();
      double sum = 0;
      for (double x : v) sum += x;
      m.mean = sum / static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
      s.groups[group][name] = m;
    }
  }
  return s;
}

}  // namespace quail
