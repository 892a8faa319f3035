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

#include "quail/dpsage.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "quail/errors.h"
#include "quail/parallel.h"

namespace quail {

namespace {

double CrossEntropy(bool positive, double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return positive ? -std::log(p) : -std::log1p(-p);
}

std::vector<std::string> TopK(const ImportanceReport& r, size_t k) {
  return {r.ranking.begin(), r.ranking.begin() + k};
}

}  // namespace

void SageConfig::Validate() const {
  if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
  if (permutations < 1) throw ConfigError("permutations must be >= 1");
  if (imputation_draws < 1) throw ConfigError("imputation draws must be >= 1");
  if (batch_size < 1) throw ConfigError("SAGE batch size must be >= 1");
  if (imputation_pool < 1) throw ConfigError("imputation pool must be >= 1");
}

double ImportanceReport::Value(std::string_view feature) const {
  for (size_t i = 0; i < features.size(); ++i) {
    if (features[i] == feature) return values[i];
  }
  throw std::out_of_range("no importance for '" + std::string(feature) + "'");
}

void ImportanceReport::Rank() {
  std::vector<size_t> order(features.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return features[a] < features[b];
  });
  ranking.clear();
  for (size_t i : order) ranking.push_back(features[i]);
}

nlohmann::json ImportanceReport::ToJson() const {
  nlohmann::json values_json = nlohmann::json::object();
  nlohmann::json stderr_json = nlohmann::json::object();
  for (size_t i = 0; i < features.size(); ++i) {
    values_json[features[i]] = values[i];
    stderr_json[features[i]] = standard_errors[i];
  }
  return {{"ranking", ranking},
          {"values", std::move(values_json)},
          {"stderr", std::move(stderr_json)},
          {"features", features},
          {"permutations", permutations},
          {"evaluations", evaluations},
          {"empty_loss", empty_loss},
          {"full_loss", full_loss}};
}

ImportanceReport ImportanceReport::FromJson(const nlohmann::json& j) {
  ImportanceReport r;
  r.features = j.at("features").get<std::vector<std::string>>();
  for (const auto& f : r.features) {
    r.values.push_back(j.at("values").at(f).get<double>());
    r.standard_errors.push_back(j.at("stderr").at(f).get<double>());
  }
  r.ranking = j.at("ranking").get<std::vector<std::string>>();
  r.permutations = j.value("permutations", 0);
  r.evaluations = j.value("evaluations", size_t{0});
  r.empty_loss = j.value("empty_loss", 0.0);
  r.full_loss = j.value("full_loss", 0.0);
  return r;
}

ImportanceReport EstimateSage(const Dataset& rows, const LogitModel& model,
                              const Dataset& imputation_pool,
                              const SageConfig& cfg, RandomStream& rng) {
  cfg.Validate();
  const auto& blocks = model.layout.blocks();
  const size_t nb = blocks.size();
  if (nb == 0) throw ConfigError("model has no input features to explain");

  // coef[b][level]: contribution of a block's level to the linear score.
  std::vector<std::vector<double>> coef(nb);
  for (size_t b = 0; b < nb; ++b) {
    coef[b].assign(blocks[b].num_levels, 0.0);
    for (size_t level = 1; level < blocks[b].num_levels; ++level) {
      coef[b][level] =
          model.coefficients[model.layout.Column(blocks[b], static_cast<int>(level))];
    }
  }
  const double intercept = model.coefficients[0];
  const size_t n = rows.num_rows();
  const bool all_rows = n <= static_cast<size_t>(cfg.batch_size);
  const size_t batch = all_rows ? n : static_cast<size_t>(cfg.batch_size);
  const size_t draws = static_cast<size_t>(cfg.imputation_draws);
  const size_t pool_n = imputation_pool.num_rows();

  struct PermResult {
    std::vector<double> delta;
    double empty = 0;
    double full = 0;
  };
  std::vector<PermResult> results(cfg.permutations);

  ParallelFor(results.size(), cfg.jobs, [&](size_t t) {
    RandomStream prng = rng.Fork("permutation", t);
    std::vector<size_t> order(nb);
    for (size_t b = 0; b < nb; ++b) order[b] = b;
    prng.Shuffle(order);

    PermResult& res = results[t];
    res.delta.assign(nb, 0.0);
    std::vector<double> score(draws);
    std::vector<size_t> donor(draws);
    for (size_t i = 0; i < batch; ++i) {
      const size_t r = all_rows ? i : prng.UniformIndex(n);
      auto real = rows.row(r);
      const bool positive = real[model.target] == model.positive_level;
      for (size_t k = 0; k < draws; ++k) {
        donor[k] = prng.UniformIndex(pool_n);
        auto fake = imputation_pool.row(donor[k]);
        double z = intercept;
        for (size_t b = 0; b < nb; ++b) z += coef[b][fake[blocks[b].feature]];
        score[k] = z;
      }
      auto loss = [&] {
        double p = 0;
        for (double z : score) p += Logistic(z);
        return CrossEntropy(positive, p / static_cast<double>(draws));
      };
      double prev = loss();
      res.empty += prev;
      for (size_t b : order) {
        const size_t f = blocks[b].feature;
        const double real_c = coef[b][real[f]];
        for (size_t k = 0; k < draws; ++k) {
          score[k] += real_c - coef[b][imputation_pool.at(donor[k], f)];
        }
        double cur = loss();
        res.delta[b] += prev - cur;
        prev = cur;
      }
      res.full += prev;
    }
    const double inv = 1.0 / static_cast<double>(batch);
    for (double& v : res.delta) v *= inv;
    res.empty *= inv;
    res.full *= inv;
  });

  ImportanceReport report;
  const double P = static_cast<double>(results.size());
  for (size_t b = 0; b < nb; ++b) {
    double mean = 0;
    for (const auto& res : results) mean += res.delta[b];
    mean /= P;
    double var = 0;
    for (const auto& res : results) var += (res.delta[b] - mean) * (res.delta[b] - mean);
    double se = results.size() > 1 ? std::sqrt(var / (P - 1) / P) : 0.0;
    report.features.push_back(rows.schema().feature(blocks[b].feature).name);
    report.values.push_back(mean);
    report.standard_errors.push_back(se);
  }
  for (const auto& res : results) {
    report.empty_loss += res.empty / P;
    report.full_loss += res.full / P;
  }
  report.permutations = cfg.permutations;
  report.evaluations = batch * results.size();
  report.Rank();
  return report;
}

SageOutput DpSage(const Dataset& d, Allocation& budget, const SageConfig& cfg,
                  const FitConfig& classifier_cfg, const SynthConfig& synth_cfg,
                  RandomStream& rng) {
  cfg.Validate();
  classifier_cfg.Validate();
  synth_cfg.Validate();
  const Schema& schema = d.schema();
  if (schema.num_features() < 3) {
    throw ConfigError("importance estimation needs at least 2 non-target features");
  }
  LogitTask task = TaskForFeature(schema, schema.target_index());

  std::vector<Allocation> parts = budget.Partition(
      {{"synth", cfg.gamma}, {"target_classifier", 1.0 - cfg.gamma}});
  RandomStream synth_rng = rng.Fork("synth");
  MarginalTree synth = FitSynth(d, parts[0], synth_cfg, synth_rng);
  RandomStream clf_rng = rng.Fork("classifier");
  LogitModel target_model = FitDpLogit(d, task, parts[1], classifier_cfg, clf_rng);

  RandomStream pool_rng = rng.Fork("pool");
  Dataset pool = Sample(synth, static_cast<size_t>(cfg.imputation_pool), pool_rng);
  RandomStream sage_rng = rng.Fork("sage");
  ImportanceReport report = EstimateSage(d, target_model, pool, cfg, sage_rng);
  return SageOutput{std::move(report), std::move(synth), std::move(target_model)};
}

RankingAgreement RankingSimilarity(const ImportanceReport& a,
                                   const ImportanceReport& b, size_t k) {
  std::set<std::string> fa(a.ranking.begin(), a.ranking.end());
  std::set<std::string> fb(b.ranking.begin(), b.ranking.end());
  if (fa != fb || fa.size() != a.ranking.size()) {
    throw std::invalid_argument("rankings cover different feature sets");
  }
  if (k < 1 || k > a.ranking.size()) {
    throw std::invalid_argument("k must lie in [1, number of features]");
  }
  std::vector<std::string> top_a = TopK(a, k);
  std::vector<std::string> top_b = TopK(b, k);
  std::set<std::string> relevant(top_b.begin(), top_b.end());

  RankingAgreement out;
  double dcg = 0, idcg = 0, precision_sum = 0;
  size_t hits = 0;
  for (size_t i = 0; i < k; ++i) {
    const double discount = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    idcg += discount;
    if (relevant.count(top_a[i])) {
      dcg += discount;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  out.ndcg = dcg / idcg;
  out.average_precision = precision_sum / static_cast<double>(k);
  std::set<std::string> uni(top_a.begin(), top_a.end());
  uni.insert(top_b.begin(), top_b.end());
  out.jaccard = static_cast<double>(hits) / static_cast<double>(uni.size());
  return out;
}

}  // namespace quail
