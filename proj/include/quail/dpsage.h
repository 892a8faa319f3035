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

#ifndef QUAIL_DPSAGE_H_
#define QUAIL_DPSAGE_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "quail/dp_classifier.h"
#include "quail/dp_core.h"
#include "quail/marginal_synth.h"
#include "quail/tabular.h"

namespace quail {

struct SageConfig {
  // Share of the DPSAGE budget given to the synthesizer; the classifier
  // gets the rest.
  double gamma = 0.5;
  int permutations = 256;
  // Synthetic rows averaged per masked prediction.
  int imputation_draws = 16;
  // Real rows scored per permutation (all rows when the data is smaller).
  int batch_size = 512;
  // Synthetic rows drawn once from the synthesizer for imputation.
  int imputation_pool = 4096;
  int jobs = 1;

  void Validate() const;
};

// Global importance of each input feature of an audited model. Values are
// mean reductions in cross-entropy (nats) from revealing the feature.
struct ImportanceReport {
  std::vector<std::string> features;  // schema order
  std::vector<double> values;
  std::vector<double> standard_errors;
  // Descending by value; ties by name.
  std::vector<std::string> ranking;
  int permutations = 0;
  size_t evaluations = 0;  // rows scored across all permutations
  // Mean loss with every feature imputed, and with none imputed. Their
  // difference is what the values distribute.
  double empty_loss = 0;
  double full_loss = 0;

  double Value(std::string_view feature) const;
  // Recomputes `ranking` from `values`.
  void Rank();
  nlohmann::json ToJson() const;
  static ImportanceReport FromJson(const nlohmann::json& j);
};

struct SageOutput {
  ImportanceReport report;
  MarginalTree synth;
  LogitModel target_model;
};

// Permutation estimator with a marginal imputer. For each permutation,
// features are revealed one at a time on real rows of `rows`; hidden features
// take values from rows of `imputation_pool`. Explains the model's inputs.
ImportanceReport EstimateSage(const Dataset& rows, const LogitModel& model,
                              const Dataset& imputation_pool,
                              const SageConfig& cfg, RandomStream& rng);

// Splits `budget` into "<label>/synth" (gamma) and "<label>/target_classifier"
// (1 - gamma), trains both on `d` and audits the classifier. The estimate is
// post-processing of the two DP models.
SageOutput DpSage(const Dataset& d, Allocation& budget, const SageConfig& cfg,
                  const FitConfig& classifier_cfg, const SynthConfig& synth_cfg,
                  RandomStream& rng);

struct RankingAgreement {
  double ndcg = 0;
  double jaccard = 0;
  double average_precision = 0;
};

// Agreement of a's ranking with b's top-k, which serves as the relevant set:
// nDCG@k with binary relevance and log2 discounts, Jaccard of the two top-k
// sets, and average precision of a's top-k. All equal 1 when a == b.
RankingAgreement RankingSimilarity(const ImportanceReport& a,
                                   const ImportanceReport& b, size_t k);

}  // namespace quail

#endif  // QUAIL_DPSAGE_H_
