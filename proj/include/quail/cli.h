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

#ifndef QUAIL_CLI_H_
#define QUAIL_CLI_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "quail/dp_core.h"
#include "quail/eval.h"
#include "quail/fairquail.h"
#include "quail/superquail.h"
#include "quail/tabular.h"

namespace quail {

enum class Mode { kReal, kMarginal, kSq, kFsqBal, kFsqFnr };

Mode ParseMode(std::string_view text);
std::string ModeName(Mode mode);

// Every knob of one run. Echoed into each artifact.
struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path schema;
  std::filesystem::path test;
  std::filesystem::path out;
  Mode mode = Mode::kSq;
  std::string epsilon = "1";
  std::string eval_epsilon = "e^3";
  double alpha = 0.5;
  int beta = 2;
  double gamma = 0.5;
  size_t samples = 1000;
  uint64_t seed = 0;
  double lambda = 1.0;
  int max_iterations = 5000;
  int permutations = 256;
  int imputation_draws = 16;
  int batch_size = 512;
  int imputation_pool = 4096;
  double structure_fraction = 0.3;
  std::optional<std::string> sensitive;
  std::optional<int> protected_value;
  double fair_weight = 0.5;
  int runs = 1;
  int jobs = 1;

  QuailConfig ToQuail() const;
  FairConfig ToFair() const;
  nlohmann::json ToJson() const;
};

// "inf" and "non-private" give the non-private sentinel; otherwise a value
// or e^k.
Epsilon ParseEpsilonArg(const std::string& text);

// Loads the schema file and applies --sensitive/--protected.
std::shared_ptr<const Schema> LoadRunSchema(const RunConfig& cfg);

// Throws ConfigError. Called before any data is touched.
void ValidateRunConfig(const RunConfig& cfg, const Schema& schema);

struct PipelineResult {
  Dataset synthetic;
  nlohmann::json ledger;
  nlohmann::json model;
  std::vector<std::string> warnings;
};

// Produces cfg.samples synthetic rows from `train` under cfg.mode.
PipelineResult RunPipeline(const RunConfig& cfg, const Dataset& train);

// The alpha x gamma x beta sweep over {0.2..0.8} x {0.2..0.8} x {2..5}, or
// alpha alone with gamma and beta taken from `base`.
std::vector<RunConfig> GridCells(const RunConfig& base, bool alpha_only);

// Entry point. Returns the process exit code: 0 success, 1 config error,
// 2 data error, 3 budget error.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace quail

#endif  // QUAIL_CLI_H_
