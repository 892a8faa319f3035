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

#include "quail/cli.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "quail/dpsage.h"
#include "quail/errors.h"
#include "quail/marginal_synth.h"
#include "quail/parallel.h"

namespace quail {
namespace {

namespace fs = std::filesystem;

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("I/O failure writing " + path.string());
}

void WriteJson(const fs::path& path, const nlohmann::json& j) {
  WriteText(path, j.dump(2) + "\n");
}

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

nlohmann::json WithConfig(const RunConfig& cfg, const char* key,
                          nlohmann::json value) {
  return {{"config", cfg.ToJson()}, {"seed", cfg.seed}, {key, std::move(value)}};
}

std::string CellName(size_t index) {
  std::ostringstream s;
  s << "cell-";
  s.width(3);
  s.fill('0');
  s << index;
  return s.str();
}

// Runs cfg.runs seeds (cfg.seed, cfg.seed + 1, ...) of pipeline + evaluate.
std::vector<RunReport> EvaluateRuns(const RunConfig& cfg, const Dataset& train,
                                    const Dataset& test, int jobs) {
  const Epsilon eval_eps = ParseEpsilonArg(cfg.eval_epsilon);
  FitConfig fit;
  fit.lambda = cfg.lambda;
  fit.max_iterations = cfg.max_iterations;
  std::vector<std::optional<RunReport>> reports(static_cast<size_t>(cfg.runs));
  ParallelFor(reports.size(), jobs, [&](size_t k) {
    RunConfig run = cfg;
    run.seed = cfg.seed + k;
    PipelineResult p = RunPipeline(run, train);
    RandomStream rng(run.seed, "evaluate");
    reports[k] = Evaluate(p.synthetic, test, eval_eps, fit, rng, run.ToJson());
  });
  std::vector<RunReport> out;
  for (auto& r : reports) out.push_back(std::move(*r));
  return out;
}

void WriteSummary(const fs::path& dir, const std::vector<RunReport>& reports) {
  MakeDir(dir);
  for (size_t k = 0; k < reports.size(); ++k) {
    const fs::path run_dir = dir / ("run-" + std::to_string(k));
    MakeDir(run_dir);
    WriteJson(run_dir / "report.json", reports[k].ToJson());
  }
  Summary s = Aggregate(reports);
  WriteJson(dir / "summary.json", s.ToJson());
  WriteText(dir / "summary.csv", s.ToCsv());
}

void AddDataOptions(CLI::App* app, RunConfig& cfg) {
  app->add_option("--input", cfg.input, "Training CSV")->required();
  app->add_option("--schema", cfg.schema, "Schema JSON")->required();
  app->add_option("--out", cfg.out, "Output directory")->required();
  app->add_option("--seed", cfg.seed, "Master seed")->envname("QUAIL_SEED");
}

void AddModelOptions(CLI::App* app, RunConfig& cfg, std::string& mode) {
  app->add_option("--mode", mode, "real|marginal|sq|fsq-bal|fsq-fnr");
  app->add_option("--epsilon", cfg.epsilon, "Total budget (value or e^k)");
  app->add_option("--alpha", cfg.alpha, "Importance share of epsilon");
  app->add_option("--beta", cfg.beta, "Features refined by classifiers");
  app->add_option("--gamma", cfg.gamma, "Synthesizer share of the importance budget");
  app->add_option("--samples", cfg.samples, "Synthetic rows");
  app->add_option("--lambda", cfg.lambda, "Classifier L2 weight");
  app->add_option("--max-iterations", cfg.max_iterations);
  app->add_option("--permutations", cfg.permutations, "SAGE permutations");
  app->add_option("--imputation-draws", cfg.imputation_draws);
  app->add_option("--batch-size", cfg.batch_size, "Real rows per permutation");
  app->add_option("--imputation-pool", cfg.imputation_pool);
  app->add_option("--structure-fraction", cfg.structure_fraction);
  app->add_option("--sensitive", cfg.sensitive, "Sensitive feature name");
  app->add_option("--protected", cfg.protected_value, "Protected group code");
  app->add_option("--fair-weight", cfg.fair_weight, "Fairness weight in [0, 1]");
  app->add_option("--jobs", cfg.jobs, "Worker threads");
}

int CmdSynthesize(const RunConfig& cfg, std::ostream& out) {
  auto schema = LoadRunSchema(cfg);
  ValidateRunConfig(cfg, *schema);
  Dataset train = LoadCsv(cfg.input, schema);
  PipelineResult p = RunPipeline(cfg, train);
  MakeDir(cfg.out);
  WriteCsv(p.synthetic, cfg.out / "synthetic.csv");
  WriteJson(cfg.out / "ledger.json", WithConfig(cfg, "ledger", p.ledger));
  WriteJson(cfg.out / "model.json", WithConfig(cfg, "model", p.model));
  nlohmann::json report = WithConfig(cfg, "warnings", p.warnings);
  report["rows"] = p.synthetic.num_rows();
  WriteJson(cfg.out / "report.json", report);
  for (const std::string& w : p.warnings) out << "warning: " << w << "\n";
  out << "wrote " << p.synthetic.num_rows() << " rows to "
      << (cfg.out / "synthetic.csv").string() << "\n";
  return 0;
}

int CmdSage(const RunConfig& cfg, std::ostream& out) {
  auto schema = LoadRunSchema(cfg);
  ValidateRunConfig(cfg, *schema);
  Dataset train = LoadCsv(cfg.input, schema);
  const QuailConfig qc = cfg.ToQuail();
  BudgetLedger ledger(qc.epsilon);
  Allocation budget = ledger.Allocate("dpsage", qc.epsilon);
  RandomStream rng(cfg.seed, "sage");
  SageOutput s = DpSage(train, budget, qc.sage, qc.classifier, qc.synth, rng);

  nlohmann::json values = nlohmann::json::object();
  nlohmann::json stderrs = nlohmann::json::object();
  for (size_t i = 0; i < s.report.features.size(); ++i) {
    values[s.report.features[i]] = s.report.values[i];
    stderrs[s.report.features[i]] = s.report.standard_errors[i];
  }
  nlohmann::json split = nlohmann::json::object();
  for (const auto& e : ledger.entries()) {
    if (e.parent >= 0) split[e.label] = e.epsilon.ToString();
  }
  nlohmann::json report = WithConfig(cfg, "ranking", s.report.ranking);
  report["values"] = values;
  report["stderr"] = stderrs;
  report["epsilon_split"] = split;
  report["permutations"] = s.report.permutations;
  report["empty_loss"] = s.report.empty_loss;
  report["full_loss"] = s.report.full_loss;
  MakeDir(cfg.out);
  WriteJson(cfg.out / "report.json", report);
  WriteJson(cfg.out / "ledger.json", WithConfig(cfg, "ledger", ledger.ToJson()));
  for (size_t i = 0; i < s.report.ranking.size(); ++i) {
    out << i + 1 << ". " << s.report.ranking[i] << " "
        << s.report.Value(s.report.ranking[i]) << "\n";
  }
  return 0;
}

int CmdEvaluate(const RunConfig& cfg, std::ostream& out) {
  auto schema = LoadRunSchema(cfg);
  ValidateRunConfig(cfg, *schema);
  if (cfg.test.empty()) throw DataError("no test split given (--test)");
  Dataset train = LoadCsv(cfg.input, schema);
  Dataset test = LoadCsv(cfg.test, schema);
  std::vector<RunReport> reports = EvaluateRuns(cfg, train, test, cfg.jobs);
  WriteSummary(cfg.out, reports);
  Summary s = Aggregate(reports);
  const MetricSummary& acc = s.groups.at("overall").at("accuracy");
  out << "accuracy " << acc.mean << " +/- " << acc.stddev << " over "
      << s.runs << " runs\n";
  return 0;
}

int CmdGridsearch(const RunConfig& base, bool alpha_only, std::ostream& out) {
  auto schema = LoadRunSchema(base);
  if (base.test.empty()) throw DataError("no test split given (--test)");
  std::vector<RunConfig> cells = GridCells(base, alpha_only);
  // Cells whose beta exceeds the feature count are reported but not run.
  std::vector<char> runnable(cells.size(), 1);
  for (size_t c = 0; c < cells.size(); ++c) {
    try {
      ValidateRunConfig(cells[c], *schema);
    } catch (const ConfigError&) {
      if (cells[c].beta <= static_cast<int>(schema->num_features()) - 1) throw;
      runnable[c] = 0;
    }
  }
  Dataset train = LoadCsv(base.input, schema);
  Dataset test = LoadCsv(base.test, schema);

  std::vector<std::vector<RunReport>> results(cells.size());
  ParallelFor(cells.size(), base.jobs, [&](size_t c) {
    if (runnable[c]) results[c] = EvaluateRuns(cells[c], train, test, 1);
  });

  MakeDir(base.out);
  struct Row {
    size_t cell;
    double mean, stddev;
  };
  std::vector<Row> rows;
  for (size_t c = 0; c < cells.size(); ++c) {
    if (!runnable[c]) continue;
    WriteSummary(base.out / CellName(c), results[c]);
    Summary s = Aggregate(results[c]);
    const MetricSummary& acc = s.groups.at("overall").at("accuracy");
    rows.push_back({c, acc.mean, acc.stddev});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.mean > b.mean; });
  std::ostringstream csv;
  csv.precision(17);
  csv << "rank,cell,alpha,gamma,beta,mean_accuracy,stddev_accuracy,runs\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const RunConfig& c = cells[rows[i].cell];
    csv << i + 1 << ',' << CellName(rows[i].cell) << ',' << c.alpha << ','
        << c.gamma << ',' << c.beta << ',' << rows[i].mean << ','
        << rows[i].stddev << ',' << c.runs << '\n';
  }
  WriteText(base.out / "cells.csv", csv.str());
  nlohmann::json grid = {{"cells", cells.size()},
                         {"evaluated", rows.size()},
                         {"skipped", cells.size() - rows.size()}};
  if (!rows.empty()) {
    const RunConfig& best = cells[rows.front().cell];
    grid["best"] = {{"cell", CellName(rows.front().cell)},
                    {"config", best.ToJson()},
                    {"mean_accuracy", rows.front().mean},
                    {"stddev_accuracy", rows.front().stddev}};
  }
  WriteJson(base.out / "gridsearch.json", grid);
  out << cells.size() << " cells, " << rows.size() << " evaluated\n";
  if (!rows.empty()) {
    out << "best " << CellName(rows.front().cell) << " accuracy "
        << rows.front().mean << "\n";
  }
  return 0;
}

}  // namespace

Mode ParseMode(std::string_view text) {
  if (text == "real") return Mode::kReal;
  if (text == "marginal") return Mode::kMarginal;
  if (text == "sq") return Mode::kSq;
  if (text == "fsq-bal") return Mode::kFsqBal;
  if (text == "fsq-fnr") return Mode::kFsqFnr;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

std::string ModeName(Mode mode) {
  switch (mode) {
    case Mode::kReal: return "real";
    case Mode::kMarginal: return "marginal";
    case Mode::kSq: return "sq";
    case Mode::kFsqBal: return "fsq-bal";
    case Mode::kFsqFnr: return "fsq-fnr";
  }
  return "";
}

Epsilon ParseEpsilonArg(const std::string& text) {
  if (text == "inf" || text == "non-private") return Epsilon::NonPrivate();
  return Epsilon::Parse(text);
}

QuailConfig RunConfig::ToQuail() const {
  QuailConfig q;
  q.epsilon = ParseEpsilonArg(epsilon);
  q.alpha = alpha;
  q.beta = beta;
  q.samples = samples;
  q.seed = seed;
  q.classifier.lambda = lambda;
  q.classifier.max_iterations = max_iterations;
  q.synth.structure_fraction = structure_fraction;
  q.sage.gamma = gamma;
  q.sage.permutations = permutations;
  q.sage.imputation_draws = imputation_draws;
  q.sage.batch_size = batch_size;
  q.sage.imputation_pool = imputation_pool;
  q.sage.jobs = jobs;
  return q;
}

FairConfig RunConfig::ToFair() const {
  FairConfig f;
  f.quail = ToQuail();
  f.mode = mode == Mode::kFsqFnr ? FairMode::kFnr : FairMode::kBalanced;
  f.sensitive = sensitive;
  f.protected_value = protected_value;
  f.fairness_weight = fair_weight;
  f.accuracy_weight = 1.0 - fair_weight;
  return f;
}

nlohmann::json RunConfig::ToJson() const {
  nlohmann::json j;
  j["input"] = input.string();
  j["schema"] = schema.string();
  j["test"] = test.string();
  j["mode"] = ModeName(mode);
  j["epsilon"] = epsilon;
  j["eval_epsilon"] = eval_epsilon;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["gamma"] = gamma;
  j["samples"] = samples;
  j["seed"] = seed;
  j["lambda"] = lambda;
  j["max_iterations"] = max_iterations;
  j["permutations"] = permutations;
  j["imputation_draws"] = imputation_draws;
  j["batch_size"] = batch_size;
  j["imputation_pool"] = imputation_pool;
  j["structure_fraction"] = structure_fraction;
  j["sensitive"] = sensitive ? nlohmann::json(*sensitive) : nlohmann::json(nullptr);
  j["protected"] =
      protected_value ? nlohmann::json(*protected_value) : nlohmann::json(nullptr);
  j["fair_weight"] = fair_weight;
  j["runs"] = runs;
  return j;
}

std::shared_ptr<const Schema> LoadRunSchema(const RunConfig& cfg) {
  Schema schema = Schema::LoadFile(cfg.schema);
  if (cfg.sensitive) {
    std::optional<int> pv = cfg.protected_value;
    if (!pv && schema.sensitive_index() &&
        schema.feature(*schema.sensitive_index()).name == *cfg.sensitive &&
        schema.protected_level()) {
      pv = schema.feature(*schema.sensitive_index())
               .codes[static_cast<size_t>(*schema.protected_level())];
    }
    schema = schema.WithSensitive(*cfg.sensitive, pv);
  } else if (cfg.protected_value) {
    throw ConfigError("--protected needs --sensitive");
  }
  return std::make_shared<const Schema>(std::move(schema));
}

void ValidateRunConfig(const RunConfig& cfg, const Schema& schema) {
  if (cfg.runs < 1) throw ConfigError("runs must be at least 1");
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (cfg.samples < 1) throw ConfigError("samples must be at least 1");
  ParseEpsilonArg(cfg.eval_epsilon);
  FitConfig fit;
  fit.lambda = cfg.lambda;
  fit.max_iterations = cfg.max_iterations;
  fit.Validate();
  switch (cfg.mode) {
    case Mode::kReal:
      return;
    case Mode::kMarginal: {
      ParseEpsilonArg(cfg.epsilon);
      SynthConfig s;
      s.structure_fraction = cfg.structure_fraction;
      s.Validate();
      return;
    }
    case Mode::kSq:
      cfg.ToQuail().Validate(schema);
      return;
    case Mode::kFsqBal:
    case Mode::kFsqFnr:
      if (!cfg.sensitive) {
        throw ConfigError("mode " + ModeName(cfg.mode) + " needs --sensitive");
      }
      if (!(cfg.fair_weight >= 0 && cfg.fair_weight <= 1)) {
        throw ConfigError("fair weight must lie in [0, 1]");
      }
      cfg.ToFair().Validate(schema);
      return;
  }
}

PipelineResult RunPipeline(const RunConfig& cfg, const Dataset& train) {
  switch (cfg.mode) {
    case Mode::kReal: {
      BudgetLedger ledger(Epsilon::NonPrivate());
      return {train, ledger.ToJson(), nlohmann::json(nullptr), {}};
    }
    case Mode::kMarginal: {
      const Epsilon eps = ParseEpsilonArg(cfg.epsilon);
      BudgetLedger ledger(eps);
      Allocation budget = ledger.Allocate("synth", eps);
      SynthConfig sc;
      sc.structure_fraction = cfg.structure_fraction;
      RandomStream rng(cfg.seed, "marginal");
      RandomStream fit_rng = rng.Fork("fit");
      MarginalTree tree = FitSynth(train, budget, sc, fit_rng);
      RandomStream sample_rng = rng.Fork("sample");
      Dataset synthetic = Sample(tree, cfg.samples, sample_rng);
      return {std::move(synthetic), ledger.ToJson(), tree.ToJson(false), {}};
    }
    case Mode::kSq:
    case Mode::kFsqBal:
    case Mode::kFsqFnr: {
      QuailModel m = cfg.mode == Mode::kSq ? FitQuail(train, cfg.ToQuail())
                                           : FitFsq(train, cfg.ToFair());
      RandomStream rng(cfg.seed, "generate");
      Dataset synthetic = Generate(m, cfg.samples, rng);
      return {std::move(synthetic), m.ledger.ToJson(), m.ToJson(), m.warnings};
    }
  }
  throw ConfigError("unknown mode");
}

std::vector<RunConfig> GridCells(const RunConfig& base, bool alpha_only) {
  const std::vector<double> shares = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<RunConfig> cells;
  for (double a : shares) {
    if (alpha_only) {
      RunConfig c = base;
      c.alpha = a;
      cells.push_back(c);
      continue;
    }
    for (double g : shares) {
      for (int b : {2, 3, 4, 5}) {
        RunConfig c = base;
        c.alpha = a;
        c.gamma = g;
        c.beta = b;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Differentially private synthetic tabular data"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string mode = "sq";
  bool alpha_only = false;

  CLI::App* synth = app.add_subcommand("synthesize", "Write synthetic data");
  AddDataOptions(synth, cfg);
  AddModelOptions(synth, cfg, mode);

  CLI::App* sage = app.add_subcommand("sage", "Private feature importance");
  AddDataOptions(sage, cfg);
  AddModelOptions(sage, cfg, mode);

  CLI::App* eval = app.add_subcommand("evaluate", "Downstream accuracy over seeds");
  AddDataOptions(eval, cfg);
  AddModelOptions(eval, cfg, mode);
  eval->add_option("--test", cfg.test, "Held-out real CSV");
  eval->add_option("--runs", cfg.runs, "Seeds to run");
  eval->add_option("--eval-epsilon", cfg.eval_epsilon, "Budget of the evaluation classifier");

  CLI::App* grid = app.add_subcommand("gridsearch", "Sweep alpha, gamma and beta");
  AddDataOptions(grid, cfg);
  AddModelOptions(grid, cfg, mode);
  grid->add_option("--test", cfg.test, "Held-out real CSV");
  grid->add_option("--runs", cfg.runs, "Seeds per cell");
  grid->add_option("--eval-epsilon", cfg.eval_epsilon);
  grid->add_flag("--alpha-only", alpha_only, "Sweep alpha only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    cfg.mode = ParseMode(mode);
    if (synth->parsed()) return CmdSynthesize(cfg, out);
    if (sage->parsed()) return CmdSage(cfg, out);
    if (eval->parsed()) return CmdEvaluate(cfg, out);
    return CmdGridsearch(cfg, alpha_only, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 2;
  } catch (const BudgetError& e) {
    err << "budget error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace quail
