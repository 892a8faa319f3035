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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "quail/cli.h"
#include "quail/dp_classifier.h"
#include "quail/dp_core.h"
#include "quail/dpsage.h"
#include "quail/eval.h"
#include "quail/fairquail.h"
#include "quail/marginal_synth.h"
#include "quail/superquail.h"
#include "quail/tabular.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace quail {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

// 1. Every closed ledger spends exactly epsilon, and the spend splits as
// sum(feature classifiers) + synth + target classifier(s).
Outcome Composition() {
  testing::FairFixture fx;
  fx.protected_share = 0.3;
  const Dataset d = testing::SampleFairFixture(fx, 200, 1);
  RandomStream rng(2024, "composition");
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const int mode = static_cast<int>(rng.UniformIndex(3));
    QuailConfig qc;
    qc.epsilon = Epsilon::FromMicros(1 + static_cast<int64_t>(rng.UniformIndex(20'000'000)));
    qc.alpha = 0.02 + 0.96 * rng.Uniform();
    qc.sage.gamma = 0.02 + 0.96 * rng.Uniform();
    qc.beta = 1 + static_cast<int>(rng.UniformIndex(4));
    qc.seed = i;
    qc.samples = 40;
    qc.sage.permutations = 1;
    qc.sage.imputation_draws = 1;
    qc.sage.batch_size = 16;
    qc.sage.imputation_pool = 16;
    qc.classifier.max_iterations = 50;
    QuailModel m;
    if (mode == 0) {
      m = FitQuail(d, qc);
    } else {
      FairConfig fc;
      fc.quail = qc;
      fc.mode = mode == 1 ? FairMode::kBalanced : FairMode::kFnr;
      m = FitFsq(d, fc);
    }
    int64_t parts = 0;
    for (const auto& e : m.ledger.entries()) {
      const bool leaf = e.state == BudgetLedger::State::kConsumed;
      if (leaf && e.parent >= 0) parts += e.epsilon.micros();
    }
    if (!m.ledger.IsClosed() || m.ledger.spent_micros() != qc.epsilon.micros() ||
        parts != qc.epsilon.micros()) {
      ++bad;
    }
  }
  return {bad == 0, Fmt("%.0f/100 configs off", bad)};
}

// 2. Laplace draws against the analytic CDF, and the density ratio of noisy
// counts on neighbouring inputs.
Outcome Mechanism() {
  constexpr size_t kDraws = 100000;
  RandomStream rng(7, "laplace");
  std::vector<double> x(kDraws);
  for (double& v : x) v = LaplaceNoise(1.0, rng);
  const double ks = testing::KsStatistic(x, [](double t) { return LaplaceCdf(t, 1.0); });
  const double crit = testing::KsCritical(kDraws, 0.001);

  const Epsilon eps = Epsilon::FromDouble(1.0);
  RandomStream ra(8, "count_a"), rb(9, "count_b");
  std::vector<double> a(kDraws), b(kDraws);
  for (double& v : a) v = NoisyCount(100, eps, ra);
  for (double& v : b) v = NoisyCount(101, eps, rb);
  // Three standard errors of slack per bin; bins need 200 draws each.
  const double ratio = testing::MaxLogDensityRatio(a, b, 94, 107, 0.5, 200, 3.0);
  return {ks <= crit && ratio <= 1.0,
          Fmt("KS %.5f <= %.5f, max log ratio %.3f <= 1", ks, crit, ratio)};
}

SageOutput RunSage(const Dataset& d, Epsilon eps, uint64_t seed, int permutations) {
  BudgetLedger ledger(eps);
  Allocation a = ledger.Allocate("dpsage", eps);
  SageConfig cfg;
  if (permutations > 0) cfg.permutations = permutations;
  RandomStream rng(seed, "sage");
  return DpSage(d, a, cfg, FitConfig{}, SynthConfig{}, rng);
}

// 3. Non-private estimate against exhaustive-subset SAGE.
Outcome SageOracle() {
  const testing::IndependentLogit f = testing::PlantedImportance();
  const std::vector<double> exact = testing::ExactSage(f);
  const Dataset d = testing::SampleIndependentLogit(f, 20000, 1);
  const ImportanceReport r = RunSage(d, Epsilon::NonPrivate(), 1, 0).report;
  double worst = 0;
  for (size_t i = 0; i < exact.size(); ++i) {
    worst = std::max(worst, std::abs(r.values[i] - exact[i]));
  }
  return {worst <= 0.02, Fmt("max |error| %.4f <= 0.02", worst)};
}

// 4. Top-2 Jaccard against non-private SAGE on the same data.
Outcome RankingTrend() {
  const testing::IndependentLogit f = testing::PlantedImportance();
  std::vector<double> means;
  for (double k : {0.0, 2.0, 3.0, 4.0}) {
    double sum = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      const Dataset d = testing::SampleIndependentLogit(f, 2000, 1000 + seed);
      const ImportanceReport ref = RunSage(d, Epsilon::NonPrivate(), seed, 64).report;
      const ImportanceReport dp =
          RunSage(d, Epsilon::FromDouble(std::exp(k)), seed, 64).report;
      sum += RankingSimilarity(dp, ref, 2).jaccard;
    }
    means.push_back(sum / 20);
  }
  bool pass = means[2] >= 0.8 && means[3] >= 0.8;
  for (size_t i = 1; i < means.size(); ++i) pass = pass && means[i] >= means[i - 1];
  return {pass, Fmt("mean Jaccard %.3f, %.3f, %.3f, %.3f", means[0], means[1],
                    means[2], means[3])};
}

// 5. Downstream accuracy, SQ output against the raw marginal synthesizer.
Outcome SqAdvantage() {
  const Epsilon eps = Epsilon::Parse("e^3");
  double sq_sum = 0, mg_sum = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset train = testing::SampleMajorityFixture(5000, 0.1, seed);
    const Dataset test = testing::SampleMajorityFixture(20000, 0.1, 100 + seed);
    QuailConfig qc;
    qc.epsilon = eps;
    qc.beta = 2;
    qc.samples = 5000;
    qc.seed = seed;
    const QuailModel m = FitQuail(train, qc);
    RandomStream gen(seed, "generate");
    const Dataset sq = Generate(m, 5000, gen);

    BudgetLedger ledger(eps);
    Allocation a = ledger.Allocate("synth", eps);
    RandomStream mg_rng(seed, "marginal");
    RandomStream fit_rng = mg_rng.Fork("fit"), sample_rng = mg_rng.Fork("sample");
    const MarginalTree tree = FitSynth(train, a, SynthConfig{}, fit_rng);
    const Dataset mg = Sample(tree, 5000, sample_rng);

    RandomStream e1(seed, "evaluate"), e2(seed, "evaluate");
    sq_sum += Evaluate(sq, test, eps, FitConfig{}, e1).metrics[0].accuracy;
    mg_sum += Evaluate(mg, test, eps, FitConfig{}, e2).metrics[0].accuracy;
  }
  const double lift = (sq_sum - mg_sum) / 10;
  return {lift >= 0.05, Fmt("SQ %.3f vs marginal %.3f, lift %.3f >= 0.05",
                            sq_sum / 10, mg_sum / 10, lift)};
}

struct FairRun {
  double fnr_a = 0, fnr_b = 0;
};

FairRun ScoreFair(const QuailModel& m, const Dataset& test, uint64_t seed) {
  RandomStream gen(seed, "generate");
  const Dataset syn = Generate(m, 10000, gen);
  RandomStream ev(seed, "evaluate");
  const RunReport r = Evaluate(syn, test, Epsilon::Parse("e^3"), FitConfig{}, ev);
  FairRun out;
  for (const GroupMetrics& g : r.metrics) {
    if (g.group == "g=0") out.fnr_a = g.fnr.value_or(NAN);
    if (g.group == "g=1") out.fnr_b = g.fnr.value_or(NAN);
  }
  return out;
}

// 6 and 7 share their fits.
struct FairResults {
  double sq_a = 0, sq_b = 0, bal_a = 0, bal_b = 0;
  int fnr_dominates = 0;
  bool tuning_monotone = true;
};

const FairResults& Fair() {
  static const FairResults results = [] {
    FairResults r;
    const testing::FairFixture fx;
    const Epsilon eps = Epsilon::Parse("e^3");
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      const Dataset train = testing::SampleFairFixture(fx, 10000, seed);
      const Dataset test = testing::SampleFairFixture(fx, 40000, 100 + seed);
      QuailConfig qc;
      qc.epsilon = eps;
      qc.beta = 1;
      qc.samples = 10000;
      qc.seed = seed;
      const FairRun sq = ScoreFair(FitQuail(train, qc), test, seed);
      FairConfig fc;
      fc.quail = qc;
      fc.mode = FairMode::kBalanced;
      const FairRun bal = ScoreFair(FitFsq(train, fc), test, seed);
      fc.mode = FairMode::kFnr;
      const QuailModel fnr_model = FitFsq(train, fc);
      const FairRun fnr = ScoreFair(fnr_model, test, seed);
      r.sq_a += sq.fnr_a / 10;
      r.sq_b += sq.fnr_b / 10;
      r.bal_a += bal.fnr_a / 10;
      r.bal_b += bal.fnr_b / 10;
      r.fnr_dominates += fnr.fnr_b <= sq.fnr_b;

      // Recompute the tuning result on the model's own tuning batch.
      RandomStream rng(seed, "fit_fsq");
      RandomStream tune = rng.Fork("tuning");
      RandomStream ts = tune.Fork("synth"), to = tune.Fork("order");
      const Dataset batch =
          Refine(fnr_model, Sample(fnr_model.synth, qc.samples, ts), to, false);
      const ThresholdResult tr = TuneThreshold(fnr_model, batch, fc);
      r.tuning_monotone = r.tuning_monotone && tr.threshold == fnr_model.threshold &&
                          tr.penalty <= tr.baseline_penalty;
    }
    return r;
  }();
  return results;
}

Outcome FairGap() {
  const FairResults& r = Fair();
  const double sq_gap = std::abs(r.sq_a - r.sq_b), bal_gap = std::abs(r.bal_a - r.bal_b);
  return {bal_gap <= 0.03 && sq_gap >= 0.08,
          Fmt("FNR gap SQ %.3f >= 0.08, FSQ-Bal %.3f <= 0.03", sq_gap, bal_gap)};
}

Outcome FnrDominance() {
  const FairResults& r = Fair();
  return {r.fnr_dominates >= 9 && r.tuning_monotone,
          Fmt("%.0f/10 runs, tuning batch monotone %.0f", r.fnr_dominates,
              r.tuning_monotone)};
}

// 8. Coefficients approach the non-private fit as epsilon grows.
Outcome ZeroNoiseLimit() {
  const Dataset d = testing::SampleIndependentLogit(testing::PlantedImportance(), 5000, 9);
  const std::vector<double> ref = testing::NewtonLogit(d, 1.0);
  std::vector<double> means;
  for (int k : {0, 2, 3, 4, -1}) {
    const Epsilon e = k < 0 ? Epsilon::NonPrivate() : Epsilon::FromDouble(std::exp(k));
    double sum = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      BudgetLedger ledger(e);
      Allocation a = ledger.Allocate("classifier", e);
      RandomStream rng(seed, "classifier");
      const LogitModel m = FitDpLogit(d, "y", a, FitConfig{}, rng);
      double dist = 0;
      for (size_t i = 0; i < ref.size(); ++i) {
        dist = std::max(dist, std::abs(ref[i] - m.coefficients[i]));
      }
      sum += dist / 20;
    }
    means.push_back(sum);
  }
  bool monotone = true;
  for (size_t i = 1; i < means.size(); ++i) monotone = monotone && means[i] <= means[i - 1];

  // Gradient against central differences at a random point.
  const Dataset small = testing::SampleIndependentLogit(testing::PlantedImportance(), 400, 2);
  const LogitTask task = TaskForFeature(small.schema(), small.schema().target_index());
  const LogitLayout layout(small.schema(), task.inputs);
  RandomStream rng(5, "gradient");
  std::vector<double> b(layout.num_columns()), w(layout.num_columns());
  for (double& v : b) v = rng.StandardNormal() * 3;
  for (double& v : w) v = rng.StandardNormal();
  const LogitObjective obj(small, task, layout, 1.0, b, 0.01);
  std::vector<double> grad(w.size());
  obj.ValueAndGradient(w, grad);
  double worst = 0;
  for (size_t j = 0; j < w.size(); ++j) {
    std::vector<double> up = w, down = w;
    up[j] += 1e-5;
    down[j] -= 1e-5;
    const double fd = (obj.Value(up) - obj.Value(down)) / 2e-5;
    worst = std::max(worst, std::abs(fd - grad[j]) / std::max(std::abs(grad[j]), 1e-3));
  }
  return {monotone && means.back() <= 1e-3 && worst <= 1e-5,
          Fmt("mean distance e^0 %.4f .. e^4 %.5f, sentinel %.1e; gradient rel %.1e",
              means[0], means[3], means[4], worst)};
}

std::string CsvBytes(const Dataset& d) {
  std::ostringstream out;
  WriteCsv(d, out);
  return out.str();
}

// 9. Same inputs give the same bytes; serializations round-trip.
Outcome Determinism() {
  const Dataset train = testing::SampleFairFixture(testing::FairFixture{}, 3000, 5);
  RunConfig cfg;
  cfg.epsilon = "1";
  cfg.samples = 2000;
  cfg.seed = 11;
  cfg.permutations = 32;
  cfg.sensitive = "g";
  cfg.protected_value = 1;
  bool identical = true;
  for (Mode mode : {Mode::kMarginal, Mode::kSq, Mode::kFsqBal, Mode::kFsqFnr}) {
    cfg.mode = mode;
    const PipelineResult a = RunPipeline(cfg, train);
    const PipelineResult b = RunPipeline(cfg, train);
    identical = identical && CsvBytes(a.synthetic) == CsvBytes(b.synthetic) &&
                a.model.dump() == b.model.dump() && a.ledger.dump() == b.ledger.dump();
  }

  bool round_trips = true;
  std::istringstream in(CsvBytes(train));
  round_trips = round_trips && ParseCsv(in, train.schema_ptr()) == train;
  const Schema census = *testing::CensusSchema();
  round_trips = round_trips && Schema::FromJson(census.ToJson()) == census;
  const Dataset census_rows = testing::SampleCensusLike(500, 3);
  std::istringstream census_in(CsvBytes(census_rows));
  round_trips = round_trips && ParseCsv(census_in, census_rows.schema_ptr()) == census_rows;

  QuailConfig qc;
  qc.samples = 100;
  qc.sage.permutations = 16;
  const QuailModel m = FitQuail(train, qc);
  const nlohmann::json target = m.target->models[0].ToJson(*m.schema);
  round_trips = round_trips &&
                LogitModel::FromJson(target, *m.schema).ToJson(*m.schema) == target;
  round_trips = round_trips &&
                ImportanceReport::FromJson(m.importance.ToJson()).ToJson() ==
                    m.importance.ToJson();
  RandomStream ev(3, "evaluate");
  const RunReport report = Evaluate(train, train, Epsilon::Parse("e^3"), FitConfig{}, ev,
                                    cfg.ToJson());
  round_trips = round_trips && RunReport::FromJson(report.ToJson()).ToJson() == report.ToJson();
  return {identical && round_trips,
          Fmt("byte-identical %.0f, round-trips %.0f", identical, round_trips)};
}

// 10. Confusion identities on random fixtures plus the degenerate predictor.
Outcome MetricArithmetic() {
  auto schema = testing::BinarySchema({"g"}, "g", 1);
  RandomStream rng(10, "metrics");
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const size_t n = 1 + rng.UniformIndex(300);
    const double base = rng.Uniform(), share = rng.Uniform(), hit = rng.Uniform();
    std::vector<int> levels, predicted;
    for (size_t r = 0; r < n; ++r) {
      const int y = rng.Uniform() < base;
      levels.insert(levels.end(), {rng.Uniform() < share, y});
      predicted.push_back(rng.Uniform() < hit ? y : 1 - y);
    }
    const Dataset test(schema, levels);
    const std::vector<GroupMetrics> m = ComputeMetrics(test, predicted, 1, size_t{0});
    double weighted = 0;
    Confusion sum;
    bool ok = m[0].confusion.total() == static_cast<int64_t>(n);
    for (size_t k = 0; k < m.size(); ++k) {
      const Confusion& c = m[k].confusion;
      const double support = static_cast<double>(c.total());
      const double correct = m[k].accuracy * support;
      ok = ok && std::abs(correct - std::round(correct)) <= 1e-12 * support &&
           std::abs(m[k].accuracy - static_cast<double>(c.tp + c.tn) / support) <= 1e-12;
      if (c.tp + c.fn > 0) {
        ok = ok && m[k].fnr && std::abs(*m[k].fnr - double(c.fn) / double(c.fn + c.tp)) <= 1e-12;
      } else {
        ok = ok && !m[k].fnr;
      }
      if (c.fp + c.tn > 0) {
        ok = ok && m[k].fpr && std::abs(*m[k].fpr - double(c.fp) / double(c.fp + c.tn)) <= 1e-12;
      } else {
        ok = ok && !m[k].fpr;
      }
      if (k > 0) {
        weighted += m[k].accuracy * support;
        sum.tp += c.tp;
        sum.fp += c.fp;
        sum.tn += c.tn;
        sum.fn += c.fn;
      }
    }
    ok = ok && std::abs(weighted / static_cast<double>(n) - m[0].accuracy) <= 1e-12 &&
         sum.tp == m[0].confusion.tp && sum.fp == m[0].confusion.fp &&
         sum.tn == m[0].confusion.tn && sum.fn == m[0].confusion.fn;
    bad += !ok;
  }

  std::vector<int> levels, all_positive(1000, 1);
  for (int r = 0; r < 1000; ++r) levels.insert(levels.end(), {r % 3 == 0, r < 456});
  const GroupMetrics overall =
      ComputeMetrics(Dataset(schema, levels), all_positive, 1, size_t{0})[0];
  const bool degenerate = overall.accuracy == 0.456 && overall.fnr == 0.0 && overall.fpr == 1.0;
  return {bad == 0 && degenerate,
          Fmt("%.0f/1000 fixtures off, all-positive accuracy %.3f fnr %.0f fpr %.0f", bad,
              overall.accuracy, overall.fnr.value_or(NAN), overall.fpr.value_or(NAN))};
}

struct Criterion {
  int id;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace quail

int main() {
  using quail::Criterion;
  // Criteria 6 and 7 share one set of fits, so 6 carries their cost.
  const std::vector<Criterion> criteria = {
      {1, 1, quail::Composition},       {2, 30, quail::Mechanism},
      {3, 60, quail::SageOracle},       {4, 300, quail::RankingTrend},
      {5, 600, quail::SqAdvantage},     {6, 600, quail::FairGap},
      {7, 600, quail::FnrDominance},    {8, 120, quail::ZeroNoiseLimit},
      {9, 60, quail::Determinism},      {10, 1, quail::MetricArithmetic},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    quail::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %d %s (%s; %.2fs of %.0fs)\n", c.id, pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds, c.budget_seconds);
    std::fflush(stdout);
  }
  return failures;
}
