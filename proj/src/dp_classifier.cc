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

#include "quail/dp_classifier.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "quail/errors.h"

namespace quail {

namespace {

// Upper bound on the logistic loss curvature.
constexpr double kLossCurvature = 0.25;

double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double MaxAbs(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// Draws b with density proportional to exp(-(eps/2) |b|): a uniform direction
// with a Gamma(dim, 2/eps) norm. Integer shape, so the norm is a sum of
// exponentials.
std::vector<double> SamplePerturbation(size_t dim, double eps, RandomStream& rng) {
  std::vector<double> b(dim);
  double sq = 0;
  for (double& x : b) {
    x = rng.StandardNormal();
    sq += x * x;
  }
  double norm = 0;
  for (size_t i = 0; i < dim; ++i) norm -= std::log(rng.Uniform());
  norm *= 2.0 / eps;
  double inv = norm / std::sqrt(sq);
  for (double& x : b) x *= inv;
  return b;
}

}  // namespace

void FitConfig::Validate() const {
  if (!(lambda > 0) || !std::isfinite(lambda)) {
    throw ConfigError("regularization lambda must be positive");
  }
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(tolerance > 0)) throw ConfigError("tolerance must be positive");
}

double Logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

LogitTask TaskForFeature(const Schema& schema, size_t target) {
  LogitTask task;
  task.target = target;
  const Feature& f = schema.feature(target);
  if (target == schema.target_index() && schema.positive_level()) {
    task.positive_level = *schema.positive_level();
  } else if (f.num_levels() == 2) {
    task.positive_level = 1;
  } else {
    throw ConfigError("feature '" + f.name +
                      "' is not binary and has no declared positive value");
  }
  for (size_t i = 0; i < schema.num_features(); ++i) {
    if (i != target) task.inputs.push_back(i);
  }
  return task;
}

// -------------------------------------------------------------- LogitLayout

LogitLayout::LogitLayout(const Schema& schema, std::span<const size_t> inputs)
    : num_schema_features_(schema.num_features()) {
  size_t offset = 1;
  for (size_t f : inputs) {
    if (f >= schema.num_features()) throw std::out_of_range("input feature");
    size_t k = schema.feature(f).num_levels();
    blocks_.push_back(Block{f, k, offset});
    offset += k - 1;
  }
  num_columns_ = offset;
  row_scale_ = 1.0 / std::sqrt(static_cast<double>(inputs.size() + 1));
}

// ----------------------------------------------------------- LogitObjective

LogitObjective::LogitObjective(const Dataset& d, const LogitTask& task,
                               const LogitLayout& layout, double lambda,
                               std::vector<double> perturbation,
                               double extra_ridge)
    : dim_(layout.num_columns()),
      n_(d.num_rows()),
      active_per_row_(layout.blocks().size()),
      scale_(layout.row_scale()),
      ridge_(lambda / static_cast<double>(d.num_rows()) + extra_ridge),
      perturbation_(std::move(perturbation)) {
  if (perturbation_.empty()) perturbation_.assign(dim_, 0.0);
  if (perturbation_.size() != dim_) {
    throw std::invalid_argument("perturbation dimension mismatch");
  }
  active_.reserve(n_ * active_per_row_);
  labels_.reserve(n_);
  for (size_t r = 0; r < n_; ++r) {
    for (const auto& b : layout.blocks()) {
      active_.push_back(layout.Column(b, d.at(r, b.feature)));
    }
    labels_.push_back(d.at(r, task.target) == task.positive_level ? 1.0 : -1.0);
  }
}

double LogitObjective::Value(std::span<const double> w) const {
  double loss = 0;
  for (size_t r = 0; r < n_; ++r) {
    double z = w[0];
    const long* a = active_.data() + r * active_per_row_;
    for (size_t k = 0; k < active_per_row_; ++k) {
      if (a[k] >= 0) z += w[a[k]];
    }
    loss += Softplus(-labels_[r] * scale_ * z);
  }
  const double n = static_cast<double>(n_);
  return loss / n + 0.5 * ridge_ * Dot(w, w) + Dot(perturbation_, w) / n;
}

double LogitObjective::ValueAndGradient(std::span<const double> w,
                                        std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0;
  for (size_t r = 0; r < n_; ++r) {
    double z = w[0];
    const long* a = active_.data() + r * active_per_row_;
    for (size_t k = 0; k < active_per_row_; ++k) {
      if (a[k] >= 0) z += w[a[k]];
    }
    const double margin = labels_[r] * scale_ * z;
    loss += Softplus(-margin);
    // d/dw of log(1 + exp(-y s z)) = -y s sigma(-y s z) * x_raw
    const double g = -labels_[r] * scale_ * Logistic(-margin);
    grad[0] += g;
    for (size_t k = 0; k < active_per_row_; ++k) {
      if (a[k] >= 0) grad[a[k]] += g;
    }
  }
  const double n = static_cast<double>(n_);
  for (size_t j = 0; j < dim_; ++j) {
    grad[j] = grad[j] / n + ridge_ * w[j] + perturbation_[j] / n;
  }
  return loss / n + 0.5 * ridge_ * Dot(w, w) + Dot(perturbation_, w) / n;
}

// ------------------------------------------------------------------- Fitting

namespace {

struct Minimum {
  std::vector<double> w;
  bool converged = false;
  int iterations = 0;
};

// Full-batch gradient descent. Each step starts from a Barzilai-Borwein
// estimate and backtracks until the Armijo condition holds.
Minimum Minimize(const LogitObjective& obj, const FitConfig& cfg) {
  const size_t dim = obj.dimension();
  Minimum out;
  out.w.assign(dim, 0.0);
  std::vector<double> grad(dim), w_new(dim), grad_new(dim);
  double f = obj.ValueAndGradient(out.w, grad);
  double step = 1.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.iterations = it;
    if (MaxAbs(grad) <= cfg.tolerance) {
      out.converged = true;
      return out;
    }
    const double gg = Dot(grad, grad);
    double t = step;
    double f_new = 0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (size_t j = 0; j < dim; ++j) w_new[j] = out.w[j] - t * grad[j];
      f_new = obj.ValueAndGradient(w_new, grad_new);
      if (f_new <= f - 1e-4 * t * gg) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no further descent at machine precision
    double ss = 0, sy = 0;
    for (size_t j = 0; j < dim; ++j) {
      double s = w_new[j] - out.w[j];
      ss += s * s;
      sy += s * (grad_new[j] - grad[j]);
    }
    step = sy > 0 ? std::clamp(ss / sy, 1e-8, 1e8) : std::min(2 * t, 1e8);
    out.w.swap(w_new);
    grad.swap(grad_new);
    f = f_new;
  }
  out.iterations = cfg.max_iterations;
  out.converged = MaxAbs(grad) <= cfg.tolerance;
  return out;
}

}  // namespace

LogitModel FitDpLogit(const Dataset& d, const LogitTask& task,
                      Allocation& budget, const FitConfig& cfg,
                      RandomStream& rng) {
  cfg.Validate();
  const Schema& schema = d.schema();
  if (task.target >= schema.num_features()) {
    throw std::out_of_range("logit target index");
  }
  const Feature& target = schema.feature(task.target);
  if (task.positive_level < 0 ||
      static_cast<size_t>(task.positive_level) >= target.num_levels()) {
    throw ConfigError("positive level outside domain of '" + target.name + "'");
  }
  if (target.num_levels() < 2) {
    throw ConfigError("target '" + target.name + "' has a single level");
  }
  if (d.num_rows() < 2) throw DataError("logistic fit needs at least 2 rows");
  for (size_t f : task.inputs) {
    if (f == task.target) throw ConfigError("target listed among its own inputs");
  }

  const Epsilon eps = budget.Consume();
  LogitLayout layout(schema, task.inputs);
  const size_t dim = layout.num_columns();
  const double n = static_cast<double>(d.num_rows());

  std::vector<double> perturbation;
  double extra_ridge = 0;
  if (!eps.is_non_private()) {
    const double e = eps.value();
    const double reg = cfg.lambda / n;
    const double c = kLossCurvature;
    double eps_prime =
        e - std::log(1 + 2 * c / (n * reg) + c * c / (n * n * reg * reg));
    if (eps_prime <= 0) {
      extra_ridge = c / (n * std::expm1(e / 4)) - reg;
      eps_prime = e / 2;
    }
    perturbation = SamplePerturbation(dim, eps_prime, rng);
  }

  LogitObjective objective(d, task, layout, cfg.lambda, std::move(perturbation),
                           extra_ridge);
  Minimum min = Minimize(objective, cfg);

  LogitModel m;
  m.target = task.target;
  m.target_name = target.name;
  m.positive_level = task.positive_level;
  m.negative_level = task.positive_level == 0 ? 1 : 0;
  m.layout = layout;
  m.coefficients.resize(dim);
  for (size_t j = 0; j < dim; ++j) {
    m.coefficients[j] = min.w[j] * layout.row_scale();
  }
  m.epsilon_spent = eps;
  m.converged = min.converged;
  m.iterations = min.iterations;
  return m;
}

LogitModel FitDpLogit(const Dataset& d, std::string_view target,
                      Allocation& budget, const FitConfig& cfg,
                      RandomStream& rng) {
  const size_t t = d.schema().RequireIndex(target);
  return FitDpLogit(d, TaskForFeature(d.schema(), t), budget, cfg, rng);
}

// ---------------------------------------------------------------- Prediction

double PredictScore(const LogitModel& m, std::span<const int> row) {
  if (row.size() != m.layout.num_schema_features() ||
      m.coefficients.size() != m.layout.num_columns()) {
    throw std::invalid_argument("row layout does not match model '" +
                                m.target_name + "'");
  }
  double z = m.coefficients[0];
  for (const auto& b : m.layout.blocks()) {
    long c = m.layout.Column(b, row[b.feature]);
    if (c >= 0) z += m.coefficients[c];
  }
  return z;
}

double PredictProba(const LogitModel& m, std::span<const int> row) {
  return Logistic(PredictScore(m, row));
}

int PredictLabel(const LogitModel& m, std::span<const int> row, double p) {
  if (!(p > 0 && p < 1)) {
    throw std::invalid_argument("threshold must lie in (0, 1)");
  }
  return PredictProba(m, row) >= p ? m.positive_level : m.negative_level;
}

// ---------------------------------------------------------------------- JSON

nlohmann::json LogitModel::ToJson(const Schema& schema) const {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& b : layout.blocks()) {
    const Feature& f = schema.feature(b.feature);
    nlohmann::json cols = nlohmann::json::object();
    for (size_t level = 1; level < b.num_levels; ++level) {
      cols[std::to_string(f.codes[level])] = b.offset + level - 1;
    }
    inputs.push_back({{"feature", f.name},
                      {"reference_code", f.codes[0]},
                      {"columns", std::move(cols)}});
  }
  const Feature& t = schema.feature(target);
  nlohmann::json j;
  j["target"] = t.name;
  j["positive_code"] = t.codes[positive_level];
  j["negative_code"] = t.codes[negative_level];
  j["inputs"] = std::move(inputs);
  j["coefficients"] = coefficients;
  j["epsilon_spent"] = epsilon_spent.is_non_private()
                           ? nlohmann::json("non-private")
                           : nlohmann::json(epsilon_spent.value());
  j["converged"] = converged;
  j["iterations"] = iterations;
  return j;
}

LogitModel LogitModel::FromJson(const nlohmann::json& j, const Schema& schema) {
  try {
    LogitModel m;
    m.target = schema.RequireIndex(j.at("target").get<std::string>());
    m.target_name = schema.feature(m.target).name;
    const Feature& t = schema.feature(m.target);
    auto pos = t.LevelOfCode(j.at("positive_code").get<int>());
    auto neg = t.LevelOfCode(j.at("negative_code").get<int>());
    if (!pos || !neg) throw ConfigError("model codes outside target domain");
    m.positive_level = *pos;
    m.negative_level = *neg;
    std::vector<size_t> inputs;
    for (const auto& in : j.at("inputs")) {
      inputs.push_back(schema.RequireIndex(in.at("feature").get<std::string>()));
    }
    m.layout = LogitLayout(schema, inputs);
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    if (m.coefficients.size() != m.layout.num_columns()) {
      throw ConfigError("model coefficient count does not match its layout");
    }
    const auto& e = j.at("epsilon_spent");
    m.epsilon_spent = e.is_string() ? Epsilon::NonPrivate()
                                    : Epsilon::FromDouble(e.get<double>());
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", 0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model JSON: ") + e.what());
  }
}

// --------------------------------------------------------- FeatureClassifier

int FeatureClassifier::PredictLevel(std::span<const int> row) const {
  if (models.size() == 1) {
    return PredictLabel(models[0], row, 0.5);
  }
  int best = 0;
  double best_p = -1;
  for (const LogitModel& m : models) {
    double p = PredictProba(m, row);
    if (p > best_p) {
      best_p = p;
      best = m.positive_level;
    }
  }
  return best;
}

nlohmann::json FeatureClassifier::ToJson(const Schema& schema) const {
  nlohmann::json models_json = nlohmann::json::array();
  for (const auto& m : models) models_json.push_back(m.ToJson(schema));
  return {{"feature", schema.feature(feature).name},
          {"models", std::move(models_json)}};
}

FeatureClassifier FitFeatureClassifier(const Dataset& d, size_t feature,
                                       Allocation& budget, const FitConfig& cfg,
                                       RandomStream& rng) {
  const Schema& schema = d.schema();
  const Feature& f = schema.feature(feature);
  FeatureClassifier out;
  out.feature = feature;
  LogitTask task;
  task.target = feature;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    if (i != feature) task.inputs.push_back(i);
  }
  if (f.num_levels() == 2) {
    task.positive_level = 1;
    out.models.push_back(FitDpLogit(d, task, budget, cfg, rng));
    return out;
  }
  if (f.num_levels() < 2) {
    throw ConfigError("feature '" + f.name + "' has a single level");
  }
  std::vector<std::string> labels;
  for (int code : f.codes) labels.push_back("level=" + std::to_string(code));
  std::vector<Allocation> parts = budget.Divide(labels);
  for (size_t level = 0; level < f.num_levels(); ++level) {
    task.positive_level = static_cast<int>(level);
    RandomStream sub = rng.Fork("ovr", level);
    out.models.push_back(FitDpLogit(d, task, parts[level], cfg, sub));
  }
  return out;
}

}  // namespace quail
