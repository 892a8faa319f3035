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

#include "quail/dp_core.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "quail/errors.h"

namespace quail {

namespace {

constexpr double kMicros = static_cast<double>(Epsilon::kMicrosPerUnit);

uint64_t Mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t HashString(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Mix64(h);
}

std::string FormatMicros(int64_t micros) {
  std::ostringstream out;
  out << micros / Epsilon::kMicrosPerUnit << '.';
  std::string frac = std::to_string(micros % Epsilon::kMicrosPerUnit);
  out << std::string(6 - frac.size(), '0') << frac;
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------- Epsilon

Epsilon Epsilon::FromDouble(double value) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw ConfigError("epsilon must be positive and finite, got " +
                      std::to_string(value));
  }
  long double scaled = static_cast<long double>(value) * kMicros;
  if (scaled >= static_cast<long double>(std::numeric_limits<int64_t>::max())) {
    throw ConfigError("epsilon too large: " + std::to_string(value));
  }
  // Tolerate representation error just below an integer micro count.
  auto micros = static_cast<int64_t>(std::floor(scaled + 1e-6L));
  if (micros < 1) {
    throw ConfigError("epsilon below resolution of 1e-6: " +
                      std::to_string(value));
  }
  return Epsilon(micros, false);
}

Epsilon Epsilon::FromMicros(int64_t micros) {
  if (micros < 1) {
    throw ConfigError("epsilon micros must be positive");
  }
  return Epsilon(micros, false);
}

Epsilon Epsilon::NonPrivate() { return Epsilon(0, true); }

Epsilon Epsilon::Parse(std::string_view text) {
  auto parse_double = [](std::string_view s) {
    std::string buf(s);
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(buf, &used);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse epsilon '" + buf + "'");
    }
    if (used != buf.size()) {
      throw ConfigError("cannot parse epsilon '" + buf + "'");
    }
    return v;
  };
  if (text.size() > 2 && (text[0] == 'e' || text[0] == 'E') && text[1] == '^') {
    return FromDouble(std::exp(parse_double(text.substr(2))));
  }
  return FromDouble(parse_double(text));
}

double Epsilon::value() const {
  if (non_private_) return std::numeric_limits<double>::infinity();
  return static_cast<double>(micros_) / kMicros;
}

std::string Epsilon::ToString() const {
  return non_private_ ? std::string("non-private") : FormatMicros(micros_);
}

std::vector<Epsilon> SplitEpsilon(Epsilon total, std::span<const double> weights) {
  if (weights.empty()) {
    throw std::invalid_argument("SplitEpsilon needs at least one weight");
  }
  double weight_sum = 0;
  for (double w : weights) {
    if (!(w > 0) || !std::isfinite(w)) {
      throw std::invalid_argument("split weights must be positive");
    }
    weight_sum += w;
  }
  if (total.is_non_private()) {
    return std::vector<Epsilon>(weights.size(), Epsilon::NonPrivate());
  }
  const int64_t m = total.micros();
  std::vector<int64_t> parts(weights.size());
  std::vector<long double> remainders(weights.size());
  int64_t assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    long double exact = static_cast<long double>(m) * weights[i] / weight_sum;
    parts[i] = static_cast<int64_t>(std::floor(exact));
    remainders[i] = exact - parts[i];
    assigned += parts[i];
  }
  std::vector<size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return remainders[a] > remainders[b];
  });
  for (size_t k = 0; assigned < m; ++k, ++assigned) {
    parts[order[k % order.size()]] += 1;
  }
  std::vector<Epsilon> out;
  out.reserve(parts.size());
  for (int64_t p : parts) {
    if (p < 1) {
      throw BudgetError("budget split of " + total.ToString() + " into " +
                        std::to_string(parts.size()) +
                        " parts leaves a part below 1e-6");
    }
    out.push_back(Epsilon::FromMicros(p));
  }
  return out;
}

// ----------------------------------------------------------- BudgetLedger

struct BudgetLedger::Shared {
  Epsilon total;
  std::vector<Entry> entries;
  int64_t spent = 0;
};

BudgetLedger::BudgetLedger(Epsilon total)
    : shared_(std::make_shared<Shared>(Shared{total, {}, 0})) {}

Allocation BudgetLedger::Allocate(std::string label, Epsilon epsilon) {
  Shared& s = *shared_;
  if (!s.total.is_non_private()) {
    if (epsilon.is_non_private()) {
      throw BudgetError("cannot allocate a non-private budget from a finite "
                        "ledger (label '" + label + "')");
    }
    int64_t remaining = s.total.micros() - s.spent;
    if (epsilon.micros() > remaining) {
      throw BudgetError("over-allocation for '" + label + "': requested " +
                        epsilon.ToString() + ", remaining " +
                        FormatMicros(remaining));
    }
    s.spent += epsilon.micros();
  }
  s.entries.push_back(Entry{std::move(label), epsilon, -1, State::kOpen});
  return Allocation(shared_, s.entries.size() - 1);
}

Epsilon BudgetLedger::total() const { return shared_->total; }
int64_t BudgetLedger::spent_micros() const { return shared_->spent; }

int64_t BudgetLedger::remaining_micros() const {
  if (shared_->total.is_non_private()) {
    return std::numeric_limits<int64_t>::max();
  }
  return shared_->total.micros() - shared_->spent;
}

bool BudgetLedger::IsClosed() const {
  const Shared& s = *shared_;
  if (s.entries.empty()) return false;
  for (const Entry& e : s.entries) {
    if (e.state == State::kOpen) return false;
  }
  return s.total.is_non_private() || s.spent == s.total.micros();
}

const std::vector<BudgetLedger::Entry>& BudgetLedger::entries() const {
  return shared_->entries;
}

nlohmann::json BudgetLedger::ToJson() const {
  auto eps_json = [](Epsilon e) -> nlohmann::json {
    if (e.is_non_private()) return "non-private";
    return e.value();
  };
  const Shared& s = *shared_;
  nlohmann::json entries = nlohmann::json::array();
  for (const Entry& e : s.entries) {
    nlohmann::json j;
    j["label"] = e.label;
    j["epsilon"] = eps_json(e.epsilon);
    j["epsilon_micros"] = e.epsilon.micros();
    j["parent"] = e.parent < 0 ? nlohmann::json(nullptr)
                               : nlohmann::json(s.entries[e.parent].label);
    j["state"] = e.state == State::kOpen       ? "open"
                 : e.state == State::kConsumed ? "consumed"
                                               : "partitioned";
    entries.push_back(std::move(j));
  }
  nlohmann::json out;
  out["total"] = eps_json(s.total);
  out["total_micros"] = s.total.micros();
  out["spent_micros"] = s.spent;
  out["closed"] = IsClosed();
  out["entries"] = std::move(entries);
  return out;
}

// ------------------------------------------------------------- Allocation

BudgetLedger::Entry& Allocation::entry() const {
  return shared_->entries[index_];
}

const std::string& Allocation::label() const { return entry().label; }
Epsilon Allocation::epsilon() const { return entry().epsilon; }
bool Allocation::is_open() const {
  return entry().state == BudgetLedger::State::kOpen;
}

Epsilon Allocation::Consume() {
  BudgetLedger::Entry& e = entry();
  if (e.state != BudgetLedger::State::kOpen) {
    throw BudgetError("budget handle '" + e.label + "' already consumed");
  }
  e.state = BudgetLedger::State::kConsumed;
  return e.epsilon;
}

std::vector<Allocation> Allocation::Partition(
    const std::vector<std::pair<std::string, double>>& parts) {
  if (entry().state != BudgetLedger::State::kOpen) {
    throw BudgetError("budget handle '" + entry().label +
                      "' already consumed");
  }
  std::vector<double> weights;
  weights.reserve(parts.size());
  for (const auto& p : parts) weights.push_back(p.second);
  std::vector<Epsilon> split = SplitEpsilon(entry().epsilon, weights);
  entry().state = BudgetLedger::State::kPartitioned;
  std::string prefix = entry().label + "/";
  std::vector<Allocation> out;
  out.reserve(parts.size());
  for (size_t i = 0; i < parts.size(); ++i) {
    shared_->entries.push_back(
        BudgetLedger::Entry{prefix + parts[i].first, split[i],
                            static_cast<int>(index_),
                            BudgetLedger::State::kOpen});
    out.push_back(Allocation(shared_, shared_->entries.size() - 1));
  }
  return out;
}

std::vector<Allocation> Allocation::Divide(const std::vector<std::string>& labels) {
  std::vector<std::pair<std::string, double>> parts;
  parts.reserve(labels.size());
  for (const auto& l : labels) parts.emplace_back(l, 1.0);
  return Partition(parts);
}

// ----------------------------------------------------------- RandomStream

RandomStream::RandomStream(uint64_t seed, std::string stream_id)
    : seed_(seed),
      stream_id_(std::move(stream_id)),
      key_(Mix64(seed ^ HashString(stream_id_))) {}

RandomStream RandomStream::Fork(std::string_view name) const {
  return RandomStream(seed_, stream_id_ + "/" + std::string(name));
}

RandomStream RandomStream::Fork(std::string_view name, uint64_t index) const {
  return RandomStream(seed_, stream_id_ + "/" + std::string(name) + "#" +
                                 std::to_string(index));
}

uint64_t RandomStream::NextU64() {
  uint64_t i = counter_++;
  return Mix64(key_ ^ Mix64(i * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
}

double RandomStream::Uniform() {
  // 53 random bits, centered in their cell: never exactly 0 or 1.
  return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
}

size_t RandomStream::UniformIndex(size_t n) {
  if (n == 0) throw std::invalid_argument("UniformIndex(0)");
  return static_cast<size_t>(
      (static_cast<unsigned __int128>(NextU64()) * n) >> 64);
}

double RandomStream::StandardNormal() {
  double u1 = Uniform();
  double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

size_t RandomStream::Categorical(std::span<const double> weights) {
  double total = 0;
  for (double w : weights) total += w;
  if (!(total > 0)) throw std::invalid_argument("Categorical: zero mass");
  double u = Uniform() * total;
  double acc = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding at the top end: last positive-weight cell.
  for (size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0) return i;
  }
  return weights.size() - 1;
}

// -------------------------------------------------------------- Mechanisms

double LaplaceNoise(double scale, RandomStream& rng) {
  if (!(scale > 0) || !std::isfinite(scale)) {
    throw std::invalid_argument("Laplace scale must be positive and finite");
  }
  double v = rng.Uniform() - 0.5;
  double sign = v < 0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::fabs(v));
}

double NoisyCount(int64_t true_count, Epsilon epsilon, RandomStream& rng) {
  if (true_count < 0) throw std::invalid_argument("negative count");
  if (epsilon.is_non_private()) return static_cast<double>(true_count);
  return static_cast<double>(true_count) + LaplaceNoise(1.0 / epsilon.value(), rng);
}

double LaplaceCdf(double x, double scale) {
  if (x < 0) return 0.5 * std::exp(x / scale);
  return 1.0 - 0.5 * std::exp(-x / scale);
}

}  // namespace quail
