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

#ifndef QUAIL_DP_CORE_H_
#define QUAIL_DP_CORE_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace quail {

// A privacy-loss parameter held in integer micro-epsilon units so that
// budget sums are exact. Doubles are rounded down on intake.
class Epsilon {
 public:
  static constexpr int64_t kMicrosPerUnit = 1'000'000;

  // Throws ConfigError unless `value` is finite and at least one micro-unit.
  static Epsilon FromDouble(double value);
  static Epsilon FromMicros(int64_t micros);
  // Test sentinel meaning "no noise". Never produced from user input.
  static Epsilon NonPrivate();
  // Accepts a plain decimal ("20.0855") or e-power shorthand ("e^3").
  static Epsilon Parse(std::string_view text);

  int64_t micros() const { return micros_; }
  double value() const;
  bool is_non_private() const { return non_private_; }
  std::string ToString() const;

  friend bool operator==(const Epsilon&, const Epsilon&) = default;

 private:
  Epsilon(int64_t micros, bool non_private)
      : micros_(micros), non_private_(non_private) {}

  int64_t micros_ = 0;
  bool non_private_ = false;
};

// Splits `total` into parts proportional to `weights` using largest-remainder
// rounding, so the parts sum to `total` exactly. Every part must come out
// positive, otherwise BudgetError. A non-private total splits into
// non-private parts.
std::vector<Epsilon> SplitEpsilon(Epsilon total, std::span<const double> weights);

class Allocation;

// Append-only record of privacy spends. Top-level entries compose under
// standard (sequential) composition and may never exceed the total. An entry
// is either consumed by exactly one mechanism or partitioned into child
// entries whose budgets sum exactly to it.
//
// Mutation is single-writer. The ledger shares its state with outstanding
// Allocation handles, so it may be moved while handles are alive.
class BudgetLedger {
 public:
  enum class State { kOpen, kConsumed, kPartitioned };

  struct Entry {
    std::string label;
    Epsilon epsilon;
    int parent = -1;  // index of the partitioned entry this came from
    State state = State::kOpen;
  };

  explicit BudgetLedger(Epsilon total);

  // Throws BudgetError when `epsilon` exceeds what remains.
  Allocation Allocate(std::string label, Epsilon epsilon);

  Epsilon total() const;
  // Sum over top-level entries.
  int64_t spent_micros() const;
  int64_t remaining_micros() const;
  // True when top-level spends equal the total exactly and no entry is open.
  bool IsClosed() const;
  const std::vector<Entry>& entries() const;

  nlohmann::json ToJson() const;

 private:
  friend class Allocation;
  struct Shared;
  std::shared_ptr<Shared> shared_;
};

// Handle to one ledger entry.
class Allocation {
 public:
  const std::string& label() const;
  Epsilon epsilon() const;
  bool is_open() const;

  // Marks the entry spent and returns its budget. Throws BudgetError if the
  // entry was already consumed or partitioned.
  Epsilon Consume();

  // Replaces this entry with children in proportion to `parts` (label,
  // weight). Child labels are "<parent>/<label>".
  std::vector<Allocation> Partition(
      const std::vector<std::pair<std::string, double>>& parts);
  // Equal division.
  std::vector<Allocation> Divide(const std::vector<std::string>& labels);

 private:
  friend class BudgetLedger;
  Allocation(std::shared_ptr<BudgetLedger::Shared> shared, size_t index)
      : shared_(std::move(shared)), index_(index) {}

  BudgetLedger::Entry& entry() const;

  std::shared_ptr<BudgetLedger::Shared> shared_;
  size_t index_;
};

// Counter-based deterministic generator. Draw i of a stream is a pure function
// of (seed, stream_id, i), so forked sub-streams can be consumed on any worker
// and in any order without changing results.
class RandomStream {
 public:
  RandomStream(uint64_t seed, std::string stream_id);

  RandomStream Fork(std::string_view name) const;
  RandomStream Fork(std::string_view name, uint64_t index) const;

  uint64_t NextU64();
  // Uniform on the open interval (0, 1).
  double Uniform();
  // Uniform on {0, ..., n-1}; n > 0.
  size_t UniformIndex(size_t n);
  double StandardNormal();
  // Index drawn from unnormalized non-negative weights.
  size_t Categorical(std::span<const double> weights);
  // Fisher-Yates; identical across platforms, unlike std::shuffle.
  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[UniformIndex(i)]);
    }
  }

  uint64_t seed() const { return seed_; }
  const std::string& stream_id() const { return stream_id_; }
  uint64_t position() const { return counter_; }

 private:
  uint64_t seed_;
  std::string stream_id_;
  uint64_t key_;
  uint64_t counter_ = 0;
};

// One draw from Laplace(0, scale) by inverse CDF. Throws
// std::invalid_argument on a non-positive or non-finite scale.
double LaplaceNoise(double scale, RandomStream& rng);

// true_count + Laplace(0, 1/epsilon). The caller records the spend; a
// non-private epsilon returns the count unchanged.
double NoisyCount(int64_t true_count, Epsilon epsilon, RandomStream& rng);

// Laplace(0, scale) CDF.
double LaplaceCdf(double x, double scale);

}  // namespace quail

#endif  // QUAIL_DP_CORE_H_
