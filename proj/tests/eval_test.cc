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

#include <gtest/gtest.h>

#include <cmath>

#include "quail/errors.h"
#include "support/fixtures.h"

namespace quail {
namespace {

// 1000 rows, 456 positive; g = 1 on every fourth row.
Dataset BaseRateTest() {
  auto schema = testing::BinarySchema({"g", "x"}, "g", 1);
  std::vector<int> levels;
  for (int r = 0; r < 1000; ++r) {
    const int y = r < 456;
    levels.insert(levels.end(), {r % 4 == 0, y, y});
  }
  return Dataset(schema, levels);
}

const GroupMetrics& Find(const std::vector<GroupMetrics>& m, const std::string& g) {
  for (const auto& x : m) {
    if (x.group == g) return x;
  }
  throw std::out_of_range(g);
}

TEST(ComputeMetricsTest, AllPositivePredictor) {
  Dataset test = BaseRateTest();
  std::vector<int> predicted(test.num_rows(), 1);
  auto m = ComputeMetrics(test, predicted, 1, size_t{0});
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].group, "overall");
  EXPECT_DOUBLE_EQ(m[0].accuracy, 0.456);
  EXPECT_EQ(*m[0].fnr, 0);
  EXPECT_EQ(*m[0].fpr, 1);
  EXPECT_EQ(m[1].group, "g=0");
  EXPECT_EQ(m[2].group, "g=1");
}

TEST(ComputeMetricsTest, PerfectPredictor) {
  Dataset test = BaseRateTest();
  std::vector<int> predicted;
  for (size_t r = 0; r < test.num_rows(); ++r) predicted.push_back(test.at(r, 2));
  for (const GroupMetrics& g : ComputeMetrics(test, predicted, 1, size_t{0})) {
    EXPECT_EQ(g.accuracy, 1) << g.group;
    EXPECT_EQ(*g.f1, 1);
    EXPECT_EQ(*g.fnr, 0);
    EXPECT_EQ(*g.fpr, 0);
  }
}

TEST(ComputeMetricsTest, GroupsRecombineAndAbsentGroupsAreOmitted) {
  Dataset test = BaseRateTest();
  RandomStream rng(1, "pred");
  std::vector<int> predicted;
  for (size_t r = 0; r < test.num_rows(); ++r) predicted.push_back(rng.Uniform() < 0.5);
  auto m = ComputeMetrics(test, predicted, 1, size_t{0});
  double weighted = 0;
  for (size_t i = 1; i < m.size(); ++i) {
    weighted += m[i].accuracy * static_cast<double>(m[i].confusion.total());
  }
  EXPECT_NEAR(weighted / 1000.0, m[0].accuracy, 1e-12);

  std::vector<size_t> rows;
  for (size_t r = 0; r < test.num_rows(); ++r) {
    if (test.at(r, 0) == 0) rows.push_back(r);
  }
  Dataset only_a = test.Subset(rows);
  std::vector<int> pa(only_a.num_rows(), 0);
  auto ma = ComputeMetrics(only_a, pa, 1, size_t{0});
  ASSERT_EQ(ma.size(), 2u);
  EXPECT_EQ(ma[1].group, "g=0");
  ASSERT_TRUE(ma[0].f1);  // positives exist, so f1 is defined and zero
  EXPECT_EQ(*ma[0].f1, 0);
}

TEST(ComputeMetricsTest, FnrIsAbsentWithoutPositives) {
  auto schema = testing::BinarySchema({"g", "x"}, "g", 1);
  // Group 1 has no positive rows.
  Dataset test(schema, {0, 1, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0});
  auto m = ComputeMetrics(test, std::vector<int>{1, 0, 1, 0}, 1, size_t{0});
  const GroupMetrics& g1 = Find(m, "g=1");
  EXPECT_FALSE(g1.fnr);
  ASSERT_TRUE(g1.fpr);
  EXPECT_DOUBLE_EQ(*g1.fpr, 0.5);
  EXPECT_TRUE(g1.ToJson()["fnr"].is_null());
  EXPECT_EQ(g1.ToJson()["support"], 2);
}

RunReport WithAccuracy(double acc, uint64_t seed, nlohmann::json config) {
  RunReport r;
  r.config = std::move(config);
  r.seed = seed;
  GroupMetrics g;
  g.group = "overall";
  g.accuracy = acc;
  r.metrics.push_back(g);
  return r;
}

TEST(AggregateTest, MeanAndSampleStddev) {
  std::vector<RunReport> runs = {WithAccuracy(0.6, 1, {{"mode", "sq"}, {"seed", 1}}),
                                 WithAccuracy(0.8, 2, {{"mode", "sq"}, {"seed", 2}})};
  Summary s = Aggregate(runs);
  EXPECT_EQ(s.runs, 2u);
  const MetricSummary& acc = s.groups["overall"]["accuracy"];
  EXPECT_NEAR(acc.mean, 0.7, 1e-12);
  EXPECT_NEAR(acc.stddev, std::sqrt(0.02), 1e-12);
  EXPECT_EQ(acc.count, 2u);
  EXPECT_FALSE(s.config.contains("seed"));
  EXPECT_EQ(s.groups["overall"].count("fnr"), 0u);
  EXPECT_EQ(s.ToCsv().substr(0, s.ToCsv().find('\n')), "group,metric,mean,stddev,count");
}

TEST(AggregateTest, SingleReport) {
  std::vector<RunReport> runs = {WithAccuracy(0.73, 1, {{"mode", "sq"}})};
  Summary s = Aggregate(runs);
  EXPECT_EQ(s.groups["overall"]["accuracy"].mean, 0.73);
  EXPECT_EQ(s.groups["overall"]["accuracy"].stddev, 0);
}

TEST(AggregateTest, RejectsMixedConfigs) {
  std::vector<RunReport> runs = {WithAccuracy(0.6, 1, {{"mode", "sq"}}),
                                 WithAccuracy(0.8, 2, {{"mode", "marginal"}})};
  EXPECT_THROW(Aggregate(runs), ConfigError);
}

TEST(EvaluateTest, SpendsOnItsOwnLedger) {
  Dataset train = testing::SampleFairFixture(testing::FairFixture{}, 3000, 1);
  Dataset test = testing::SampleFairFixture(testing::FairFixture{}, 3000, 2);
  RandomStream rng(4, "evaluate");
  RunReport r = Evaluate(train, test, Epsilon::Parse("e^3"), FitConfig{}, rng, {{"mode", "real"}});
  ASSERT_EQ(r.metrics.size(), 3u);
  EXPECT_EQ(r.metrics[0].confusion.total(), 3000);
  EXPECT_EQ(r.ledger["entries"][0]["label"], "evaluation_classifier");
  EXPECT_GT(r.metrics[0].accuracy, 0.65);
  EXPECT_EQ(r.seed, 4u);
  RunReport back = RunReport::FromJson(r.ToJson());
  EXPECT_EQ(back.ToJson(), r.ToJson());
}

TEST(EvaluateTest, SchemaMismatch) {
  Dataset a = testing::SampleFairFixture(testing::FairFixture{}, 100, 1);
  Dataset b = testing::SampleMajorityFixture(100, 0.1, 1);
  RandomStream rng(4, "evaluate");
  EXPECT_THROW(Evaluate(a, b, Epsilon::FromDouble(1.0), FitConfig{}, rng), DataError);
}

}  // namespace
}  // namespace quail
