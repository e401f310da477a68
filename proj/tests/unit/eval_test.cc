// Copyright 2026 The CropRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cstdint>
#include <map>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "croprl/errors.h"
#include "croprl/eval.h"

namespace croprl {
namespace {

const std::vector<std::uint64_t> kSeeds = {42, 123};

TEST(EvalTest, RetentionDefinition) {
  EXPECT_EQ(*Retention(80.0, 100.0), 0.8);
  EXPECT_EQ(*Retention(100.0, 100.0), 1.0);
  EXPECT_EQ(*Retention(-5.0, 100.0), 0.0);
  EXPECT_FALSE(Retention(50.0, 0.0).has_value());
  EXPECT_FALSE(Retention(50.0, -1.0).has_value());
}

TEST(EvalTest, UseEfficiencyUndefinedWithoutInput) {
  EXPECT_FALSE(UseEfficiency(1000.0, 0.0).has_value());
  EXPECT_EQ(*UseEfficiency(1000.0, 50.0), 20.0);
}

TEST(EvalTest, SummarizeUsesPopulationStd) {
  const std::vector<double> v = {1.0, 3.0};
  const Stat s = Summarize(v);
  EXPECT_EQ(s.mean, 2.0);
  EXPECT_EQ(s.std, 1.0);
  EXPECT_EQ(s.count, 2);
}

TEST(EvalTest, PolicyBlindToTemperatureIsUnaffectedByTemperatureNoise) {
  SurrogateEnv env(ScenarioConfig::Florida());
  FixedManagementPolicy policy;  // reads only the day
  const MetricsRecord clean = Evaluate(env, policy, EvalCondition::kClean, 3, kSeeds);
  const MetricsRecord temp = Evaluate(env, policy, EvalCondition::kTemperature, 3, kSeeds);
  EXPECT_EQ(clean.score.mean, temp.score.mean);
  EXPECT_EQ(clean.yield.mean, temp.yield.mean);
  ASSERT_TRUE(clean.score.mean > 0.0);
  EXPECT_EQ(*Retention(temp.score.mean, clean.score.mean), 1.0);
}

TEST(EvalTest, EvaluateIsDeterministicAndCountsEpisodes) {
  SurrogateEnv env(ScenarioConfig::Florida());
  FixedManagementPolicy fixed;
  const MetricsRecord a = Evaluate(env, fixed, EvalCondition::kCombined, 4, kSeeds);
  const MetricsRecord b = Evaluate(env, fixed, EvalCondition::kCombined, 4, kSeeds);
  EXPECT_EQ(a.score.mean, b.score.mean);
  EXPECT_EQ(a.score.count, 8);
  EXPECT_EQ(a.per_seed_score.size(), 2u);
  EXPECT_EQ(a.episodes_per_seed, 4);
  EXPECT_THROW(Evaluate(env, fixed, EvalCondition::kClean, 0, kSeeds), ContractViolation);
}

TEST(EvalTest, SensitivityHasCleanAndFourChannels) {
  SurrogateEnv env(ScenarioConfig::Florida());
  FixedManagementPolicy fixed;
  const SensitivityTable t = SensitivityAnalysis(env, fixed, 2, kSeeds);
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[0].metrics.condition, EvalCondition::kClean);
  EXPECT_EQ(t.rows[0].score_reduction_pct, 0.0);
  for (const SensitivityRow& row : t.rows) {
    const double clean = t.rows[0].metrics.score.mean;
    EXPECT_NEAR(row.score_reduction_pct, (clean - row.metrics.score.mean) / clean * 100.0, 1e-9);
  }
}

TEST(EvalTest, IdenticalPoliciesGiveIdenticalRobustnessColumns) {
  SurrogateEnv env(ScenarioConfig::Florida());
  FixedManagementPolicy a, b;
  const RobustnessReport rep = RobustnessComparison(env, a, b, 2, kSeeds);
  ASSERT_FALSE(rep.rows.empty());
  EXPECT_EQ(rep.rows[0].condition, EvalCondition::kClean);
  EXPECT_EQ(*rep.rows[0].retention_a, 1.0);
  for (const RobustnessRow& row : rep.rows) {
    EXPECT_EQ(row.a.score.mean, row.b.score.mean);
    EXPECT_EQ(row.retention_a, row.retention_b);
  }
}

TEST(EvalTest, CoverageComparisonUsesUnionOfRuns) {
  CoverageGrid g1, g2;
  g1.RecordVisit(g1.BinOf(1.0, 0.0, 0.25, 0.0));
  g1.RecordVisit(g1.BinOf(150.0, 500.0, 0.25, 0.0));
  g2.RecordVisit(g2.BinOf(1.0, 0.0, 0.25, 0.0));
  g2.RecordVisit(g2.BinOf(1.0, 0.0, 0.95, 0.0));
  std::map<std::string, std::vector<CoverageGrid>> runs;
  runs["pair"] = {g1, g2};
  runs["single"] = {g1};
  const auto rows = CoverageComparison(runs);
  ASSERT_EQ(rows.size(), 2u);
  for (const CoverageSummary& row : rows) {
    EXPECT_EQ(row.total, g1.total_bins());
    EXPECT_EQ(row.occupied, row.configuration == "pair" ? 3 : 2);
    EXPECT_EQ(row.coverage, static_cast<double>(row.occupied) / row.total);
  }
  runs["empty"] = {};
  EXPECT_THROW(CoverageComparison(runs), ContractViolation);
}

TEST(EvalTest, ReportJsonRendersLikeDirectFormatting) {
  SurrogateEnv env(ScenarioConfig::Zaragoza());
  FixedManagementPolicy a;
  ConstantPolicy b(ActionChoice::FromLevels(1, 1));
  const SensitivityTable t = SensitivityAnalysis(env, a, 1, kSeeds);
  EXPECT_EQ(RenderReportJson(SensitivityJson(t)), FormatSensitivityText(t));
  const RobustnessReport rep = RobustnessComparison(env, a, b, 1, kSeeds);
  EXPECT_EQ(RenderReportJson(RobustnessJson(rep)), FormatRobustnessText(rep));
  EXPECT_THROW(RenderReportJson("{"), ConfigError);
  EXPECT_THROW(RenderReportJson(R"({"kind":"other"})"), ConfigError);
}

TEST(EvalTest, CsvFormatsHaveOneLinePerRecordPlusHeader) {
  SurrogateEnv env(ScenarioConfig::Florida());
  FixedManagementPolicy fixed;
  const std::vector<EvalCondition> conds = {EvalCondition::kClean, EvalCondition::kRainfall};
  const auto records = Sweep(env, fixed, conds, 1, kSeeds);
  const std::string csv = FormatSweepCsv(records, fixed.name());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(FormatSweepText(records, fixed.name()).find("-0.0"), std::string::npos);
}

}  // namespace
}  // namespace croprl
