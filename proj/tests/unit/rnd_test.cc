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


#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "croprl/errors.h"
#include "croprl/eval.h"
#include "croprl/rnd.h"
#include "support/fd.h"

namespace croprl {
namespace {

using croprl::testing::RandomMlp;
using croprl::testing::RandomVector;
using croprl::testing::WorstMlpGradientError;

RndConfig SmallRnd() {
  RndConfig cfg;
  cfg.hidden = {32, 32};
  cfg.embedding_size = 8;
  cfg.learning_rate = 1e-3;
  return cfg;
}

TEST(LambdaIntTest, Examples) {
  EXPECT_EQ(LambdaInt(0.2), 1.0);
  EXPECT_EQ(LambdaInt(0.29), 1.0);
  EXPECT_NEAR(LambdaInt(0.5), 0.5, 1e-12);
  EXPECT_EQ(LambdaInt(0.7), 0.0);
  EXPECT_EQ(LambdaInt(1.0), 0.0);
}

TEST(LambdaIntTest, ContinuousAndZeroFromDecayEnd) {
  double prev = 1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double p = i / 10000.0;
    const double l = LambdaInt(p);
    EXPECT_LE(l, prev);
    EXPECT_LE(prev - l, 2.5e-4 + 1e-12);
    if (p >= 0.7) {
      EXPECT_EQ(l, 0.0);
    }
    prev = l;
  }
  EXPECT_THROW(LambdaInt(1.5), ContractViolation);
}

TEST(NormalizerTest, IdentityDuringWarmupThenStandardizes) {
  ObservationNormalizer norm(2, /*warmup=*/3, /*clip=*/5.0);
  Eigen::Vector2d x(10.0, -4.0);
  norm.Update(Eigen::Vector2d(1.0, 0.0));
  norm.Update(Eigen::Vector2d(3.0, 0.0));
  EXPECT_EQ(norm.Normalize(x), Eigen::VectorXd(x));
  norm.Update(Eigen::Vector2d(5.0, 0.0));
  const Eigen::VectorXd z = norm.Normalize(Eigen::Vector2d(5.0, 0.0));
  EXPECT_NEAR(z(0), 2.0 / std::sqrt(8.0 / 3.0), 1e-6);
  EXPECT_EQ(z(1), 0.0);
  EXPECT_EQ(norm.Normalize(x)(1), -5.0);  // clipped
}

TEST(RndTest, IdenticalNetworksGiveZeroReward) {
  Rng rng(1);
  RndNets nets(25, SmallRnd(), rng);
  nets.mutable_predictor() = nets.target();
  EXPECT_EQ(nets.IntrinsicReward(RandomVector(25, rng)), 0.0);
}

TEST(RndTest, RewardsArePositiveAndDistinct) {
  Rng rng(2);
  const RndNets nets(25, SmallRnd(), rng);
  const Eigen::VectorXd a = RandomVector(25, rng), b = RandomVector(25, rng);
  EXPECT_GT(nets.IntrinsicReward(a), 0.0);
  EXPECT_GT(nets.IntrinsicReward(b), 0.0);
  EXPECT_NE(nets.IntrinsicReward(a), nets.IntrinsicReward(b));
  Eigen::MatrixXd both(25, 2);
  both << a, b;
  const Eigen::VectorXd r = nets.IntrinsicRewards(both);
  EXPECT_NEAR(r(0), nets.IntrinsicReward(a), 1e-12);
  EXPECT_NEAR(r(1), nets.IntrinsicReward(b), 1e-12);
}

TEST(RndTest, TrainingConvergesOnOneState) {
  Rng rng(3);
  RndNets nets(25, SmallRnd(), rng);
  const Eigen::VectorXd s = RandomVector(25, rng);
  const Eigen::VectorXd held_out = RandomVector(25, rng);
  const double initial = nets.IntrinsicReward(s);
  for (int i = 0; i < 500; ++i) nets.TrainPredictor(s);
  EXPECT_LT(nets.IntrinsicReward(s), 0.01 * initial);
  EXPECT_LT(nets.IntrinsicReward(s), nets.IntrinsicReward(held_out));
}

TEST(RndTest, OwnTrainingStepLowersReward) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    RndNets nets(25, RndConfig{}, rng);
    const Eigen::VectorXd s = RandomVector(25, rng);
    const double before = nets.IntrinsicReward(s);
    const double loss = nets.TrainPredictor(s);
    EXPECT_NEAR(loss, before, 1e-12);
    EXPECT_LT(nets.IntrinsicReward(s), before);
  }
}

TEST(RndTest, EmptyBatchViolatesContract) {
  Rng rng(5);
  RndNets nets(25, SmallRnd(), rng);
  EXPECT_THROW(nets.TrainPredictor(Eigen::MatrixXd(25, 0)), ContractViolation);
}

TEST(RndTest, TargetStaysFrozen) {
  Rng rng(6);
  RndNets nets(25, SmallRnd(), rng);
  const std::uint64_t target = ParameterHash(nets.target());
  const std::uint64_t predictor = ParameterHash(nets.predictor());
  Eigen::MatrixXd batch(25, 16);
  for (int c = 0; c < 16; ++c) batch.col(c) = RandomVector(25, rng);
  for (int i = 0; i < 50; ++i) nets.TrainPredictor(batch);
  EXPECT_EQ(ParameterHash(nets.target()), target);
  EXPECT_NE(ParameterHash(nets.predictor()), predictor);
}

TEST(RndTest, PredictorGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    nn::Mlp predictor = RandomMlp({4, 6, 6, 3}, rng);
    const nn::Mlp target = RandomMlp({4, 6, 6, 3}, rng);
    Eigen::MatrixXd batch(4, 5);
    for (int c = 0; c < 5; ++c) batch.col(c) = RandomVector(4, rng);
    nn::MlpGrads grads = nn::MlpGrads::ZerosLike(predictor);
    PredictorLoss(predictor, target, batch, &grads);
    const double worst = WorstMlpGradientError(
        predictor, grads, [&] { return PredictorLoss(predictor, target, batch); });
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

TEST(CoverageTest, BinArithmetic) {
  const CoverageGrid grid;
  EXPECT_EQ(grid.BinOf(50, 0, 0.35, 0), (CoverageBin{0, 0, 3, 0}));
  EXPECT_EQ(grid.BinOf(150, 0, 0.35, 0)[0], 1);
  EXPECT_EQ(grid.BinOf(200, 0, 0.35, 0)[0], 1);   // clamps to the edge bin
  EXPECT_EQ(grid.BinOf(0, -5, -0.2, 9999)[3], 20);
  EXPECT_EQ(grid.BinOf(0, 0, 0.3, 0)[2], 3);       // exact edge goes up
}

TEST(CoverageTest, NearbyIrrigationTotalsShareABin) {
  const CoverageGrid grid;
  EXPECT_EQ(grid.BinOf(60, 4000, 0.22, 121.2), grid.BinOf(60, 4000, 0.22, 123.0));
}

TEST(CoverageTest, ObservationOverloadUsesTheRightFields) {
  const CoverageGrid grid;
  Observation o{};
  o[obs::kDay] = 150;
  o[obs::kCumulativeYield] = 250;
  o[obs::kSoilMoisture] = 0.45;
  o[obs::kCumulativeIrrigation] = 310;
  EXPECT_EQ(grid.BinOf(o), (CoverageBin{1, 2, 4, 3}));
}

CoverageBounds Bounds840() {
  CoverageBounds b;
  b.cumulative_yield.width = 10000.0;  // 2 x 2 x 10 x 21 bins
  return b;
}

TEST(CoverageTest, SevenOf840) {
  CoverageGrid grid(Bounds840());
  ASSERT_EQ(grid.total_bins(), 840);
  EXPECT_EQ(grid.Coverage(), 0.0);
  // Nine visits; the second and fifth repeat the first and third bins.
  const double visits[][4] = {{0, 0, 0.21, 0},     {30, 50, 0.25, 10},  {60, 0, 0.31, 0},
                              {99, 9999, 0.39, 100}, {10, 20, 0.35, 50}, {100, 0, 0.31, 0},
                              {150, 10000, 0.31, 0}, {199, 15000, 0.95, 2000},
                              {120, 12000, 0.55, 480}};
  for (const auto& v : visits) grid.RecordVisit(grid.BinOf(v[0], v[1], v[2], v[3]));
  EXPECT_EQ(grid.occupied_count(), 7);
  EXPECT_EQ(grid.Coverage(), 7.0 / 840.0);
}

TEST(CoverageTest, FullGridIsOne) {
  CoverageGrid grid(Bounds840());
  for (std::int64_t i = 0; i < grid.total_bins(); ++i) grid.MarkOccupied(i);
  EXPECT_EQ(grid.Coverage(), 1.0);
}

TEST(CoverageTest, MonotoneAndReportsNewBins) {
  CoverageGrid grid;
  SurrogateEnv env(ScenarioConfig::Florida());
  Observation o = env.Reset(3);
  double prev = 0.0;
  for (bool done = false; !done;) {
    grid.RecordVisit(o);
    EXPECT_GE(grid.Coverage(), prev);
    prev = grid.Coverage();
    const StepOutcome out = env.Step(ActionChoice::FromIndex(20));
    o = out.observation;
    done = out.done;
  }
  const CoverageBin b = grid.BinOf(o);
  EXPECT_TRUE(grid.RecordVisit(b) != grid.IsOccupied(b) || grid.IsOccupied(b));
  EXPECT_FALSE(grid.RecordVisit(b));
}

TEST(CoverageTest, UnionAndJsonRoundTrip) {
  CoverageGrid a(Bounds840()), b(Bounds840());
  a.MarkOccupied(1);
  a.MarkOccupied(5);
  b.MarkOccupied(5);
  b.MarkOccupied(839);
  CoverageGrid all = a;
  all.UnionWith(b);
  EXPECT_EQ(all.occupied_count(), 3);
  std::stringstream json;
  WriteCoverageJson(json, all);
  const CoverageGrid back = ReadCoverageJson(json);
  EXPECT_EQ(back.OccupiedIndices(), all.OccupiedIndices());
  EXPECT_EQ(back.total_bins(), 840);
  EXPECT_THROW(a.UnionWith(CoverageGrid{}), Error);
}

}  // namespace
}  // namespace croprl
