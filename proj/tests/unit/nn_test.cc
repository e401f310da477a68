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


#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "croprl/errors.h"
#include "croprl/nn.h"
#include "support/fd.h"

namespace croprl::nn {
namespace {

using croprl::testing::RandomMlp;
using croprl::testing::RandomVector;
using croprl::testing::WorstMlpGradientError;

// Straightforward per-unit forward pass used as an independent reference.
Eigen::VectorXd ReferenceForward(const Mlp& net, const Eigen::VectorXd& input) {
  std::vector<double> a(input.data(), input.data() + input.size());
  for (int l = 0; l < net.num_layers(); ++l) {
    const Eigen::MatrixXd& w = net.weights()[l];
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double z = net.biases()[l](r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) z += w(r, c) * a[static_cast<std::size_t>(c)];
      const bool relu = l + 1 < net.num_layers();
      next[static_cast<std::size_t>(r)] = relu && z < 0.0 ? 0.0 : z;
    }
    a = std::move(next);
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

TEST(MlpTest, ZeroNetworkOutputsZero) {
  const Mlp net({5, 7, 3});
  Rng rng(1);
  EXPECT_TRUE(net.Forward(RandomVector(5, rng)).isZero(0.0));
}

TEST(MlpTest, SingleLinearLayer) {
  Mlp net({2, 1});
  net.weights()[0] << 1.0, 1.0;
  Eigen::VectorXd x(2);
  x << 3.0, 4.0;
  EXPECT_EQ(net.Forward(x)(0), 7.0);
}

TEST(MlpTest, MatchesReferenceForward) {
  Rng rng(7);
  const Mlp net = RandomMlp({4, 256, 256, 2}, rng);
  const Eigen::VectorXd x = RandomVector(4, rng);
  const Eigen::VectorXd got = net.Forward(x);
  const Eigen::VectorXd want = ReferenceForward(net, x);
  ASSERT_EQ(got.size(), 2);
  EXPECT_NEAR(got(0), want(0), 1e-6);
  EXPECT_NEAR(got(1), want(1), 1e-6);
}

TEST(MlpTest, BatchForwardMatchesColumns) {
  Rng rng(3);
  const Mlp net = RandomMlp({3, 8, 8, 4}, rng);
  Eigen::MatrixXd batch(3, 5);
  for (int c = 0; c < 5; ++c) batch.col(c) = RandomVector(3, rng);
  const Eigen::MatrixXd out = net.ForwardBatch(batch);
  for (int c = 0; c < 5; ++c) {
    EXPECT_LT((out.col(c) - net.Forward(batch.col(c))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MlpTest, ForwardIsBitwiseDeterministic) {
  Rng rng(11);
  const Mlp net = RandomMlp({6, 16, 16, 3}, rng);
  const Eigen::VectorXd x = RandomVector(6, rng);
  EXPECT_EQ(net.Forward(x), net.Forward(x));
}

TEST(MlpTest, RejectsBadShapes) {
  EXPECT_THROW(Mlp({4}), ConfigError);
  EXPECT_THROW(Mlp({4, 0, 2}), ConfigError);
}

TEST(BackwardTest, LinearUnit) {
  Mlp net({1, 1});
  net.weights()[0](0, 0) = 0.3;
  Eigen::VectorXd x(1);
  x << 2.0;
  const MlpGrads g = Backward(net, x, Eigen::VectorXd::Ones(1));
  EXPECT_EQ(g.weights[0](0, 0), 2.0);
  EXPECT_EQ(g.biases[0](0), 1.0);
}

TEST(BackwardTest, InactiveReluBlocksGradient) {
  Mlp net({1, 1, 1});
  net.weights()[0](0, 0) = 1.0;
  net.biases()[0](0) = -5.0;  // pre-activation negative for x = 1
  net.weights()[1](0, 0) = 2.0;
  Eigen::VectorXd x(1);
  x << 1.0;
  const MlpGrads g = Backward(net, x, Eigen::VectorXd::Ones(1));
  EXPECT_EQ(g.weights[0](0, 0), 0.0);
  EXPECT_EQ(g.biases[0](0), 0.0);
  EXPECT_EQ(g.weights[1](0, 0), 0.0);  // upstream activation is zero
  EXPECT_EQ(g.biases[1](0), 1.0);
}

TEST(BackwardTest, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Mlp net = RandomMlp({3, 4, 4, 2}, rng);
    const Eigen::VectorXd x = RandomVector(3, rng);
    const Eigen::VectorXd upstream = RandomVector(2, rng);
    const MlpGrads g = Backward(net, x, upstream);
    const double worst =
        WorstMlpGradientError(net, g, [&] { return net.Forward(x).dot(upstream); });
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

TEST(BackwardTest, ReluOutputMatchesFiniteDifferences) {
  Rng rng(5);
  Mlp net = RandomMlp({2, 3, 3}, rng, OutputActivation::kRelu);
  const Eigen::VectorXd x = RandomVector(2, rng);
  const Eigen::VectorXd upstream = RandomVector(3, rng);
  const MlpGrads g = Backward(net, x, upstream);
  EXPECT_LT(WorstMlpGradientError(net, g, [&] { return net.Forward(x).dot(upstream); }), 1e-4);
}

TEST(BackwardTest, BatchSumsPerSampleGradients) {
  Rng rng(9);
  const Mlp net = RandomMlp({3, 5, 2}, rng);
  Eigen::MatrixXd xs(3, 4), ups(2, 4);
  for (int c = 0; c < 4; ++c) {
    xs.col(c) = RandomVector(3, rng);
    ups.col(c) = RandomVector(2, rng);
  }
  Mlp::Cache cache;
  net.ForwardBatch(xs, &cache);
  MlpGrads batch = MlpGrads::ZerosLike(net);
  BackwardBatch(net, cache, ups, batch);
  MlpGrads sum = MlpGrads::ZerosLike(net);
  for (int c = 0; c < 4; ++c) {
    const MlpGrads one = Backward(net, xs.col(c), ups.col(c));
    for (int l = 0; l < net.num_layers(); ++l) {
      sum.weights[l] += one.weights[l];
      sum.biases[l] += one.biases[l];
    }
  }
  for (int l = 0; l < net.num_layers(); ++l) {
    EXPECT_LT((batch.weights[l] - sum.weights[l]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((batch.biases[l] - sum.biases[l]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AdamTest, FirstStepOnScalar) {
  Mlp net({1, 1});
  net.weights()[0](0, 0) = 0.5;
  AdamState state = AdamState::For(net);
  MlpGrads g = MlpGrads::ZerosLike(net);
  g.weights[0](0, 0) = 1.0;
  AdamStep(net, g, state, 1e-3);
  EXPECT_NEAR(net.weights()[0](0, 0) - 0.5, -1e-3 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step_count, 1);
}

TEST(AdamTest, ZeroGradientLeavesParametersAndDecaysMoments) {
  Rng rng(2);
  Mlp net = RandomMlp({2, 3, 1}, rng);
  AdamState state = AdamState::For(net);
  MlpGrads g = MlpGrads::ZerosLike(net);
  g.weights[0].setConstant(1.0);
  AdamStep(net, g, state, 1e-3);
  const Mlp before = net;
  const double m_before = state.first_moment.weights[0](0, 0);
  const double v_before = state.second_moment.weights[0](0, 0);
  const MlpGrads zero = MlpGrads::ZerosLike(net);
  AdamStep(net, zero, state, 1e-3);
  EXPECT_EQ(state.first_moment.weights[0](0, 0), 0.9 * m_before);
  EXPECT_EQ(state.second_moment.weights[0](0, 0), 0.999 * v_before);
  // Untouched layers (zero moments) do not move.
  EXPECT_EQ(net.weights()[1], before.weights()[1]);
}

TEST(AdamTest, ConstantGradientMovesAgainstSign) {
  Mlp net({1, 1});
  AdamState state = AdamState::For(net);
  MlpGrads g = MlpGrads::ZerosLike(net);
  g.weights[0](0, 0) = -0.25;
  g.biases[0](0) = 3.0;
  for (int i = 0; i < 100; ++i) AdamStep(net, g, state, 1e-2);
  EXPECT_GT(net.weights()[0](0, 0), 0.0);
  EXPECT_LT(net.biases()[0](0), 0.0);
}

TEST(AdamTest, ZeroLearningRateIsIdentity) {
  Rng rng(4);
  Mlp net = RandomMlp({3, 4, 2}, rng);
  const Mlp before = net;
  AdamState state = AdamState::For(net);
  MlpGrads g = MlpGrads::ZerosLike(net);
  for (auto& w : g.weights) w.setConstant(0.7);
  AdamStep(net, g, state, 0.0);
  EXPECT_TRUE(net == before);
}

TEST(AdamTest, MomentShapesMatchParameters) {
  Rng rng(6);
  const Mlp net = RandomMlp({3, 5, 2}, rng);
  const AdamState state = AdamState::For(net);
  for (int l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(state.first_moment.weights[l].rows(), net.weights()[l].rows());
    EXPECT_EQ(state.first_moment.weights[l].cols(), net.weights()[l].cols());
    EXPECT_EQ(state.second_moment.biases[l].size(), net.biases()[l].size());
  }
}

TEST(AdamTest, NonFiniteGradientRejectedWithoutSideEffects) {
  Rng rng(8);
  Mlp net = RandomMlp({2, 2, 1}, rng);
  AdamState state = AdamState::For(net);
  const Mlp before = net;
  MlpGrads g = MlpGrads::ZerosLike(net);
  g.biases[1](0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(AdamStep(net, g, state, 1e-3), NumericError);
  EXPECT_TRUE(net == before);
  EXPECT_EQ(state.step_count, 0);
}

TEST(LearningRateTest, LinearDecay) {
  EXPECT_EQ(LinearDecayLr(3e-4, 0.0), 3e-4);
  EXPECT_DOUBLE_EQ(LinearDecayLr(3e-4, 0.5), 1.5e-4);
  EXPECT_EQ(LinearDecayLr(3e-4, 1.0), 0.0);
  EXPECT_EQ(LinearDecayLr(3e-4, 1.5), 0.0);
}

TEST(CheckpointTest, RoundTripIsBitwise) {
  Rng rng(10);
  const std::vector<Mlp> nets = {RandomMlp({4, 6, 3}, rng),
                                 RandomMlp({3, 2}, rng, OutputActivation::kRelu)};
  std::stringstream buf;
  SaveNetworks(buf, nets);
  const std::vector<Mlp> loaded = LoadNetworks(buf);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_TRUE(loaded[0] == nets[0]);
  EXPECT_TRUE(loaded[1] == nets[1]);
}

TEST(CheckpointTest, RejectsCorruptInput) {
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(LoadNetworks(bad), Error);
  Rng rng(12);
  std::stringstream buf;
  const std::vector<Mlp> nets = {RandomMlp({2, 2}, rng)};
  SaveNetworks(buf, nets);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  EXPECT_THROW(LoadNetworks(truncated), Error);
}

}  // namespace
}  // namespace croprl::nn
