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


#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "croprl/errors.h"
#include "croprl/ppo.h"
#include "support/fd.h"

namespace croprl {
namespace {

using croprl::testing::CentralDifference;
using croprl::testing::RandomVector;
using croprl::testing::RelativeError;

// Direct double sum: A_t = sum_l (gamma*lambda)^l delta_{t+l}, truncated at the
// first terminal step at or after t.
std::vector<double> GaeOracle(const std::vector<double>& r, const std::vector<double>& v,
                              const std::vector<bool>& done, double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    delta[t] = r[t] + (done[t] ? 0.0 : gamma * v[t + 1]) - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += weight * delta[k];
      if (done[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

TEST(GaeTest, OneStepTdWhenLambdaZero) {
  const std::vector<double> r = {2.0}, v = {0.5, 3.0};
  EXPECT_DOUBLE_EQ(Gae(r, v, {false}, 0.9, 0.0)(0), 2.0 + 0.9 * 3.0 - 0.5);
  EXPECT_DOUBLE_EQ(Gae(r, v, {true}, 0.9, 0.0)(0), 2.0 - 0.5);
}

TEST(GaeTest, UndiscountedReturns) {
  const Eigen::VectorXd a = Gae(std::vector<double>{1, 1, 1}, std::vector<double>{0, 0, 0, 0},
                                {false, false, true}, 1.0, 1.0);
  EXPECT_EQ(a, Eigen::Vector3d(3, 2, 1));
}

TEST(GaeTest, MatchesDirectSumOracle) {
  Rng rng(2026);
  std::uniform_int_distribution<int> length(1, 10);
  std::uniform_real_distribution<double> real(-5.0, 5.0), unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = length(rng);
    std::vector<double> r(n), v(n + 1);
    std::vector<bool> done(n);
    for (int t = 0; t < n; ++t) {
      r[t] = real(rng);
      done[t] = unit(rng) < 0.2;
    }
    for (double& x : v) x = real(rng);
    const double gamma = unit(rng), lambda = unit(rng);
    const Eigen::VectorXd got = Gae(r, v, done, gamma, lambda);
    const std::vector<double> want = GaeOracle(r, v, done, gamma, lambda);
    for (int t = 0; t < n; ++t) worst = std::max(worst, std::abs(got(t) - want[t]));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(GaeTest, RejectsMismatchedLengths) {
  EXPECT_THROW(Gae(std::vector<double>{1, 2}, std::vector<double>{0, 0}, {false, false}, 0.9, 0.9),
               ContractViolation);
}

TEST(NormalizeTest, Cases) {
  EXPECT_TRUE(NormalizeAdvantages(Eigen::Vector3d(4, 4, 4)).isZero(0.0));
  const Eigen::VectorXd pm = NormalizeAdvantages(Eigen::Vector2d(1, -1));
  EXPECT_NEAR(pm(0), 1.0, 1e-7);
  EXPECT_NEAR(pm(1), -1.0, 1e-7);
  Rng rng(1);
  const Eigen::VectorXd z = NormalizeAdvantages(RandomVector(500, rng, 7.0).array() + 3.0);
  EXPECT_LT(std::abs(z.mean()), 1e-9);
  EXPECT_LT(std::abs(std::sqrt((z.array() - z.mean()).square().mean()) - 1.0), 1e-6);
  EXPECT_THROW(NormalizeAdvantages(Eigen::VectorXd::Ones(1)), ContractViolation);
}

TEST(CombinedAdvantageTest, Cases) {
  Rng rng(2);
  const Eigen::VectorXd e = RandomVector(16, rng), i = RandomVector(16, rng);
  EXPECT_EQ(CombinedAdvantage(e, i, 0.0), e);
  EXPECT_EQ(CombinedAdvantage(e, i, 1.0), Eigen::VectorXd(e + i));
  EXPECT_EQ(CombinedAdvantage(Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 4.0),
                              0.5)(0),
            4.0);
}

TEST(ClipTest, SurrogateNeverExceedsBound) {
  Rng rng(3);
  std::uniform_real_distribution<double> ratio(0.0, 3.0), adv(-10.0, 10.0);
  for (int i = 0; i < 100000; ++i) {
    const double r = ratio(rng), a = adv(rng);
    ASSERT_LE(ClippedSurrogate(r, a, 0.2), std::max(1.2 * a, 0.8 * a) + 1e-12);
  }
  EXPECT_EQ(ClippedSurrogate(1.5, 1.0, 0.2), 1.2);
  EXPECT_EQ(ClippedSurrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_EQ(ClippedSurrogate(0.5, 1.0, 0.2), 0.5);
}

PolicyNet ToyNet(Rng& rng, int obs = 3, int actions = 4) {
  PolicyNet net = PolicyNet::Create(obs, {5, 4}, actions, rng);
  // Larger policy weights move ratios away from 1 so clipping is exercised.
  net.policy_head.weights()[0] *= 100.0;
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (nn::Mlp* m : {&net.trunk, &net.policy_head, &net.value_ext_head, &net.value_int_head}) {
    for (Eigen::VectorXd& b : m->biases()) {
      for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = u(rng);
    }
  }
  return net;
}

Minibatch ToyBatch(const PolicyNet& net, Rng& rng, int m) {
  Minibatch b;
  b.observations.resize(net.observation_size(), m);
  b.actions.resize(m);
  b.old_log_probs.resize(m);
  b.advantages = RandomVector(m, rng);
  b.returns_ext = RandomVector(m, rng);
  b.returns_int = RandomVector(m, rng);
  std::uniform_int_distribution<int> action(0, net.num_actions() - 1);
  std::uniform_real_distribution<double> shift(-0.6, 0.6);
  for (int j = 0; j < m; ++j) {
    b.observations.col(j) = RandomVector(net.observation_size(), rng);
    b.actions[j] = action(rng);
    const Eigen::VectorXd logp =
        LogSoftmax(net.Forward(b.observations.col(j)).logits.col(0));
    b.old_log_probs(j) = logp(b.actions[j]) + shift(rng);
  }
  return b;
}

double WorstPolicyGradientError(PolicyNet& net, const PolicyGrads& g, auto&& loss) {
  double worst = 0.0;
  const std::pair<nn::Mlp*, const nn::MlpGrads*> parts[] = {
      {&net.trunk, &g.trunk}, {&net.policy_head, &g.policy},
      {&net.value_ext_head, &g.value_ext}, {&net.value_int_head, &g.value_int}};
  for (const auto& [m, mg] : parts) {
    for (int l = 0; l < m->num_layers(); ++l) {
      for (Eigen::Index i = 0; i < m->weights()[l].size(); ++i) {
        const double n = CentralDifference(m->weights()[l].data()[i], loss);
        worst = std::max(worst, RelativeError(mg->weights[l].data()[i], n));
      }
      for (Eigen::Index i = 0; i < m->biases()[l].size(); ++i) {
        const double n = CentralDifference(m->biases()[l](i), loss);
        worst = std::max(worst, RelativeError(mg->biases[l](i), n));
      }
    }
  }
  return worst;
}

TEST(PpoLossTest, GradientMatchesFiniteDifferences) {
  PpoConfig cfg;
  for (bool train_int : {false, true}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      Rng rng(seed);
      PolicyNet net = ToyNet(rng);
      const Minibatch batch = ToyBatch(net, rng, 6);
      PolicyGrads g = PolicyGrads::ZerosLike(net);
      const LossTerms terms = PpoLoss(net, batch, cfg, train_int, &g);
      EXPECT_GT(terms.clip_fraction, 0.0);
      const double worst = WorstPolicyGradientError(
          net, g, [&] { return PpoLoss(net, batch, cfg, train_int).total; });
      EXPECT_LT(worst, 1e-4) << "seed " << seed << " train_int " << train_int;
    }
  }
}

TEST(PpoLossTest, ThreeParameterPolicy) {
  // Logits = W * relu(trunk(x)) with a one-unit trunk and a 2x1 head plus one
  // free bias: three trainable policy parameters.
  Rng rng(11);
  PolicyNet net = PolicyNet::Create(1, {1}, 2, rng);
  net.trunk.weights()[0](0, 0) = 1.0;
  net.trunk.biases()[0](0) = 0.5;
  net.policy_head.weights()[0] << 0.7, -0.4;
  PpoConfig cfg;
  cfg.value_coef = 0.0;
  Minibatch b;
  b.observations = Eigen::RowVector3d(0.2, 1.1, -0.3);
  b.actions = {0, 1, 0};
  b.old_log_probs = Eigen::Vector3d(-0.9, -0.2, -0.5);
  b.advantages = Eigen::Vector3d(1.0, -0.5, 2.0);
  b.returns_ext = b.returns_int = Eigen::Vector3d::Zero();
  PolicyGrads g = PolicyGrads::ZerosLike(net);
  PpoLoss(net, b, cfg, false, &g);
  auto loss = [&] { return PpoLoss(net, b, cfg, false).total; };
  const double gw0 = CentralDifference(net.policy_head.weights()[0](0, 0), loss);
  const double gw1 = CentralDifference(net.policy_head.weights()[0](1, 0), loss);
  const double gb = CentralDifference(net.trunk.biases()[0](0), loss);
  EXPECT_LT(RelativeError(g.policy.weights[0](0, 0), gw0), 1e-4);
  EXPECT_LT(RelativeError(g.policy.weights[0](1, 0), gw1), 1e-4);
  EXPECT_LT(RelativeError(g.trunk.biases[0](0), gb), 1e-4);
}

TEST(PpoLossTest, IntrinsicHeadUntouchedWhenNotTrained) {
  Rng rng(5);
  const PolicyNet net = ToyNet(rng);
  const Minibatch batch = ToyBatch(net, rng, 8);
  PolicyGrads g = PolicyGrads::ZerosLike(net);
  PpoLoss(net, batch, PpoConfig{}, false, &g);
  EXPECT_EQ(g.value_int.SquaredNorm(), 0.0);
}

RolloutBuffer BanditBuffer(const PolicyNet& net, Rng& rng, int n) {
  RolloutBuffer buf(n, 1);
  const std::vector<double> obs = {0.5};
  for (int i = 0; i < n; ++i) {
    const ActResult a = Act(net, obs, &rng);
    buf.Add({obs, a.action, a.log_prob, a.action == 0 ? 1.0 : 0.0, 0.0, a.value_ext, 0.0, true,
             0.0});
  }
  buf.Finalize(0.0, 0.0, PpoConfig{});
  // Fixed advantage: +1 for action 0, 0 otherwise.
  for (int i = 0; i < n; ++i) buf.advantages(i) = buf.actions[i] == 0 ? 1.0 : 0.0;
  return buf;
}

double ProbAction0(const PolicyNet& net) {
  const std::vector<double> obs = {0.5};
  return std::exp(Act(net, obs, nullptr, true).log_probs(0));
}

TEST(PpoUpdateTest, BanditProbabilityRisesMonotonically) {
  Rng rng(7);
  PolicyNet net = PolicyNet::Create(1, {8, 8}, 2, rng);
  PolicyAdam adam = PolicyAdam::For(net);
  PpoConfig cfg;
  cfg.target_kl = 0.0;
  double prev = ProbAction0(net);
  for (int update = 0; update < 50; ++update) {
    const RolloutBuffer buf = BanditBuffer(net, rng, 128);
    PpoUpdate(net, adam, buf, cfg, 3e-4, rng, false);
    const double p = ProbAction0(net);
    EXPECT_GT(p, prev) << "update " << update;
    prev = p;
  }
  EXPECT_GT(prev, 0.6);
}

TEST(PpoUpdateTest, FirstMinibatchHasNoClipping) {
  Rng rng(8);
  PolicyNet net = PolicyNet::Create(1, {8}, 2, rng);
  PolicyAdam adam = PolicyAdam::For(net);
  const RolloutBuffer buf = BanditBuffer(net, rng, 128);
  const UpdateStats stats = PpoUpdate(net, adam, buf, PpoConfig{}, 3e-4, rng, false);
  EXPECT_EQ(stats.first_minibatch_clip_fraction, 0.0);
  EXPECT_GT(stats.minibatches, 0);
}

TEST(PpoUpdateTest, KlEarlyStopBoundsTheUpdate) {
  Rng rng(9);
  PolicyNet net = PolicyNet::Create(1, {8}, 2, rng);
  const RolloutBuffer buf = BanditBuffer(net, rng, 256);
  PpoConfig cfg;
  PolicyNet free_net = net, capped_net = net;
  PolicyAdam a1 = PolicyAdam::For(net), a2 = PolicyAdam::For(net);
  Rng r1(1), r2(1);
  cfg.target_kl = 0.0;
  const UpdateStats free_stats = PpoUpdate(free_net, a1, buf, cfg, 0.05, r1, false);
  cfg.target_kl = 1e-4;
  const UpdateStats capped = PpoUpdate(capped_net, a2, buf, cfg, 0.05, r2, false);
  EXPECT_FALSE(free_stats.kl_stopped);
  EXPECT_TRUE(capped.kl_stopped);
  EXPECT_LT(capped.minibatches, free_stats.minibatches);
}

TEST(ActTest, UniformLogitsSampleUniformly) {
  Rng rng(10);
  PolicyNet net = PolicyNet::Create(kObservationSize, {4}, kNumActions, rng);
  net.policy_head.weights()[0].setZero();
  net.policy_head.biases()[0].setZero();
  const Observation o{};
  std::vector<int> counts(kNumActions, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[Act(net, o, &rng).action];
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(draws), 1.0 / kNumActions, 0.02);
}

TEST(ActTest, ArgmaxDeterministicAndLogProbConsistent) {
  Rng rng(11);
  const PolicyNet net = PolicyNet::ForCropObservation({16, 16}, rng);
  Observation o{};
  o[0] = 30;
  o[1] = 25;
  const ActResult a = Act(net, o, nullptr, true);
  EXPECT_EQ(Act(net, o, nullptr, true).action, a.action);
  const ActResult s = Act(net, o, &rng);
  const Eigen::VectorXd logits =
      net.Forward(Eigen::Map<const Eigen::VectorXd>(o.data(), kObservationSize)).logits.col(0);
  const Eigen::VectorXd soft = (logits.array() - logits.maxCoeff()).exp();
  EXPECT_NEAR(std::exp(s.log_prob), soft(s.action) / soft.sum(), 1e-9);
}

TEST(ActTest, RejectsBadObservations) {
  Rng rng(12);
  const PolicyNet net = PolicyNet::ForCropObservation({8}, rng);
  Observation o{};
  o[3] = std::nan("");
  EXPECT_THROW(Act(net, o, &rng), ContractViolation);
  EXPECT_THROW(Act(net, std::vector<double>(3, 0.0), &rng), ContractViolation);
  EXPECT_THROW(Act(net, Observation{}, nullptr), ContractViolation);
}

void FillBuffer(RolloutBuffer& buf, Rng& rng, double lambda) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> obs(kObservationSize, 0.0);
  for (int i = 0; i < buf.capacity(); ++i) {
    buf.Add({obs, i % kNumActions, -3.2, 100.0 * u(rng), u(rng), u(rng), u(rng),
             (i + 1) % 7 == 0, lambda});
  }
}

TEST(BufferTest, CoupledWithZeroLambdaEqualsPlain) {
  Rng a(13), b(13);
  RolloutBuffer coupled(64), plain(64);
  FillBuffer(coupled, a, 0.0);
  FillBuffer(plain, b, 0.0);
  PpoConfig cc, pc;
  cc.mode = AdvantageMode::kCoupled;
  pc.mode = AdvantageMode::kPlain;
  coupled.Finalize(0.3, 0.1, cc);
  plain.Finalize(0.3, 0.1, pc);
  EXPECT_EQ(coupled.advantages, plain.advantages);
  EXPECT_EQ(coupled.returns_ext, plain.returns_ext);
}

TEST(BufferTest, AdditiveFoldsIntrinsicIntoExtrinsic) {
  Rng a(14);
  RolloutBuffer buf(32);
  FillBuffer(buf, a, 0.0);
  PpoConfig cfg;
  cfg.mode = AdvantageMode::kAdditive;
  cfg.reward_scale = 1.0;
  buf.Finalize(0.0, 0.0, cfg);
  std::vector<double> r(32), v(buf.values_ext);
  v.push_back(0.0);
  for (int i = 0; i < 32; ++i) r[i] = buf.rewards_ext[i] + 0.1 * buf.rewards_int[i];
  EXPECT_LT((buf.advantages_ext - Gae(r, v, buf.dones, 0.99, 0.95)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BufferTest, CapacityAndFinalizeContracts) {
  RolloutBuffer buf(2);
  std::vector<double> obs(kObservationSize, 0.0);
  buf.Add({obs, 0, 0, 0, 0, 0, 0, false, 0});
  EXPECT_THROW(buf.Finalize(0, 0, PpoConfig{}), ContractViolation);
  buf.Add({obs, 0, 0, 0, 0, 0, 0, false, 0});
  EXPECT_TRUE(buf.full());
  EXPECT_THROW(buf.Add({obs, 0, 0, 0, 0, 0, 0, false, 0}), ContractViolation);
}

TEST(PpoConfigTest, Validation) {
  PpoConfig cfg;
  cfg.target_kl = -1.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = PpoConfig{};
  cfg.minibatch_size = 4096;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  EXPECT_EQ(ParseAdvantageMode("additive"), AdvantageMode::kAdditive);
  EXPECT_THROW(ParseAdvantageMode("mixed"), ConfigError);
}

}  // namespace
}  // namespace croprl
