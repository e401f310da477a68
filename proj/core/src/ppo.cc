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

#include "croprl/ppo.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "croprl/errors.h"

namespace croprl {

std::string_view ToString(AdvantageMode mode) {
  switch (mode) {
    case AdvantageMode::kCoupled: return "coupled";
    case AdvantageMode::kAdditive: return "additive";
    case AdvantageMode::kPlain: return "plain";
  }
  return "coupled";
}

AdvantageMode ParseAdvantageMode(std::string_view text) {
  if (text == "coupled") return AdvantageMode::kCoupled;
  if (text == "additive") return AdvantageMode::kAdditive;
  if (text == "plain") return AdvantageMode::kPlain;
  throw ConfigError("unknown advantage mode '" + std::string(text) + "'");
}

void PpoConfig::Validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(gamma)) throw ConfigError("ppo.gamma must lie in [0, 1]");
  if (!in_unit(gae_lambda)) throw ConfigError("ppo.gae_lambda must lie in [0, 1]");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw ConfigError("ppo.clip_epsilon must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be positive");
  if (minibatch_size < 2) throw ConfigError("ppo.minibatch_size must be at least 2");
  if (epochs < 1) throw ConfigError("ppo.epochs must be at least 1");
  if (buffer_size < minibatch_size) {
    throw ConfigError("ppo.buffer_size must be at least ppo.minibatch_size");
  }
  if (entropy_coef < 0.0 || value_coef < 0.0) {
    throw ConfigError("ppo loss coefficients must be non-negative");
  }
  if (!(max_grad_norm > 0.0)) throw ConfigError("ppo.max_grad_norm must be positive");
  if (!(target_kl >= 0.0)) throw ConfigError("ppo.target_kl must be non-negative");
  if (additive_coef < 0.0) throw ConfigError("ppo.additive_coef must be non-negative");
  if (!(reward_scale > 0.0)) throw ConfigError("ppo.reward_scale must be positive");
  if (hidden.empty()) throw ConfigError("ppo.hidden needs at least one layer");
  for (int h : hidden) {
    if (h <= 0) throw ConfigError("ppo.hidden sizes must be positive");
  }
}

PolicyNet PolicyNet::Create(int observation_size, const std::vector<int>& hidden,
                            int num_actions, Rng& rng, EmbeddingHook hook,
                            int embedding_size) {
  if (observation_size <= 0 || num_actions < 2 || hidden.empty()) {
    throw ConfigError("policy network shape is invalid");
  }
  if (embedding_size < 0) embedding_size = observation_size;
  if (!hook && embedding_size != observation_size) {
    throw ConfigError("embedding size differs from observation size without a hook");
  }
  PolicyNet net;
  std::vector<int> trunk_sizes = {embedding_size};
  trunk_sizes.insert(trunk_sizes.end(), hidden.begin(), hidden.end());
  net.trunk = nn::Mlp::HeUniform(trunk_sizes, rng, nn::OutputActivation::kRelu);
  const int width = hidden.back();
  net.policy_head = nn::Mlp::HeUniform({width, num_actions}, rng);
  // Small policy logits keep the initial distribution close to uniform.
  net.policy_head.weights()[0] *= 0.01;
  net.value_ext_head = nn::Mlp::HeUniform({width, 1}, rng);
  net.value_int_head = nn::Mlp::HeUniform({width, 1}, rng);
  net.input_offset = Eigen::VectorXd::Zero(observation_size);
  net.input_scale = Eigen::VectorXd::Ones(observation_size);
  net.embedding = std::move(hook);
  return net;
}

namespace {

void ApplyCropScaling(PolicyNet& net) {
  const ObservationScaling& s = DefaultObservationScaling();
  net.input_offset = Eigen::Map<const Eigen::VectorXd>(s.offset.data(), kObservationSize);
  net.input_scale = Eigen::Map<const Eigen::VectorXd>(s.scale.data(), kObservationSize);
}

}  // namespace

PolicyNet PolicyNet::ForCropObservation(const std::vector<int>& hidden, Rng& rng) {
  PolicyNet net = Create(kObservationSize, hidden, kNumActions, rng);
  ApplyCropScaling(net);
  return net;
}

PolicyNet PolicyNet::FromNetworks(std::vector<nn::Mlp> nets) {
  if (nets.size() != 4) {
    throw ConfigError("policy checkpoint must hold exactly four networks");
  }
  PolicyNet net;
  net.trunk = std::move(nets[0]);
  net.policy_head = std::move(nets[1]);
  net.value_ext_head = std::move(nets[2]);
  net.value_int_head = std::move(nets[3]);
  const int width = net.trunk.output_size();
  if (net.policy_head.input_size() != width || net.value_ext_head.input_size() != width ||
      net.value_int_head.input_size() != width || net.value_ext_head.output_size() != 1 ||
      net.value_int_head.output_size() != 1) {
    throw ConfigError("policy checkpoint networks have inconsistent shapes");
  }
  const int n = net.trunk.input_size();
  if (n == kObservationSize) {
    ApplyCropScaling(net);
  } else {
    net.input_offset = Eigen::VectorXd::Zero(n);
    net.input_scale = Eigen::VectorXd::Ones(n);
  }
  return net;
}

std::vector<nn::Mlp> PolicyNet::Networks() const {
  return {trunk, policy_head, value_ext_head, value_int_head};
}

Eigen::MatrixXd PolicyNet::Preprocess(const Eigen::MatrixXd& observations) const {
  if (observations.rows() != input_offset.size()) {
    throw ContractViolation("observation length does not match the policy input");
  }
  Eigen::MatrixXd x = (observations.colwise() - input_offset).array().colwise() /
                      input_scale.array();
  x = x.unaryExpr([](double v) { return SymLog(v); });
  if (!embedding) return x;
  Eigen::MatrixXd out(trunk.input_size(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::VectorXd e = embedding(x.col(c));
    if (e.size() != trunk.input_size()) {
      throw ContractViolation("embedding hook returned the wrong length");
    }
    out.col(c) = e;
  }
  return out;
}

PolicyNet::Output PolicyNet::Forward(const Eigen::MatrixXd& observations,
                                     bool keep_cache) const {
  Output out;
  const Eigen::MatrixXd features =
      trunk.ForwardBatch(Preprocess(observations), keep_cache ? &out.trunk_cache : nullptr);
  out.logits = policy_head.ForwardBatch(features, keep_cache ? &out.policy_cache : nullptr);
  out.value_ext =
      value_ext_head.ForwardBatch(features, keep_cache ? &out.value_ext_cache : nullptr);
  out.value_int =
      value_int_head.ForwardBatch(features, keep_cache ? &out.value_int_cache : nullptr);
  return out;
}

PolicyGrads PolicyGrads::ZerosLike(const PolicyNet& net) {
  return {nn::MlpGrads::ZerosLike(net.trunk), nn::MlpGrads::ZerosLike(net.policy_head),
          nn::MlpGrads::ZerosLike(net.value_ext_head),
          nn::MlpGrads::ZerosLike(net.value_int_head)};
}

double PolicyGrads::SquaredNorm() const {
  return trunk.SquaredNorm() + policy.SquaredNorm() + value_ext.SquaredNorm() +
         value_int.SquaredNorm();
}

bool PolicyGrads::AllFinite() const {
  return trunk.AllFinite() && policy.AllFinite() && value_ext.AllFinite() &&
         value_int.AllFinite();
}

void PolicyGrads::Scale(double factor) {
  trunk.Scale(factor);
  policy.Scale(factor);
  value_ext.Scale(factor);
  value_int.Scale(factor);
}

PolicyAdam PolicyAdam::For(const PolicyNet& net) {
  return {nn::AdamState::For(net.trunk), nn::AdamState::For(net.policy_head),
          nn::AdamState::For(net.value_ext_head), nn::AdamState::For(net.value_int_head)};
}

void ApplyAdam(PolicyNet& net, const PolicyGrads& grads, PolicyAdam& adam, double lr) {
  if (!grads.AllFinite()) {
    throw NumericError("non-finite policy gradient; update rejected");
  }
  nn::AdamStep(net.trunk, grads.trunk, adam.trunk, lr);
  nn::AdamStep(net.policy_head, grads.policy, adam.policy, lr);
  nn::AdamStep(net.value_ext_head, grads.value_ext, adam.value_ext, lr);
  nn::AdamStep(net.value_int_head, grads.value_int, adam.value_int, lr);
}

Eigen::VectorXd LogSoftmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

ActResult Act(const PolicyNet& net, std::span<const double> observation, Rng* rng,
              bool deterministic) {
  if (static_cast<Eigen::Index>(observation.size()) != net.input_offset.size()) {
    throw ContractViolation("observation length does not match the policy input");
  }
  for (double v : observation) {
    if (!std::isfinite(v)) throw ContractViolation("observation contains a non-finite value");
  }
  if (!deterministic && rng == nullptr) {
    throw ContractViolation("stochastic action selection needs an rng");
  }
  const Eigen::Map<const Eigen::VectorXd> x(observation.data(),
                                            static_cast<Eigen::Index>(observation.size()));
  const PolicyNet::Output out = net.Forward(x);
  ActResult result;
  result.log_probs = LogSoftmax(out.logits.col(0));
  result.value_ext = out.value_ext(0);
  result.value_int = out.value_int(0);
  if (!result.log_probs.allFinite()) {
    throw NumericError("policy produced non-finite log-probabilities");
  }
  if (deterministic) {
    Eigen::Index best = 0;
    result.log_probs.maxCoeff(&best);
    result.action = static_cast<int>(best);
  } else {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(*rng);
    double cumulative = 0.0;
    const int n = static_cast<int>(result.log_probs.size());
    result.action = n - 1;
    for (int a = 0; a < n; ++a) {
      cumulative += std::exp(result.log_probs(a));
      if (u < cumulative) {
        result.action = a;
        break;
      }
    }
  }
  result.log_prob = result.log_probs(result.action);
  return result;
}

Eigen::VectorXd Gae(std::span<const double> rewards, std::span<const double> values,
                    const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw ContractViolation("gae needs n rewards, n dones and n + 1 values");
  }
  Eigen::VectorXd adv(static_cast<Eigen::Index>(n));
  double next = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * values[i + 1] * live - values[i];
    next = delta + gamma * lambda * live * next;
    adv(static_cast<Eigen::Index>(i)) = next;
  }
  return adv;
}

Eigen::VectorXd NormalizeAdvantages(const Eigen::VectorXd& advantages) {
  if (advantages.size() < 2) {
    throw ContractViolation("advantage normalization needs at least two entries");
  }
  const double mean = advantages.mean();
  const double var = (advantages.array() - mean).square().mean();
  return (advantages.array() - mean) / (std::sqrt(var) + 1e-8);
}

Eigen::VectorXd CombinedAdvantage(const Eigen::VectorXd& ext_normalized,
                                  const Eigen::VectorXd& int_normalized,
                                  double lambda_int) {
  if (ext_normalized.size() != int_normalized.size()) {
    throw ContractViolation("advantage channels differ in length");
  }
  return ext_normalized + lambda_int * int_normalized;
}

Eigen::VectorXd CombinedAdvantage(const Eigen::VectorXd& ext_normalized,
                                  const Eigen::VectorXd& int_normalized,
                                  const Eigen::VectorXd& lambda_int) {
  if (ext_normalized.size() != int_normalized.size() ||
      lambda_int.size() != ext_normalized.size()) {
    throw ContractViolation("advantage channels differ in length");
  }
  Eigen::VectorXd out = ext_normalized;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    // A zero weight leaves the extrinsic value untouched bit for bit.
    if (lambda_int(i) != 0.0) out(i) += lambda_int(i) * int_normalized(i);
  }
  return out;
}

RolloutBuffer::RolloutBuffer(int capacity, int observation_size) : capacity_(capacity) {
  if (capacity < 2 || observation_size <= 0) {
    throw ConfigError("rollout buffer needs capacity >= 2 and a positive observation size");
  }
  observations.resize(observation_size, capacity);
  actions.reserve(static_cast<std::size_t>(capacity));
  Clear();
}

void RolloutBuffer::Clear() {
  size_ = 0;
  finalized_ = false;
  actions.clear();
  log_probs.clear();
  rewards_ext.clear();
  rewards_int.clear();
  values_ext.clear();
  values_int.clear();
  lambda_int.clear();
  dones.clear();
}

void RolloutBuffer::Add(const Step& step) {
  if (full()) throw ContractViolation("rollout buffer is full");
  if (static_cast<Eigen::Index>(step.observation.size()) != observations.rows()) {
    throw ContractViolation("rollout observation has the wrong length");
  }
  observations.col(size_) = Eigen::Map<const Eigen::VectorXd>(
      step.observation.data(), static_cast<Eigen::Index>(step.observation.size()));
  actions.push_back(step.action);
  log_probs.push_back(step.log_prob);
  rewards_ext.push_back(step.reward_ext);
  rewards_int.push_back(step.reward_int);
  values_ext.push_back(step.value_ext);
  values_int.push_back(step.value_int);
  lambda_int.push_back(step.lambda_int);
  dones.push_back(step.done);
  ++size_;
  finalized_ = false;
}

void RolloutBuffer::Finalize(double bootstrap_ext, double bootstrap_int,
                             const PpoConfig& cfg) {
  if (size_ < 2) throw ContractViolation("rollout buffer needs at least two steps");
  const auto n = static_cast<std::size_t>(size_);
  std::vector<double> r_ext(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = rewards_ext[i];
    if (cfg.mode == AdvantageMode::kAdditive) r += cfg.additive_coef * rewards_int[i];
    r_ext[i] = r * cfg.reward_scale;
  }
  std::vector<double> v_ext(values_ext);
  v_ext.push_back(bootstrap_ext);
  std::vector<double> v_int(values_int);
  v_int.push_back(bootstrap_int);

  advantages_ext = Gae(r_ext, v_ext, dones, cfg.gamma, cfg.gae_lambda);
  advantages_int = Gae(rewards_int, v_int, dones, cfg.gamma, cfg.gae_lambda);
  returns_ext = advantages_ext +
                Eigen::Map<const Eigen::VectorXd>(values_ext.data(), size_);
  returns_int = advantages_int +
                Eigen::Map<const Eigen::VectorXd>(values_int.data(), size_);

  const Eigen::VectorXd ext_norm = NormalizeAdvantages(advantages_ext);
  if (cfg.mode == AdvantageMode::kCoupled) {
    const Eigen::VectorXd int_norm = NormalizeAdvantages(advantages_int);
    advantages = CombinedAdvantage(
        ext_norm, int_norm, Eigen::Map<const Eigen::VectorXd>(lambda_int.data(), size_));
  } else {
    advantages = ext_norm;
  }
  finalized_ = true;
}

Minibatch GatherMinibatch(const RolloutBuffer& buffer, std::span<const int> indices) {
  if (!buffer.finalized()) throw ContractViolation("rollout buffer is not finalized");
  const auto m = static_cast<Eigen::Index>(indices.size());
  Minibatch b;
  b.observations.resize(buffer.observations.rows(), m);
  b.actions.resize(indices.size());
  b.old_log_probs.resize(m);
  b.advantages.resize(m);
  b.returns_ext.resize(m);
  b.returns_int.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int i = indices[static_cast<std::size_t>(j)];
    if (i < 0 || i >= buffer.size()) throw ContractViolation("minibatch index out of range");
    b.observations.col(j) = buffer.observations.col(i);
    b.actions[static_cast<std::size_t>(j)] = buffer.actions[static_cast<std::size_t>(i)];
    b.old_log_probs(j) = buffer.log_probs[static_cast<std::size_t>(i)];
    b.advantages(j) = buffer.advantages(i);
    b.returns_ext(j) = buffer.returns_ext(i);
    b.returns_int(j) = buffer.returns_int(i);
  }
  return b;
}

double ClippedSurrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

LossTerms PpoLoss(const PolicyNet& net, const Minibatch& batch, const PpoConfig& cfg,
                  bool train_intrinsic_value, PolicyGrads* grads) {
  const Eigen::Index m = batch.observations.cols();
  if (m < 1 || static_cast<Eigen::Index>(batch.actions.size()) != m) {
    throw ContractViolation("minibatch is empty or inconsistent");
  }
  const bool want_grads = grads != nullptr;
  const PolicyNet::Output out = net.Forward(batch.observations, want_grads);
  const Eigen::Index num_actions = out.logits.rows();
  const double inv_m = 1.0 / static_cast<double>(m);

  LossTerms terms;
  Eigen::MatrixXd d_logits(num_actions, m);
  Eigen::RowVectorXd d_vext(m);
  Eigen::RowVectorXd d_vint(m);
  int clipped = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const int a = batch.actions[static_cast<std::size_t>(j)];
    if (a < 0 || a >= num_actions) throw ContractViolation("minibatch action out of range");
    const Eigen::VectorXd logp = LogSoftmax(out.logits.col(j));
    const Eigen::VectorXd p = logp.array().exp();
    const double entropy = -(p.array() * logp.array()).sum();
    const double ratio = std::exp(logp(a) - batch.old_log_probs(j));
    const double adv = batch.advantages(j);
    const double surrogate = ClippedSurrogate(ratio, adv, cfg.clip_epsilon);
    if (std::abs(ratio - 1.0) > cfg.clip_epsilon) ++clipped;
    terms.approx_kl += (ratio - 1.0 - std::log(ratio)) * inv_m;
    terms.policy -= surrogate * inv_m;
    terms.entropy += entropy * inv_m;
    const double e_ext = out.value_ext(j) - batch.returns_ext(j);
    const double e_int = out.value_int(j) - batch.returns_int(j);
    terms.value_ext += e_ext * e_ext * inv_m;
    terms.value_int += e_int * e_int * inv_m;

    if (want_grads) {
      // d(surrogate)/d(log pi(a)) is ratio * A on the unclipped branch, else 0.
      const double unclipped = ratio * adv;
      const double g = unclipped <= surrogate ? unclipped : 0.0;
      Eigen::VectorXd d = p * (g * inv_m);
      d(a) -= g * inv_m;
      // -entropy_coef * H contributes entropy_coef * p_k (log p_k + H) / m.
      d.array() += cfg.entropy_coef * inv_m * p.array() * (logp.array() + entropy);
      d_logits.col(j) = d;
      d_vext(j) = cfg.value_coef * 2.0 * e_ext * inv_m;
      d_vint(j) = train_intrinsic_value ? cfg.value_coef * 2.0 * e_int * inv_m : 0.0;
    }
  }
  terms.clip_fraction = static_cast<double>(clipped) * inv_m;
  terms.total = terms.policy + cfg.value_coef * terms.value_ext -
                cfg.entropy_coef * terms.entropy;
  if (train_intrinsic_value) terms.total += cfg.value_coef * terms.value_int;

  if (want_grads) {
    Eigen::MatrixXd d_features =
        nn::BackwardBatch(net.policy_head, out.policy_cache, d_logits, grads->policy);
    d_features += nn::BackwardBatch(net.value_ext_head, out.value_ext_cache, d_vext,
                                    grads->value_ext);
    if (train_intrinsic_value) {
      d_features += nn::BackwardBatch(net.value_int_head, out.value_int_cache, d_vint,
                                      grads->value_int);
    }
    nn::BackwardBatch(net.trunk, out.trunk_cache, d_features, grads->trunk);
  }
  return terms;
}

UpdateStats PpoUpdate(PolicyNet& net, PolicyAdam& adam, const RolloutBuffer& buffer,
                      const PpoConfig& cfg, double lr, Rng& shuffle_rng,
                      bool train_intrinsic_value) {
  if (!buffer.finalized()) throw ContractViolation("rollout buffer is not finalized");
  UpdateStats stats;
  stats.learning_rate = lr;
  std::vector<int> order(static_cast<std::size_t>(buffer.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto mb = static_cast<std::size_t>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.epochs && !stats.kl_stopped; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t len = std::min(mb, order.size() - start);
      if (len < 2) continue;
      const Minibatch batch =
          GatherMinibatch(buffer, std::span<const int>(order).subspan(start, len));
      PolicyGrads grads = PolicyGrads::ZerosLike(net);
      const LossTerms terms = PpoLoss(net, batch, cfg, train_intrinsic_value, &grads);
      if (!std::isfinite(terms.total)) {
        throw NumericError("non-finite ppo loss; update rejected");
      }
      if (cfg.target_kl > 0.0 && terms.approx_kl > 1.5 * cfg.target_kl) {
        stats.kl_stopped = true;
        break;
      }
      const double norm = std::sqrt(grads.SquaredNorm());
      if (norm > cfg.max_grad_norm) grads.Scale(cfg.max_grad_norm / norm);
      ApplyAdam(net, grads, adam, lr);

      if (stats.minibatches == 0) stats.first_minibatch_clip_fraction = terms.clip_fraction;
      stats.policy_loss += terms.policy;
      stats.value_loss_ext += terms.value_ext;
      stats.value_loss_int += terms.value_int;
      stats.entropy += terms.entropy;
      stats.clip_fraction += terms.clip_fraction;
      stats.approx_kl += terms.approx_kl;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double inv = 1.0 / stats.minibatches;
    stats.policy_loss *= inv;
    stats.value_loss_ext *= inv;
    stats.value_loss_int *= inv;
    stats.entropy *= inv;
    stats.clip_fraction *= inv;
    stats.approx_kl *= inv;
  }
  return stats;
}

}  // namespace croprl
