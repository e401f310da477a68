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

#ifndef CROPRL_PPO_H_
#define CROPRL_PPO_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "croprl/crop_env.h"
#include "croprl/nn.h"
#include "croprl/rng.h"

namespace croprl {

// How extrinsic and intrinsic rewards reach the policy gradient.
//   kCoupled:  two GAE passes, each advantage stream normalized separately,
//              combined as ext + lambda_int * int.
//   kAdditive: r_ext + additive_coef * r_int through a single GAE pass.
//   kPlain:    extrinsic reward only.
enum class AdvantageMode { kCoupled, kAdditive, kPlain };

std::string_view ToString(AdvantageMode mode);
AdvantageMode ParseAdvantageMode(std::string_view text);

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;   // decays linearly with training progress
  int minibatch_size = 64;
  int epochs = 10;
  int buffer_size = 2048;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  // An update stops early once a minibatch's approximate KL divergence from
  // the rollout policy exceeds 1.5 * target_kl; 0 disables the check.
  double target_kl = 0.03;
  AdvantageMode mode = AdvantageMode::kCoupled;
  double additive_coef = 0.1;
  // Multiplies the extrinsic channel before GAE and value regression; dollar
  // rewards span several orders of magnitude.
  double reward_scale = 0.01;
  std::vector<int> hidden = {256, 256, 256};
  bool intrinsic_on_clean_observation = true;

  void Validate() const;
};

// Maps a preprocessed observation to the trunk input; identity when unset.
using EmbeddingHook = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Shared ReLU trunk with a 25-way policy head and two scalar value heads
// (extrinsic and intrinsic).
struct PolicyNet {
  nn::Mlp trunk;
  nn::Mlp policy_head;
  nn::Mlp value_ext_head;
  nn::Mlp value_int_head;
  Eigen::VectorXd input_offset;
  Eigen::VectorXd input_scale;
  EmbeddingHook embedding;

  // `embedding_size` is the hook's output length (defaults to the
  // observation size when no hook is given).
  static PolicyNet Create(int observation_size, const std::vector<int>& hidden,
                          int num_actions, Rng& rng, EmbeddingHook hook = {},
                          int embedding_size = -1);
  // Policy for the crop observation with the default input scaling.
  static PolicyNet ForCropObservation(const std::vector<int>& hidden, Rng& rng);
  // Rebuilds a policy from checkpointed networks (trunk, policy, ext, int).
  static PolicyNet FromNetworks(std::vector<nn::Mlp> nets);
  std::vector<nn::Mlp> Networks() const;

  int observation_size() const { return static_cast<int>(input_offset.size()); }
  int num_actions() const { return policy_head.output_size(); }

  // SymLog((x - offset) / scale) per column, then the embedding hook.
  Eigen::MatrixXd Preprocess(const Eigen::MatrixXd& observations) const;

  struct Output {
    Eigen::MatrixXd logits;         // actions x batch
    Eigen::RowVectorXd value_ext;
    Eigen::RowVectorXd value_int;
    nn::Mlp::Cache trunk_cache;
    nn::Mlp::Cache policy_cache;
    nn::Mlp::Cache value_ext_cache;
    nn::Mlp::Cache value_int_cache;
  };
  Output Forward(const Eigen::MatrixXd& observations, bool keep_cache = false) const;

  friend bool operator==(const PolicyNet& a, const PolicyNet& b) {
    return a.trunk == b.trunk && a.policy_head == b.policy_head &&
           a.value_ext_head == b.value_ext_head &&
           a.value_int_head == b.value_int_head &&
           a.input_offset == b.input_offset && a.input_scale == b.input_scale;
  }
};

struct PolicyGrads {
  nn::MlpGrads trunk;
  nn::MlpGrads policy;
  nn::MlpGrads value_ext;
  nn::MlpGrads value_int;

  static PolicyGrads ZerosLike(const PolicyNet& net);
  double SquaredNorm() const;
  bool AllFinite() const;
  void Scale(double factor);
};

struct PolicyAdam {
  nn::AdamState trunk;
  nn::AdamState policy;
  nn::AdamState value_ext;
  nn::AdamState value_int;

  static PolicyAdam For(const PolicyNet& net);
};

// Adam on all four networks; non-finite gradients reject the whole update.
void ApplyAdam(PolicyNet& net, const PolicyGrads& grads, PolicyAdam& adam,
               double lr);

Eigen::VectorXd LogSoftmax(const Eigen::VectorXd& logits);

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  double value_ext = 0.0;
  double value_int = 0.0;
  Eigen::VectorXd log_probs;  // full distribution
};

// Samples from softmax(logits), or takes the argmax when `deterministic`
// (rng may then be null). Non-finite observations violate the contract.
ActResult Act(const PolicyNet& net, std::span<const double> observation,
              Rng* rng, bool deterministic = false);

// GAE(gamma, lambda). `values` carries one extra trailing bootstrap entry;
// dones[t] marks that the episode ended after step t, which cuts both the
// bootstrap and the advantage recursion.
Eigen::VectorXd Gae(std::span<const double> rewards,
                    std::span<const double> values,
                    const std::vector<bool>& dones, double gamma,
                    double lambda);

// (a - mean) / (population std + 1e-8). Needs at least two entries.
Eigen::VectorXd NormalizeAdvantages(const Eigen::VectorXd& advantages);

Eigen::VectorXd CombinedAdvantage(const Eigen::VectorXd& ext_normalized,
                                  const Eigen::VectorXd& int_normalized,
                                  double lambda_int);
Eigen::VectorXd CombinedAdvantage(const Eigen::VectorXd& ext_normalized,
                                  const Eigen::VectorXd& int_normalized,
                                  const Eigen::VectorXd& lambda_int);

// Fixed-capacity trajectory store with separate extrinsic and intrinsic
// channels. Episodes may span buffer boundaries.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(int capacity, int observation_size = kObservationSize);

  struct Step {
    std::span<const double> observation;
    int action = 0;
    double log_prob = 0.0;
    double reward_ext = 0.0;
    double reward_int = 0.0;
    double value_ext = 0.0;
    double value_int = 0.0;
    bool done = false;
    double lambda_int = 0.0;
  };

  void Add(const Step& step);
  void Clear();
  // Computes both advantage channels, return targets, and the combined
  // advantage per cfg.mode. Bootstrap values are for the state after the
  // last stored step (ignored if that step ended an episode).
  void Finalize(double bootstrap_ext, double bootstrap_int, const PpoConfig& cfg);

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }
  bool finalized() const { return finalized_; }

  Eigen::MatrixXd observations;  // observation_size x capacity
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards_ext;
  std::vector<double> rewards_int;
  std::vector<double> values_ext;
  std::vector<double> values_int;
  std::vector<double> lambda_int;
  std::vector<bool> dones;

  Eigen::VectorXd advantages_ext;
  Eigen::VectorXd advantages_int;
  Eigen::VectorXd advantages;     // combined, fed to the surrogate
  Eigen::VectorXd returns_ext;
  Eigen::VectorXd returns_int;

 private:
  int capacity_;
  int size_ = 0;
  bool finalized_ = false;
};

struct Minibatch {
  Eigen::MatrixXd observations;
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns_ext;
  Eigen::VectorXd returns_int;
};

Minibatch GatherMinibatch(const RolloutBuffer& buffer,
                          std::span<const int> indices);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A).
double ClippedSurrogate(double ratio, double advantage, double epsilon);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;      // -mean clipped surrogate
  double value_ext = 0.0;   // mean squared error
  double value_int = 0.0;
  double entropy = 0.0;     // mean policy entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;   // mean of (ratio - 1) - log(ratio)
};

// total = policy + value_coef * (value_ext [+ value_int]) - entropy_coef *
// entropy. When `grads` is non-null the exact gradient of `total` is
// accumulated into it.
LossTerms PpoLoss(const PolicyNet& net, const Minibatch& batch,
                  const PpoConfig& cfg, bool train_intrinsic_value,
                  PolicyGrads* grads = nullptr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss_ext = 0.0;
  double value_loss_int = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double first_minibatch_clip_fraction = 0.0;
  double learning_rate = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
  bool kl_stopped = false;
};

// `epochs` passes over the finalized buffer in shuffled minibatches, with
// global gradient-norm clipping and Adam at `lr`.
UpdateStats PpoUpdate(PolicyNet& net, PolicyAdam& adam,
                      const RolloutBuffer& buffer, const PpoConfig& cfg,
                      double lr, Rng& shuffle_rng, bool train_intrinsic_value);

}  // namespace croprl

#endif  // CROPRL_PPO_H_
