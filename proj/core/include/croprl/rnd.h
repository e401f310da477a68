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

#ifndef CROPRL_RND_H_
#define CROPRL_RND_H_

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "croprl/crop_env.h"
#include "croprl/nn.h"
#include "croprl/rng.h"

namespace croprl {

struct IntrinsicSchedule {
  double initial_weight = 1.0;
  double decay_start = 0.3;
  double decay_end = 0.7;
};

// Intrinsic advantage weight: flat at `initial_weight` until decay_start,
// linear to zero at decay_end, zero afterwards.
double LambdaInt(double p, const IntrinsicSchedule& schedule = {});

// Running per-dimension mean/variance (Welford). Normalize() is the identity
// until `warmup` samples have been seen, then standardizes and clips.
class ObservationNormalizer {
 public:
  ObservationNormalizer(int dim, std::int64_t warmup = 1000, double clip = 5.0);

  void Update(const Eigen::VectorXd& x);
  Eigen::VectorXd Normalize(const Eigen::VectorXd& x) const;

  std::int64_t count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd variance() const;

 private:
  std::int64_t warmup_;
  double clip_;
  std::int64_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

struct RndConfig {
  std::vector<int> hidden = {256, 256};
  int embedding_size = 64;
  double learning_rate = 3e-4;
  int minibatch_size = 64;
  int epochs = 1;
  std::int64_t normalizer_warmup = 1000;
  bool adaptive_bonus = true;
  double unvisited_bonus = 2.0;
  IntrinsicSchedule schedule;
};

// Random network distillation: a frozen random target and a trained
// predictor of the same shape; novelty is their squared embedding distance.
class RndNets {
 public:
  RndNets(int input_size, const RndConfig& cfg, Rng& rng);

  double IntrinsicReward(const Eigen::VectorXd& normalized_state) const;
  Eigen::VectorXd IntrinsicRewards(const Eigen::MatrixXd& states) const;

  // One Adam step on the batch-mean squared embedding error (columns are
  // states). Returns the loss before the step. Throws on an empty batch.
  double TrainPredictor(const Eigen::MatrixXd& batch);

  const nn::Mlp& target() const { return target_; }
  const nn::Mlp& predictor() const { return predictor_; }
  nn::Mlp& mutable_predictor() { return predictor_; }
  const nn::AdamState& predictor_adam() const { return adam_; }
  double learning_rate() const { return lr_; }

 private:
  nn::Mlp target_;
  nn::Mlp predictor_;
  nn::AdamState adam_;
  double lr_;
};

// Batch-mean squared embedding error of `predictor` against `target`
// (columns are states). The exact gradient is accumulated into `grads` when
// given. Throws ContractViolation on an empty batch.
double PredictorLoss(const nn::Mlp& predictor, const nn::Mlp& target,
                     const Eigen::MatrixXd& batch, nn::MlpGrads* grads = nullptr);

// Order-sensitive hash of every parameter bit of `net`.
std::uint64_t ParameterHash(const nn::Mlp& net);

struct CoverageAxis {
  double lower = 0.0;
  double upper = 1.0;
  double width = 1.0;

  int bins() const;
  int BinOf(double value) const;
};

struct CoverageBounds {
  CoverageAxis day{0.0, 200.0, 100.0};
  CoverageAxis cumulative_yield{0.0, 20000.0, 100.0};
  CoverageAxis soil_moisture{0.0, 1.0, 0.1};
  CoverageAxis cumulative_irrigation{0.0, 2100.0, 100.0};
};

using CoverageBin = std::array<int, 4>;

// Occupancy of the (day, cumulative yield, soil moisture, cumulative
// irrigation) grid. Values outside the bounds clamp to the edge bins.
class CoverageGrid {
 public:
  explicit CoverageGrid(CoverageBounds bounds = {});

  CoverageBin BinOf(double day, double cumulative_yield, double soil_moisture,
                    double cumulative_irrigation) const;
  CoverageBin BinOf(const Observation& observation) const;

  bool IsOccupied(const CoverageBin& bin) const;
  // Returns true when the bin was not occupied before.
  bool RecordVisit(const CoverageBin& bin);
  bool RecordVisit(const Observation& observation) {
    return RecordVisit(BinOf(observation));
  }

  std::int64_t total_bins() const { return total_; }
  std::int64_t occupied_count() const { return occupied_count_; }
  double Coverage() const;
  std::vector<std::int64_t> OccupiedIndices() const;
  void MarkOccupied(std::int64_t linear_index);

  const CoverageBounds& bounds() const { return bounds_; }
  // Adds `other`'s bins to this grid; bounds must match.
  void UnionWith(const CoverageGrid& other);

 private:
  std::int64_t Linear(const CoverageBin& bin) const;

  CoverageBounds bounds_;
  std::array<int, 4> dims_;
  std::int64_t total_;
  std::vector<bool> occupied_;
  std::int64_t occupied_count_ = 0;
};

}  // namespace croprl

#endif  // CROPRL_RND_H_
