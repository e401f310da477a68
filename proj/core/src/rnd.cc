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

#include "croprl/rnd.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "croprl/errors.h"

namespace croprl {

double LambdaInt(double p, const IntrinsicSchedule& schedule) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractViolation("training progress must lie in [0, 1]");
  }
  if (p < schedule.decay_start) return schedule.initial_weight;
  if (p >= schedule.decay_end) return 0.0;
  return schedule.initial_weight * (schedule.decay_end - p) /
         (schedule.decay_end - schedule.decay_start);
}

ObservationNormalizer::ObservationNormalizer(int dim, std::int64_t warmup,
                                             double clip)
    : warmup_(warmup),
      clip_(clip),
      mean_(Eigen::VectorXd::Zero(dim)),
      m2_(Eigen::VectorXd::Zero(dim)) {}

void ObservationNormalizer::Update(const Eigen::VectorXd& x) {
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta.cwiseProduct(x - mean_);
}

Eigen::VectorXd ObservationNormalizer::variance() const {
  if (count_ < 2) return Eigen::VectorXd::Zero(mean_.size());
  return (m2_ / static_cast<double>(count_)).cwiseMax(0.0);
}

Eigen::VectorXd ObservationNormalizer::Normalize(const Eigen::VectorXd& x) const {
  if (count_ < warmup_) return x;
  const Eigen::VectorXd std = (variance().array() + 1e-8).sqrt();
  return ((x - mean_).array() / std.array()).cwiseMax(-clip_).cwiseMin(clip_);
}

RndNets::RndNets(int input_size, const RndConfig& cfg, Rng& rng)
    : lr_(cfg.learning_rate) {
  std::vector<int> sizes = {input_size};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.embedding_size);
  target_ = nn::Mlp::HeUniform(sizes, rng);
  predictor_ = nn::Mlp::HeUniform(sizes, rng);
  adam_ = nn::AdamState::For(predictor_);
}

double RndNets::IntrinsicReward(const Eigen::VectorXd& normalized_state) const {
  return (target_.Forward(normalized_state) -
          predictor_.Forward(normalized_state)).squaredNorm();
}

Eigen::VectorXd RndNets::IntrinsicRewards(const Eigen::MatrixXd& states) const {
  const Eigen::MatrixXd diff =
      target_.ForwardBatch(states) - predictor_.ForwardBatch(states);
  return diff.colwise().squaredNorm().transpose();
}

double PredictorLoss(const nn::Mlp& predictor, const nn::Mlp& target,
                     const Eigen::MatrixXd& batch, nn::MlpGrads* grads) {
  if (batch.cols() == 0) {
    throw ContractViolation("predictor training needs a non-empty batch");
  }
  const double n = static_cast<double>(batch.cols());
  const Eigen::MatrixXd goal = target.ForwardBatch(batch);
  nn::Mlp::Cache cache;
  const Eigen::MatrixXd prediction =
      predictor.ForwardBatch(batch, grads != nullptr ? &cache : nullptr);
  const Eigen::MatrixXd diff = prediction - goal;
  if (grads != nullptr) nn::BackwardBatch(predictor, cache, (2.0 / n) * diff, *grads);
  return diff.colwise().squaredNorm().sum() / n;
}

double RndNets::TrainPredictor(const Eigen::MatrixXd& batch) {
  nn::MlpGrads grads = nn::MlpGrads::ZerosLike(predictor_);
  const double loss = PredictorLoss(predictor_, target_, batch, &grads);
  nn::AdamStep(predictor_, grads, adam_, lr_);
  return loss;
}

std::uint64_t ParameterHash(const nn::Mlp& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h = Mix64(h);
  };
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights()[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) mix(w.data()[i]);
    const auto& b = net.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) mix(b(i));
  }
  return h;
}

int CoverageAxis::bins() const {
  return std::max(1, static_cast<int>(std::ceil((upper - lower) / width - 1e-9)));
}

int CoverageAxis::BinOf(double value) const {
  // The epsilon keeps values sitting exactly on a bin edge (0.3 / 0.1 is
  // 2.9999999999999996 in binary) in the upper bin.
  const double scaled = (value - lower) / width + 1e-9;
  const int raw = static_cast<int>(std::floor(scaled));
  return std::clamp(raw, 0, bins() - 1);
}

CoverageGrid::CoverageGrid(CoverageBounds bounds) : bounds_(bounds) {
  for (const CoverageAxis* axis :
       {&bounds_.day, &bounds_.cumulative_yield, &bounds_.soil_moisture,
        &bounds_.cumulative_irrigation}) {
    if (!(axis->width > 0.0 && axis->upper > axis->lower)) {
      throw ConfigError("coverage axis needs width > 0 and upper > lower");
    }
  }
  dims_ = {bounds_.day.bins(), bounds_.cumulative_yield.bins(),
           bounds_.soil_moisture.bins(), bounds_.cumulative_irrigation.bins()};
  total_ = 1;
  for (int d : dims_) total_ *= d;
  occupied_.assign(static_cast<std::size_t>(total_), false);
}

CoverageBin CoverageGrid::BinOf(double day, double cumulative_yield,
                                double soil_moisture,
                                double cumulative_irrigation) const {
  return {bounds_.day.BinOf(day), bounds_.cumulative_yield.BinOf(cumulative_yield),
          bounds_.soil_moisture.BinOf(soil_moisture),
          bounds_.cumulative_irrigation.BinOf(cumulative_irrigation)};
}

CoverageBin CoverageGrid::BinOf(const Observation& o) const {
  return BinOf(o[obs::kDay], o[obs::kCumulativeYield], o[obs::kSoilMoisture],
               o[obs::kCumulativeIrrigation]);
}

std::int64_t CoverageGrid::Linear(const CoverageBin& bin) const {
  std::int64_t index = 0;
  for (int i = 0; i < 4; ++i) {
    if (bin[i] < 0 || bin[i] >= dims_[i]) {
      throw ContractViolation("coverage bin out of range");
    }
    index = index * dims_[i] + bin[i];
  }
  return index;
}

bool CoverageGrid::IsOccupied(const CoverageBin& bin) const {
  return occupied_[static_cast<std::size_t>(Linear(bin))];
}

bool CoverageGrid::RecordVisit(const CoverageBin& bin) {
  auto slot = occupied_[static_cast<std::size_t>(Linear(bin))];
  if (slot) return false;
  slot = true;
  ++occupied_count_;
  return true;
}

double CoverageGrid::Coverage() const {
  return static_cast<double>(occupied_count_) / static_cast<double>(total_);
}

std::vector<std::int64_t> CoverageGrid::OccupiedIndices() const {
  std::vector<std::int64_t> out;
  for (std::int64_t i = 0; i < total_; ++i) {
    if (occupied_[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

void CoverageGrid::MarkOccupied(std::int64_t linear_index) {
  if (linear_index < 0 || linear_index >= total_) {
    throw ContractViolation("coverage index out of range");
  }
  auto slot = occupied_[static_cast<std::size_t>(linear_index)];
  if (!slot) {
    slot = true;
    ++occupied_count_;
  }
}

void CoverageGrid::UnionWith(const CoverageGrid& other) {
  if (other.dims_ != dims_) {
    throw ConfigError("cannot union coverage grids with different bounds");
  }
  for (std::int64_t i = 0; i < total_; ++i) {
    if (other.occupied_[static_cast<std::size_t>(i)]) MarkOccupied(i);
  }
}

}  // namespace croprl
