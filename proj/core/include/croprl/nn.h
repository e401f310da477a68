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

#ifndef CROPRL_NN_H_
#define CROPRL_NN_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "croprl/rng.h"

namespace croprl::nn {

enum class OutputActivation : std::uint32_t { kIdentity = 0, kRelu = 1 };

// Fully connected feed-forward network: ReLU on hidden layers, identity (or
// optionally ReLU) on the output layer. Weights are stored [out x in], so a
// batch is a matrix whose columns are samples.
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized network. Throws ConfigError unless every size is
  // positive and there are at least two of them.
  explicit Mlp(std::vector<int> layer_sizes,
               OutputActivation output = OutputActivation::kIdentity);

  // He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases.
  static Mlp HeUniform(std::vector<int> layer_sizes, Rng& rng,
                       OutputActivation output = OutputActivation::kIdentity);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  OutputActivation output_activation() const { return output_; }

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  std::size_t parameter_count() const;
  bool AllFinite() const;

  Eigen::VectorXd Forward(const Eigen::VectorXd& input) const;

  // Post-activation outputs of every layer; activations[0] is the input.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;
  };
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& inputs,
                               Cache* cache = nullptr) const;

  friend bool operator==(const Mlp&, const Mlp&);

 private:
  bool ActivatesLayer(int layer) const;

  std::vector<int> layer_sizes_;
  OutputActivation output_ = OutputActivation::kIdentity;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// Gradients (or any other tensor set) shaped like an Mlp's parameters.
struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGrads ZerosLike(const Mlp& net);
  double SquaredNorm() const;
  bool AllFinite() const;
  void Scale(double factor);
};

// Exact gradient of dot(Forward(input), output_grad) w.r.t. every parameter.
MlpGrads Backward(const Mlp& net, const Eigen::VectorXd& input,
                  const Eigen::VectorXd& output_grad);

// Batched backward pass over a cache produced by ForwardBatch. Parameter
// gradients are summed over columns and accumulated into `grads`; the
// gradient w.r.t. the inputs is returned.
Eigen::MatrixXd BackwardBatch(const Mlp& net, const Mlp::Cache& cache,
                              const Eigen::MatrixXd& output_grad,
                              MlpGrads& grads);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  MlpGrads first_moment;
  MlpGrads second_moment;
  std::int64_t step_count = 0;
  AdamConfig config;

  static AdamState For(const Mlp& net, AdamConfig config = {});
};

// One bias-corrected Adam step. Rejects non-finite gradients with
// NumericError and leaves both `net` and `state` untouched in that case.
void AdamStep(Mlp& net, const MlpGrads& grads, AdamState& state, double lr);

// lr0 * (1 - progress), floored at zero.
double LinearDecayLr(double lr0, double progress);

// Checkpoint file: "CROPRLNN" magic, u32 format version, u32 network count,
// then per network: u32 output activation, u32 layer count, u32 sizes, and
// row-major weights followed by biases for each layer. All integers and
// IEEE-754 doubles are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void SaveNetworks(std::ostream& out, std::span<const Mlp> nets);
std::vector<Mlp> LoadNetworks(std::istream& in);

}  // namespace croprl::nn

#endif  // CROPRL_NN_H_
