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

#include "croprl/nn.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "croprl/errors.h"

namespace croprl::nn {
namespace {

void CheckSizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) {
    throw ConfigError("mlp needs at least two layer sizes");
  }
  for (int s : sizes) {
    if (s <= 0) throw ConfigError("mlp layer sizes must be positive");
  }
}

void WriteU32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void WriteF64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t ReadU32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw ConfigError("checkpoint truncated");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double ReadF64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw ConfigError("checkpoint truncated");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

constexpr char kMagic[8] = {'C', 'R', 'O', 'P', 'R', 'L', 'N', 'N'};

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, OutputActivation output)
    : layer_sizes_(std::move(layer_sizes)), output_(output) {
  CheckSizes(layer_sizes_);
  for (std::size_t i = 0; i + 1 < layer_sizes_.size(); ++i) {
    weights_.push_back(
        Eigen::MatrixXd::Zero(layer_sizes_[i + 1], layer_sizes_[i]));
    biases_.push_back(Eigen::VectorXd::Zero(layer_sizes_[i + 1]));
  }
}

Mlp Mlp::HeUniform(std::vector<int> layer_sizes, Rng& rng,
                   OutputActivation output) {
  Mlp net(std::move(layer_sizes), output);
  for (auto& w : net.weights_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Row-major fill order so the draw sequence does not depend on Eigen's
    // storage order.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    n += static_cast<std::size_t>(weights_[i].size() + biases_[i].size());
  }
  return n;
}

bool Mlp::AllFinite() const {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!weights_[i].allFinite() || !biases_[i].allFinite()) return false;
  }
  return true;
}

bool Mlp::ActivatesLayer(int layer) const {
  return layer + 1 < num_layers() || output_ == OutputActivation::kRelu;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& input) const {
  if (input.size() != input_size()) {
    throw ConfigError("mlp input has " + std::to_string(input.size()) +
                      " entries, expected " + std::to_string(input_size()));
  }
  Eigen::VectorXd x = input;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::VectorXd z = weights_[l] * x + biases_[l];
    if (ActivatesLayer(l)) z = z.cwiseMax(0.0);
    x = std::move(z);
  }
  return x;
}

Eigen::MatrixXd Mlp::ForwardBatch(const Eigen::MatrixXd& inputs,
                                  Cache* cache) const {
  if (inputs.rows() != input_size()) {
    throw ConfigError("mlp batch has " + std::to_string(inputs.rows()) +
                      " rows, expected " + std::to_string(input_size()));
  }
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.reserve(weights_.size() + 1);
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXd x = inputs;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weights_[l] * x;
    z.colwise() += biases_[l];
    if (ActivatesLayer(l)) z = z.cwiseMax(0.0);
    x = std::move(z);
    if (cache != nullptr) cache->activations.push_back(x);
  }
  return x;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layer_sizes_ != b.layer_sizes_ || a.output_ != b.output_) return false;
  for (std::size_t i = 0; i < a.weights_.size(); ++i) {
    if (a.weights_[i] != b.weights_[i] || a.biases_[i] != b.biases_[i]) {
      return false;
    }
  }
  return true;
}

MlpGrads MlpGrads::ZerosLike(const Mlp& net) {
  MlpGrads g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(),
                                              net.weights()[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
  }
  return g;
}

double MlpGrads::SquaredNorm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    s += weights[i].squaredNorm() + biases[i].squaredNorm();
  }
  return s;
}

bool MlpGrads::AllFinite() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
  }
  return true;
}

void MlpGrads::Scale(double factor) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= factor;
    biases[i] *= factor;
  }
}

MlpGrads Backward(const Mlp& net, const Eigen::VectorXd& input,
                  const Eigen::VectorXd& output_grad) {
  if (output_grad.size() != net.output_size()) {
    throw ConfigError("output gradient has wrong length");
  }
  Mlp::Cache cache;
  net.ForwardBatch(input, &cache);
  MlpGrads grads = MlpGrads::ZerosLike(net);
  BackwardBatch(net, cache, output_grad, grads);
  return grads;
}

Eigen::MatrixXd BackwardBatch(const Mlp& net, const Mlp::Cache& cache,
                              const Eigen::MatrixXd& output_grad,
                              MlpGrads& grads) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.activations.size()) != layers + 1 ||
      output_grad.rows() != net.output_size() ||
      output_grad.cols() != cache.activations.back().cols()) {
    throw ConfigError("backward pass shapes do not match the forward cache");
  }
  Eigen::MatrixXd delta = output_grad;
  for (int l = layers - 1; l >= 0; --l) {
    const bool relu = l + 1 < layers ||
                      net.output_activation() == OutputActivation::kRelu;
    if (relu) {
      // Post-activation > 0 iff pre-activation > 0.
      delta = delta.cwiseProduct(
          (cache.activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads.weights[l].noalias() += delta * cache.activations[l].transpose();
    grads.biases[l].noalias() += delta.rowwise().sum();
    delta = net.weights()[l].transpose() * delta;
  }
  return delta;
}

AdamState AdamState::For(const Mlp& net, AdamConfig config) {
  AdamState s;
  s.first_moment = MlpGrads::ZerosLike(net);
  s.second_moment = MlpGrads::ZerosLike(net);
  s.config = config;
  return s;
}

void AdamStep(Mlp& net, const MlpGrads& grads, AdamState& state, double lr) {
  if (!(lr >= 0.0)) throw ContractViolation("adam learning rate must be >= 0");
  const int layers = net.num_layers();
  if (static_cast<int>(grads.weights.size()) != layers ||
      static_cast<int>(state.first_moment.weights.size()) != layers) {
    throw ConfigError("adam: gradient/moment shapes do not match parameters");
  }
  for (int l = 0; l < layers; ++l) {
    if (grads.weights[l].rows() != net.weights()[l].rows() ||
        grads.weights[l].cols() != net.weights()[l].cols() ||
        grads.biases[l].size() != net.biases()[l].size() ||
        state.first_moment.weights[l].size() != net.weights()[l].size() ||
        state.first_moment.biases[l].size() != net.biases()[l].size()) {
      throw ConfigError("adam: gradient/moment shapes do not match parameters");
    }
  }
  if (!grads.AllFinite()) {
    throw NumericError("adam: non-finite gradient, update rejected");
  }
  const auto& cfg = state.config;
  const std::int64_t t = state.step_count + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    param.array() -= lr * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.epsilon);
  };
  for (int l = 0; l < layers; ++l) {
    update(net.weights()[l], state.first_moment.weights[l],
           state.second_moment.weights[l], grads.weights[l]);
    update(net.biases()[l], state.first_moment.biases[l],
           state.second_moment.biases[l], grads.biases[l]);
  }
  state.step_count = t;
}

double LinearDecayLr(double lr0, double progress) {
  return std::max(0.0, lr0 * (1.0 - progress));
}

void SaveNetworks(std::ostream& out, std::span<const Mlp> nets) {
  out.write(kMagic, sizeof(kMagic));
  WriteU32(out, kCheckpointVersion);
  WriteU32(out, static_cast<std::uint32_t>(nets.size()));
  for (const Mlp& net : nets) {
    WriteU32(out, static_cast<std::uint32_t>(net.output_activation()));
    WriteU32(out, static_cast<std::uint32_t>(net.layer_sizes().size()));
    for (int s : net.layer_sizes()) WriteU32(out, static_cast<std::uint32_t>(s));
    for (int l = 0; l < net.num_layers(); ++l) {
      const auto& w = net.weights()[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) WriteF64(out, w(r, c));
      }
      for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i) {
        WriteF64(out, net.biases()[l](i));
      }
    }
  }
  if (!out) throw ConfigError("failed writing checkpoint");
}

std::vector<Mlp> LoadNetworks(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("not a croprl checkpoint (bad magic)");
  }
  const std::uint32_t version = ReadU32(in);
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  const std::uint32_t count = ReadU32(in);
  if (count > 1024) throw ConfigError("checkpoint network count implausible");
  std::vector<Mlp> nets;
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::uint32_t act = ReadU32(in);
    if (act > 1) throw ConfigError("checkpoint has unknown activation");
    const std::uint32_t num_sizes = ReadU32(in);
    if (num_sizes < 2 || num_sizes > 64) {
      throw ConfigError("checkpoint layer count implausible");
    }
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < num_sizes; ++i) {
      const std::uint32_t s = ReadU32(in);
      if (s == 0 || s > (1u << 20)) throw ConfigError("checkpoint size implausible");
      sizes.push_back(static_cast<int>(s));
    }
    Mlp net(sizes, static_cast<OutputActivation>(act));
    for (int l = 0; l < net.num_layers(); ++l) {
      auto& w = net.weights()[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = ReadF64(in);
      }
      for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i) {
        net.biases()[l](i) = ReadF64(in);
      }
    }
    nets.push_back(std::move(net));
  }
  return nets;
}

}  // namespace croprl::nn
