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


#ifndef CROPRL_TESTS_SUPPORT_FD_H_
#define CROPRL_TESTS_SUPPORT_FD_H_

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "croprl/nn.h"
#include "croprl/rng.h"

namespace croprl::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;
// Below this absolute gap both values are treated as zero.
inline constexpr double kFdAbsFloor = 1e-8;

// (f(x + h) - f(x - h)) / 2h with `param` restored afterwards.
template <typename F>
double CentralDifference(double& param, F&& f, double h = kFdStep) {
  const double saved = param;
  param = saved + h;
  const double up = f();
  param = saved - h;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * h);
}

inline double RelativeError(double analytic, double numeric) {
  const double gap = std::abs(analytic - numeric);
  if (gap < kFdAbsFloor) return 0.0;
  return gap / std::max(std::abs(analytic), std::abs(numeric));
}

// Worst relative error over every parameter of `net` for the scalar `loss`
// whose analytic gradient is `grads`.
template <typename F>
double WorstMlpGradientError(nn::Mlp& net, const nn::MlpGrads& grads, F&& loss) {
  double worst = 0.0;
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd& w = net.weights()[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double numeric = CentralDifference(w.data()[i], loss);
      worst = std::max(worst, RelativeError(grads.weights[l].data()[i], numeric));
    }
    Eigen::VectorXd& b = net.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double numeric = CentralDifference(b(i), loss);
      worst = std::max(worst, RelativeError(grads.biases[l](i), numeric));
    }
  }
  return worst;
}

// He-uniform weights with biases drawn from U(-0.5, 0.5) so that bias
// gradients are exercised away from zero.
inline nn::Mlp RandomMlp(std::vector<int> sizes, Rng& rng,
                         nn::OutputActivation output = nn::OutputActivation::kIdentity) {
  nn::Mlp net = nn::Mlp::HeUniform(std::move(sizes), rng, output);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (Eigen::VectorXd& b : net.biases()) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = u(rng);
  }
  return net;
}

inline Eigen::VectorXd RandomVector(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

}  // namespace croprl::testing

#endif  // CROPRL_TESTS_SUPPORT_FD_H_
