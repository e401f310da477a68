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

#ifndef CROPRL_NOISE_H_
#define CROPRL_NOISE_H_

#include <string>
#include <string_view>
#include <vector>

#include "croprl/crop_env.h"
#include "croprl/rng.h"

namespace croprl {

// How the second argument of a Gaussian noise term is read.
enum class ParamInterpretation { kStd, kVariance };

std::string_view ToString(ParamInterpretation p);
ParamInterpretation ParseParamInterpretation(std::string_view text);

struct NoiseConfig {
  double temp_threshold = 0.3;
  double rain_threshold = 0.5;
  double moisture_threshold = 0.7;
  double temp_sigma_base = 2.0;       // deg C at alpha = 1
  double rain_bias_scale = 0.05;
  double rain_noise_param = 0.01;
  double moisture_noise_param = 0.02;
  ParamInterpretation rain_interpretation = ParamInterpretation::kStd;
  ParamInterpretation moisture_interpretation = ParamInterpretation::kStd;
  int moisture_layers = 1;            // soil-moisture indices perturbed

  void Validate() const;
};

// One generator per channel so that gating one channel on or off never
// shifts the draws of another.
struct NoiseStreams {
  Rng temperature;
  Rng rainfall;
  Rng moisture;

  static NoiseStreams FromSeed(std::uint64_t seed);
};

struct ChannelActivation {
  bool temperature = false;
  bool rainfall = false;
  bool moisture = false;

  friend bool operator==(ChannelActivation, ChannelActivation) = default;
};

// Hierarchical gating: each channel is live strictly above its threshold.
ChannelActivation ActiveChannels(double alpha, const NoiseConfig& cfg);

double TemperatureNoiseStd(double alpha, const NoiseConfig& cfg);
double RainNoiseStd(double alpha, const NoiseConfig& cfg);
double MoistureNoiseStd(double alpha, const NoiseConfig& cfg);

// temp + N(0, (temp_sigma_base * alpha)^2).
double TempNoise(double temp, double alpha, const NoiseConfig& cfg, Rng& rng);
// rain + bias * alpha * rain + N(0, .), floored at zero.
double RainNoise(double rain, double alpha, const NoiseConfig& cfg, Rng& rng);
// moisture + clip(N(0, .), 0, 1), then clipped to [0, 1].
double MoistureNoise(double moisture, double alpha, const NoiseConfig& cfg,
                     Rng& rng);

// Applies the active channels to a copy of `observation`; every other index
// is returned bit-for-bit. alpha must lie in [0, 1].
Observation Inject(const Observation& observation, double alpha,
                   const NoiseConfig& cfg, NoiseStreams& streams);

// Fixed-magnitude perturbations used for evaluation only.
enum class EvalCondition {
  kClean,
  kTemperature,     // Gaussian, sigma 2 deg C
  kRainfall,        // multiplicative U(0.9, 1.1)
  kSoilMoisture,    // additive U(-0.02, 0.02), clipped to [0, 1]
  kSolarRadiation,  // multiplicative U(0.9, 1.1)
  kCombined,        // temperature + rainfall
};

std::string_view ToString(EvalCondition c);
EvalCondition ParseEvalCondition(std::string_view text);
std::vector<EvalCondition> ParseEvalConditions(std::string_view csv);

Observation EvalPerturbation(const Observation& observation,
                             EvalCondition condition, Rng& rng,
                             int moisture_layers = 1);

}  // namespace croprl

#endif  // CROPRL_NOISE_H_
