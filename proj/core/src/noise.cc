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

#include "croprl/noise.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "croprl/errors.h"

namespace croprl {
namespace {

double GaussianStd(double param, double alpha, ParamInterpretation interp) {
  const double scaled = param * alpha;
  return interp == ParamInterpretation::kStd ? scaled : std::sqrt(scaled);
}

void CheckAlpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractViolation("alpha must lie in [0, 1]");
  }
}

}  // namespace

std::string_view ToString(ParamInterpretation p) {
  return p == ParamInterpretation::kStd ? "std" : "variance";
}

ParamInterpretation ParseParamInterpretation(std::string_view text) {
  if (text == "std") return ParamInterpretation::kStd;
  if (text == "variance") return ParamInterpretation::kVariance;
  throw ConfigError("noise parameter interpretation must be 'std' or 'variance'");
}

void NoiseConfig::Validate() const {
  if (!(temp_threshold < rain_threshold && rain_threshold < moisture_threshold)) {
    throw ConfigError("noise thresholds must be strictly increasing");
  }
  if (!(temp_sigma_base >= 0 && rain_bias_scale >= 0 && rain_noise_param >= 0 &&
        moisture_noise_param >= 0)) {
    throw ConfigError("noise scales must be non-negative");
  }
  if (moisture_layers < 1 || moisture_layers > kMaxSoilLayers) {
    throw ConfigError("noise moisture_layers must be in [1, 3]");
  }
}

NoiseStreams NoiseStreams::FromSeed(std::uint64_t seed) {
  return NoiseStreams{Rng(DeriveSeed(seed, "noise.temperature")),
                      Rng(DeriveSeed(seed, "noise.rainfall")),
                      Rng(DeriveSeed(seed, "noise.moisture"))};
}

ChannelActivation ActiveChannels(double alpha, const NoiseConfig& cfg) {
  return {alpha > cfg.temp_threshold, alpha > cfg.rain_threshold,
          alpha > cfg.moisture_threshold};
}

double TemperatureNoiseStd(double alpha, const NoiseConfig& cfg) {
  return cfg.temp_sigma_base * alpha;
}

double RainNoiseStd(double alpha, const NoiseConfig& cfg) {
  return GaussianStd(cfg.rain_noise_param, alpha, cfg.rain_interpretation);
}

double MoistureNoiseStd(double alpha, const NoiseConfig& cfg) {
  return GaussianStd(cfg.moisture_noise_param, alpha,
                     cfg.moisture_interpretation);
}

double TempNoise(double temp, double alpha, const NoiseConfig& cfg, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, TemperatureNoiseStd(alpha, cfg));
  return temp + gauss(rng);
}

double RainNoise(double rain, double alpha, const NoiseConfig& cfg, Rng& rng) {
  if (rain < 0.0) throw ContractViolation("rainfall must be non-negative");
  std::normal_distribution<double> gauss(0.0, RainNoiseStd(alpha, cfg));
  const double noisy = rain + cfg.rain_bias_scale * alpha * rain + gauss(rng);
  return std::max(0.0, noisy);
}

double MoistureNoise(double moisture, double alpha, const NoiseConfig& cfg,
                     Rng& rng) {
  std::normal_distribution<double> gauss(0.0, MoistureNoiseStd(alpha, cfg));
  // The clip bounds the added term to [0, 1], so the term is never negative.
  const double term = std::clamp(gauss(rng), 0.0, 1.0);
  return std::clamp(moisture + term, 0.0, 1.0);
}

Observation Inject(const Observation& observation, double alpha,
                   const NoiseConfig& cfg, NoiseStreams& streams) {
  CheckAlpha(alpha);
  Observation out = observation;
  const ChannelActivation active = ActiveChannels(alpha, cfg);
  if (active.temperature) {
    out[obs::kTemperature] =
        TempNoise(out[obs::kTemperature], alpha, cfg, streams.temperature);
  }
  if (active.rainfall) {
    out[obs::kRainfall] =
        RainNoise(std::max(0.0, out[obs::kRainfall]), alpha, cfg,
                  streams.rainfall);
  }
  if (active.moisture) {
    for (int l = 0; l < cfg.moisture_layers; ++l) {
      out[obs::kSoilMoisture + l] = MoistureNoise(
          out[obs::kSoilMoisture + l], alpha, cfg, streams.moisture);
    }
  }
  return out;
}

std::string_view ToString(EvalCondition c) {
  switch (c) {
    case EvalCondition::kClean: return "clean";
    case EvalCondition::kTemperature: return "temp";
    case EvalCondition::kRainfall: return "rain";
    case EvalCondition::kSoilMoisture: return "moisture";
    case EvalCondition::kSolarRadiation: return "solar";
    case EvalCondition::kCombined: return "combined";
  }
  return "unknown";
}

EvalCondition ParseEvalCondition(std::string_view text) {
  for (auto c : {EvalCondition::kClean, EvalCondition::kTemperature,
                 EvalCondition::kRainfall, EvalCondition::kSoilMoisture,
                 EvalCondition::kSolarRadiation, EvalCondition::kCombined}) {
    if (ToString(c) == text) return c;
  }
  throw ConfigError("unknown evaluation condition '" + std::string(text) + "'");
}

std::vector<EvalCondition> ParseEvalConditions(std::string_view csv) {
  std::vector<EvalCondition> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const auto token = csv.substr(
        start, comma == std::string_view::npos ? std::string_view::npos
                                               : comma - start);
    if (!token.empty()) out.push_back(ParseEvalCondition(token));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("no evaluation conditions given");
  return out;
}

Observation EvalPerturbation(const Observation& observation,
                             EvalCondition condition, Rng& rng,
                             int moisture_layers) {
  Observation out = observation;
  std::normal_distribution<double> temp_noise(0.0, 2.0);
  std::uniform_real_distribution<double> ten_percent(0.9, 1.1);
  std::uniform_real_distribution<double> moisture_noise(-0.02, 0.02);
  const bool temp = condition == EvalCondition::kTemperature ||
                    condition == EvalCondition::kCombined;
  const bool rain = condition == EvalCondition::kRainfall ||
                    condition == EvalCondition::kCombined;
  if (temp) out[obs::kTemperature] += temp_noise(rng);
  if (rain) out[obs::kRainfall] *= ten_percent(rng);
  if (condition == EvalCondition::kSoilMoisture) {
    for (int l = 0; l < moisture_layers; ++l) {
      out[obs::kSoilMoisture + l] = std::clamp(
          out[obs::kSoilMoisture + l] + moisture_noise(rng), 0.0, 1.0);
    }
  }
  if (condition == EvalCondition::kSolarRadiation) {
    out[obs::kSolarRadiation] *= ten_percent(rng);
  }
  return out;
}

}  // namespace croprl
