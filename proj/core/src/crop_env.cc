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

#include "croprl/crop_env.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "croprl/errors.h"

namespace croprl {

const std::array<std::string_view, kObservationSize>& ObservationFieldNames() {
  static const std::array<std::string_view, kObservationSize> kNames = {
      "day",
      "temperature",
      "rainfall",
      "solar_radiation",
      "soil_moisture_1",
      "soil_moisture_2",
      "soil_moisture_3",
      "soil_nitrogen_1",
      "soil_nitrogen_2",
      "soil_nitrogen_3",
      "biomass",
      "leaf_area_index",
      "cumulative_yield",
      "cumulative_irrigation",
      "cumulative_nitrogen",
      "cumulative_rainfall",
      "cumulative_leaching",
      "days_since_irrigation",
      "days_since_fertilization",
      "last_irrigation",
      "last_nitrogen",
      "water_stress",
      "nitrogen_stress",
      "cumulative_evapotranspiration",
      "season_progress",
  };
  return kNames;
}

const ObservationScaling& DefaultObservationScaling() {
  static const ObservationScaling kScaling = [] {
    ObservationScaling s;
    s.offset.fill(0.0);
    s.scale.fill(1.0);
    auto set = [&](int i, double offset, double scale) {
      s.offset[i] = offset;
      s.scale[i] = scale;
    };
    set(obs::kDay, 100.0, 100.0);
    set(obs::kTemperature, 25.0, 5.0);
    set(obs::kRainfall, 4.0, 10.0);
    set(obs::kSolarRadiation, 19.0, 5.0);
    for (int l = 0; l < kMaxSoilLayers; ++l) {
      set(obs::kSoilMoisture + l, 0.18, 0.08);
      set(obs::kSoilNitrogen + l, 50.0, 50.0);
    }
    set(obs::kBiomass, 10000.0, 10000.0);
    set(obs::kLeafAreaIndex, 3.0, 3.0);
    set(obs::kCumulativeYield, 5000.0, 5000.0);
    set(obs::kCumulativeIrrigation, 300.0, 300.0);
    set(obs::kCumulativeNitrogen, 200.0, 200.0);
    set(obs::kCumulativeRainfall, 400.0, 400.0);
    set(obs::kCumulativeLeaching, 10.0, 10.0);
    set(obs::kDaysSinceIrrigation, 20.0, 20.0);
    set(obs::kDaysSinceFertilization, 50.0, 50.0);
    set(obs::kLastIrrigation, 12.0, 12.0);
    set(obs::kLastNitrogen, 80.0, 80.0);
    set(obs::kWaterStress, 0.5, 0.5);
    set(obs::kNitrogenStress, 0.5, 0.5);
    set(obs::kCumulativeEvapotranspiration, 400.0, 400.0);
    set(obs::kSeasonProgress, 0.5, 0.5);
    return s;
  }();
  return kScaling;
}

double SymLog(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

Observation NetworkInput(const Observation& observation) {
  const ObservationScaling& s = DefaultObservationScaling();
  Observation out;
  for (int i = 0; i < kObservationSize; ++i) {
    out[i] = SymLog((observation[i] - s.offset[i]) / s.scale[i]);
  }
  return out;
}

ActionChoice ActionChoice::FromIndex(int index) {
  if (index < 0 || index >= kNumActions) {
    throw ContractViolation("action index out of range: " +
                            std::to_string(index));
  }
  return ActionChoice(index);
}

ActionChoice ActionChoice::FromLevels(int irrigation_level, int nitrogen_level) {
  if (irrigation_level < 0 || irrigation_level > 4 || nitrogen_level < 0 ||
      nitrogen_level > 4) {
    throw ContractViolation("action level out of range");
  }
  return ActionChoice(5 * irrigation_level + nitrogen_level);
}

void RewardWeights::Validate() const {
  if (!(yield_price >= 0 && nitrogen_cost >= 0 && irrigation_cost >= 0 &&
        leaching_penalty >= 0)) {
    throw ConfigError("reward weights must be non-negative");
  }
}

double RewardComponents(double yield, double nitrogen_applied,
                        double irrigation_applied, double nitrate_leached,
                        bool is_harvest, const RewardWeights& weights) {
  if (!(yield >= 0 && nitrogen_applied >= 0 && irrigation_applied >= 0 &&
        nitrate_leached >= 0)) {
    throw ContractViolation("reward inputs must be non-negative");
  }
  double reward = -weights.nitrogen_cost * nitrogen_applied -
                  weights.irrigation_cost * irrigation_applied -
                  weights.leaching_penalty * nitrate_leached;
  if (is_harvest) reward += weights.yield_price * yield;
  return reward;
}

ScenarioConfig ScenarioConfig::Florida() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::Zaragoza() {
  ScenarioConfig s;
  s.name = "zaragoza";
  s.temp_mean = 25.0;
  s.temp_seasonal_amplitude = 6.0;
  s.temp_ar_coefficient = 0.6;
  s.temp_noise_std = 2.5;
  s.temp_min = 15.0;
  s.temp_max = 35.0;
  s.rain_mean = 2.1;
  s.rain_wet_probability = 0.12;
  s.solar_mean = 22.0;
  s.solar_seasonal_amplitude = 4.0;
  s.soil.field_capacity = 0.30;
  s.soil.wilting_point = 0.14;
  s.soil.saturation = 0.45;
  s.soil.initial_moisture = 0.26;
  s.soil.drainage_coefficient = 0.3;
  return s;
}

ScenarioConfig ScenarioConfig::ByName(std::string_view name) {
  if (name == "florida") return Florida();
  if (name == "zaragoza") return Zaragoza();
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

void ScenarioConfig::Validate() const {
  const auto& s = soil;
  if (season_length <= 0) throw ConfigError("season_length must be positive");
  if (s.layers < 1 || s.layers > kMaxSoilLayers) {
    throw ConfigError("soil layers must be in [1, 3]");
  }
  if (!(0.0 <= s.wilting_point && s.wilting_point < s.field_capacity &&
        s.field_capacity < s.saturation && s.saturation <= 1.0)) {
    throw ConfigError("need 0 <= wilting point < field capacity < saturation <= 1");
  }
  if (!(s.initial_moisture >= 0.0 && s.initial_moisture <= s.saturation)) {
    throw ConfigError("initial moisture must lie in [0, saturation]");
  }
  if (!(s.layer_depth_mm > 0 && s.drainage_coefficient >= 0 &&
        s.drainage_coefficient <= 1 && s.initial_nitrogen >= 0 &&
        s.mineralization_rate >= 0 && s.nitrate_mobility >= 0 &&
        s.nitrate_mobility <= 1)) {
    throw ConfigError("invalid soil parameters");
  }
  if (!(rain_mean >= 0 && rain_wet_probability > 0 &&
        rain_wet_probability <= 1 && temp_min < temp_max &&
        temp_noise_std >= 0 && std::abs(temp_ar_coefficient) < 1)) {
    throw ConfigError("invalid weather parameters");
  }
  if (!(crop.max_daily_growth >= 0 && crop.growth_duration > 0 &&
        crop.nitrogen_concentration > 0 && crop.uptake_fraction > 0 &&
        crop.uptake_fraction <= 1 && crop.temperature_tolerance > 0 &&
        crop.reference_solar > 0 && crop.stress_free_depletion > 0 &&
        crop.stress_free_depletion <= 1)) {
    throw ConfigError("invalid crop parameters");
  }
}

Observation Observe(const CropState& s) {
  Observation o{};
  o[obs::kDay] = s.day;
  o[obs::kTemperature] = s.weather.temperature;
  o[obs::kRainfall] = s.weather.rainfall;
  o[obs::kSolarRadiation] = s.weather.solar_radiation;
  for (int l = 0; l < s.soil_layers; ++l) {
    o[obs::kSoilMoisture + l] = s.soil_moisture[l];
    o[obs::kSoilNitrogen + l] = s.soil_nitrogen[l];
  }
  o[obs::kBiomass] = s.biomass;
  o[obs::kLeafAreaIndex] = s.leaf_area_index;
  o[obs::kCumulativeYield] = s.cumulative_yield;
  o[obs::kCumulativeIrrigation] = s.cumulative_irrigation;
  o[obs::kCumulativeNitrogen] = s.cumulative_nitrogen;
  o[obs::kCumulativeRainfall] = s.cumulative_rainfall;
  o[obs::kCumulativeLeaching] = s.cumulative_leaching;
  o[obs::kDaysSinceIrrigation] = s.days_since_irrigation;
  o[obs::kDaysSinceFertilization] = s.days_since_fertilization;
  o[obs::kLastIrrigation] = s.last_irrigation;
  o[obs::kLastNitrogen] = s.last_nitrogen;
  o[obs::kWaterStress] = s.water_stress;
  o[obs::kNitrogenStress] = s.nitrogen_stress;
  o[obs::kCumulativeEvapotranspiration] = s.cumulative_evapotranspiration;
  o[obs::kSeasonProgress] =
      static_cast<double>(s.day) / static_cast<double>(s.season_length);
  return o;
}

SurrogateEnv::SurrogateEnv(ScenarioConfig scenario, RewardWeights weights)
    : scenario_(std::move(scenario)), weights_(weights) {
  scenario_.Validate();
  weights_.Validate();
}

bool SurrogateEnv::SetWeatherHook(WeatherHook hook) {
  weather_hook_ = std::move(hook);
  return true;
}

Weather SurrogateEnv::DrawWeather(int day) {
  const auto& sc = scenario_;
  const double phase = std::sin(std::numbers::pi * day / sc.season_length) -
                       2.0 / std::numbers::pi;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Stationary AR(1) anomaly around the seasonal curve.
  const double innovation =
      sc.temp_noise_std *
      std::sqrt(1.0 - sc.temp_ar_coefficient * sc.temp_ar_coefficient);
  temp_anomaly_ = sc.temp_ar_coefficient * temp_anomaly_ + innovation * gauss(weather_rng_);

  Weather w;
  w.temperature = std::clamp(
      sc.temp_mean + sc.temp_seasonal_amplitude * phase + temp_anomaly_,
      sc.temp_min, sc.temp_max);

  const bool wet = unit(weather_rng_) < sc.rain_wet_probability;
  const double depth_mean = sc.rain_mean / sc.rain_wet_probability;
  std::exponential_distribution<double> depth(1.0 / depth_mean);
  const double rain_depth = depth(weather_rng_);
  w.rainfall = wet ? rain_depth : 0.0;

  const double cloud = wet ? 0.75 : 1.0;
  const double solar_noise = 1.0 + 0.05 * gauss(weather_rng_);
  w.solar_radiation = std::max(
      1.0, (sc.solar_mean + sc.solar_seasonal_amplitude * phase) * cloud *
               solar_noise);

  if (weather_hook_) weather_hook_(w);
  return w;
}

CropState SurrogateEnv::ResetState(std::uint64_t seed) {
  weather_rng_.seed(seed);
  const auto& sc = scenario_;
  std::normal_distribution<double> gauss(0.0, 1.0);
  temp_anomaly_ = sc.temp_noise_std * gauss(weather_rng_);

  state_ = CropState{};
  state_.season_length = sc.season_length;
  state_.soil_layers = sc.soil.layers;
  for (int l = 0; l < sc.soil.layers; ++l) {
    state_.soil_moisture[l] = sc.soil.initial_moisture;
    state_.soil_nitrogen[l] = sc.soil.initial_nitrogen / sc.soil.layers;
  }
  state_.weather = DrawWeather(0);
  done_ = false;
  return state_;
}

Observation SurrogateEnv::Reset(std::uint64_t seed) {
  return Observe(ResetState(seed));
}

double SurrogateEnv::SoilWaterMm() const {
  double total = 0.0;
  for (int l = 0; l < state_.soil_layers; ++l) {
    total += state_.soil_moisture[l] * scenario_.soil.layer_depth_mm;
  }
  return total;
}

StepOutcome SurrogateEnv::Step(ActionChoice action) {
  if (done_) throw ContractViolation("step called on a finished episode");
  const auto& soil = scenario_.soil;
  const auto& crop = scenario_.crop;
  const int layers = soil.layers;
  const double depth = soil.layer_depth_mm;
  CropState& s = state_;
  const Weather w = s.weather;

  const double irrigation = action.irrigation_mm();
  const double fertilizer = action.nitrogen_kg_ha();

  // Water and nitrate move down the profile; what leaves the bottom layer is
  // drainage and leaching.
  std::array<double, kMaxSoilLayers> storage{};
  for (int l = 0; l < layers; ++l) storage[l] = s.soil_moisture[l] * depth;
  s.soil_nitrogen[0] += fertilizer;

  double inflow = w.rainfall + irrigation;
  double nitrate_in = 0.0;
  for (int l = 0; l < layers; ++l) {
    storage[l] += inflow;
    s.soil_nitrogen[l] += nitrate_in;
    const double overflow = std::max(0.0, storage[l] - soil.saturation * depth);
    const double excess = std::max(
        0.0, storage[l] - overflow - soil.field_capacity * depth);
    const double drained = overflow + soil.drainage_coefficient * excess;
    const double fraction =
        storage[l] > 0.0 ? soil.nitrate_mobility * drained / storage[l] : 0.0;
    nitrate_in = fraction * s.soil_nitrogen[l];
    s.soil_nitrogen[l] -= nitrate_in;
    storage[l] -= drained;
    inflow = drained;
  }
  const double drainage = inflow;
  const double leached = nitrate_in;

  // Stress factors from the post-infiltration root zone.
  const double taw = (soil.field_capacity - soil.wilting_point) * depth;
  double available_water = 0.0;
  for (int l = 0; l < layers; ++l) {
    available_water += std::max(0.0, storage[l] - soil.wilting_point * depth);
  }
  const double water_stress = std::clamp(
      available_water / (layers * taw * crop.stress_free_depletion), 0.0, 1.0);

  const double temp_dev =
      (w.temperature - crop.optimal_temperature) / crop.temperature_tolerance;
  const double temp_factor = std::clamp(1.0 - temp_dev * temp_dev, 0.0, 1.0);

  double shape = 0.0;
  if (s.day < crop.growth_duration) {
    shape = std::sin(std::numbers::pi * (s.day + 0.5) / crop.growth_duration);
  }
  const double potential = crop.max_daily_growth * shape *
                           (w.solar_radiation / crop.reference_solar) *
                           temp_factor;
  double soil_n = 0.0;
  for (int l = 0; l < layers; ++l) soil_n += s.soil_nitrogen[l];
  const double demand = potential * crop.nitrogen_concentration;
  const double supply = crop.uptake_fraction * soil_n;
  const double nitrogen_stress =
      demand > 0.0 ? std::clamp(supply / demand, 0.0, 1.0) : 1.0;
  const double growth = potential * std::min(water_stress, nitrogen_stress);

  const double uptake = std::min(growth * crop.nitrogen_concentration, soil_n);
  if (soil_n > 0.0) {
    for (int l = 0; l < layers; ++l) {
      s.soil_nitrogen[l] = std::max(0.0, s.soil_nitrogen[l] -
                                             uptake * s.soil_nitrogen[l] / soil_n);
    }
  }
  s.soil_nitrogen[0] += soil.mineralization_rate * temp_factor;

  // Crop evapotranspiration (Hargreaves-style reference, crop coefficient
  // from canopy cover) limited by water above the wilting point.
  const double reference_et = std::max(
      0.0, 0.0135 * (w.temperature + 17.8) * w.solar_radiation / 2.45);
  const double crop_coefficient =
      0.3 + 0.9 * std::min(1.0, s.leaf_area_index / 3.0);
  const double et = std::min(reference_et * crop_coefficient * water_stress,
                             available_water);
  if (available_water > 0.0) {
    for (int l = 0; l < layers; ++l) {
      const double avail = std::max(0.0, storage[l] - soil.wilting_point * depth);
      storage[l] -= et * avail / available_water;
    }
  }
  for (int l = 0; l < layers; ++l) s.soil_moisture[l] = storage[l] / depth;

  s.biomass += growth;
  s.leaf_area_index =
      crop.max_lai * (1.0 - std::exp(-s.biomass / crop.lai_biomass_scale));
  if (s.day >= crop.grain_fill_start_day) {
    s.cumulative_yield += crop.grain_fraction * growth;
  }
  s.cumulative_irrigation += irrigation;
  s.cumulative_nitrogen += fertilizer;
  s.cumulative_rainfall += w.rainfall;
  s.cumulative_leaching += leached;
  s.cumulative_evapotranspiration += et;
  s.days_since_irrigation = irrigation > 0 ? 0 : s.days_since_irrigation + 1;
  s.days_since_fertilization = fertilizer > 0 ? 0 : s.days_since_fertilization + 1;
  if (irrigation > 0) s.last_irrigation = irrigation;
  if (fertilizer > 0) s.last_nitrogen = fertilizer;
  s.water_stress = water_stress;
  s.nitrogen_stress = nitrogen_stress;
  s.day += 1;

  StepOutcome out;
  out.done = s.day >= scenario_.season_length;
  out.info.yield = s.cumulative_yield;
  out.info.nitrate_leached = leached;
  out.info.nitrogen_applied = fertilizer;
  out.info.irrigation_applied = irrigation;
  out.info.harvest = out.done;
  out.info.rainfall = w.rainfall;
  out.info.evapotranspiration = et;
  out.info.drainage = drainage;
  out.reward = RewardComponents(s.cumulative_yield, fertilizer, irrigation,
                                leached, out.done, weights_);
  if (!out.done) s.weather = DrawWeather(s.day);
  done_ = out.done;
  out.observation = Observe(s);
  return out;
}

ActionChoice FixedManagementSchedule::ActionForDay(int day) const {
  auto level_of = [](const auto& levels, double value) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == value) return static_cast<int>(i);
    }
    throw ConfigError("fixed management amount is not an action level");
  };
  const bool irrigate = irrigation_interval > 0 && day % irrigation_interval == 0;
  const bool fertilize =
      std::find(nitrogen_days.begin(), nitrogen_days.end(), day) !=
      nitrogen_days.end();
  return ActionChoice::FromLevels(
      irrigate ? level_of(kIrrigationLevelsMm, irrigation_mm) : 0,
      fertilize ? level_of(kNitrogenLevelsKgHa, nitrogen_kg_ha) : 0);
}

EpisodeTraceWriter::EpisodeTraceWriter(std::ostream& out) : out_(out) {
  out_.precision(17);
  for (auto name : ObservationFieldNames()) out_ << name << ',';
  out_ << "action,irrigation_mm,nitrogen_kg_ha,yield,nitrate_leached,"
          "harvest,reward\n";
}

void EpisodeTraceWriter::Record(const Observation& observation,
                                ActionChoice action, const StepOutcome& outcome) {
  for (double v : observation) out_ << v << ',';
  out_ << action.index() << ',' << action.irrigation_mm() << ','
       << action.nitrogen_kg_ha() << ',' << outcome.info.yield << ','
       << outcome.info.nitrate_leached << ',' << (outcome.info.harvest ? 1 : 0)
       << ',' << outcome.reward << '\n';
}

}  // namespace croprl
