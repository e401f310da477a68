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

#ifndef CROPRL_CROP_ENV_H_
#define CROPRL_CROP_ENV_H_

#include <array>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "croprl/rng.h"

namespace croprl {

inline constexpr int kObservationSize = 25;
inline constexpr int kNumActions = 25;
inline constexpr int kMaxSoilLayers = 3;

using Observation = std::array<double, kObservationSize>;

// Index map of the flattened 25-dimensional observation. Soil layers beyond
// the configured count read as zero.
namespace obs {
inline constexpr int kDay = 0;
inline constexpr int kTemperature = 1;             // deg C
inline constexpr int kRainfall = 2;                // mm/day
inline constexpr int kSolarRadiation = 3;          // MJ/m^2/day
inline constexpr int kSoilMoisture = 4;            // 4..6, volumetric fraction
inline constexpr int kSoilNitrogen = 7;            // 7..9, kg/ha
inline constexpr int kBiomass = 10;                // kg/ha
inline constexpr int kLeafAreaIndex = 11;
inline constexpr int kCumulativeYield = 12;        // kg/ha
inline constexpr int kCumulativeIrrigation = 13;   // mm
inline constexpr int kCumulativeNitrogen = 14;     // kg/ha
inline constexpr int kCumulativeRainfall = 15;     // mm
inline constexpr int kCumulativeLeaching = 16;     // kg/ha
inline constexpr int kDaysSinceIrrigation = 17;
inline constexpr int kDaysSinceFertilization = 18;
inline constexpr int kLastIrrigation = 19;         // mm
inline constexpr int kLastNitrogen = 20;           // kg/ha
inline constexpr int kWaterStress = 21;            // [0,1], 1 = unstressed
inline constexpr int kNitrogenStress = 22;         // [0,1], 1 = unstressed
inline constexpr int kCumulativeEvapotranspiration = 23;  // mm
inline constexpr int kSeasonProgress = 24;         // day / season length
}  // namespace obs

// Field name at each observation index.
const std::array<std::string_view, kObservationSize>& ObservationFieldNames();

// Per-index (offset, scale) used to bring observations to O(1) magnitudes
// before they reach a network: x' = SymLog((x - offset) / scale).
struct ObservationScaling {
  Observation offset;
  Observation scale;
};
const ObservationScaling& DefaultObservationScaling();

// sign(x) * log(1 + |x|): identity-like near zero, logarithmic in the tails
// that aggressive input schedules produce.
double SymLog(double x);

// Default network input for an observation.
Observation NetworkInput(const Observation& observation);

inline constexpr std::array<double, 5> kIrrigationLevelsMm = {0, 6, 12, 18, 24};
inline constexpr std::array<double, 5> kNitrogenLevelsKgHa = {0, 40, 80, 120, 160};

// One of the 25 irrigation x nitrogen combinations;
// index = 5 * irrigation_level + nitrogen_level.
class ActionChoice {
 public:
  static ActionChoice FromIndex(int index);
  static ActionChoice FromLevels(int irrigation_level, int nitrogen_level);

  int index() const { return index_; }
  int irrigation_level() const { return index_ / 5; }
  int nitrogen_level() const { return index_ % 5; }
  double irrigation_mm() const { return kIrrigationLevelsMm[irrigation_level()]; }
  double nitrogen_kg_ha() const { return kNitrogenLevelsKgHa[nitrogen_level()]; }

  friend bool operator==(ActionChoice, ActionChoice) = default;

 private:
  explicit ActionChoice(int index) : index_(index) {}
  int index_;
};

// Economic weights of the daily reward.
struct RewardWeights {
  double yield_price = 0.158;     // $/kg grain
  double nitrogen_cost = 0.79;    // $/kg N
  double irrigation_cost = 1.1;   // $/mm
  double leaching_penalty = 0.011;  // $/kg nitrate leached

  void Validate() const;
};

// Daily reward: input costs and leaching penalty every day, plus grain
// revenue on the harvest day. Inputs must be non-negative.
double RewardComponents(double yield, double nitrogen_applied,
                        double irrigation_applied, double nitrate_leached,
                        bool is_harvest, const RewardWeights& weights);

struct SoilConfig {
  int layers = 1;
  double layer_depth_mm = 600.0;
  double saturation = 0.40;
  double field_capacity = 0.24;
  double wilting_point = 0.10;
  double initial_moisture = 0.20;
  double drainage_coefficient = 0.3;     // fraction of excess over FC per day
  double initial_nitrogen = 30.0;        // kg/ha, whole profile
  double mineralization_rate = 0.4;      // kg/ha/day at optimal temperature
  double nitrate_mobility = 0.2;         // soluble share of nitrate that moves with drainage
};

struct CropConfig {
  double max_daily_growth = 260.0;   // kg/ha/day at peak, unstressed
  int growth_duration = 180;         // days with non-zero potential growth
  int grain_fill_start_day = 100;
  double grain_fraction = 1.0;       // share of daily growth after fill start
  double nitrogen_concentration = 0.008;  // kg N per kg biomass
  double uptake_fraction = 0.10;     // share of soil N roots can take per day
  double optimal_temperature = 26.0;
  double temperature_tolerance = 16.0;
  double reference_solar = 20.0;
  double max_lai = 6.0;
  double lai_biomass_scale = 6000.0;
  double stress_free_depletion = 0.5;  // share of available water before stress
};

struct ScenarioConfig {
  std::string name = "florida";
  double temp_mean = 26.5;
  double temp_seasonal_amplitude = 4.0;
  double temp_ar_coefficient = 0.7;
  double temp_noise_std = 1.2;
  double temp_min = 10.0;
  double temp_max = 38.0;
  double rain_mean = 4.2;          // mm/day
  double rain_wet_probability = 0.4;
  double solar_mean = 19.0;
  double solar_seasonal_amplitude = 3.0;
  int season_length = 200;
  SoilConfig soil;
  CropConfig crop;

  static ScenarioConfig Florida();
  static ScenarioConfig Zaragoza();
  static ScenarioConfig ByName(std::string_view name);
  void Validate() const;
};

struct Weather {
  double temperature = 0.0;
  double rainfall = 0.0;
  double solar_radiation = 0.0;

  friend bool operator==(const Weather&, const Weather&) = default;
};

struct CropState {
  int day = 0;
  Weather weather;
  std::array<double, kMaxSoilLayers> soil_moisture{};
  std::array<double, kMaxSoilLayers> soil_nitrogen{};
  int soil_layers = 1;
  double biomass = 0.0;
  double leaf_area_index = 0.0;
  double cumulative_yield = 0.0;
  double cumulative_irrigation = 0.0;
  double cumulative_nitrogen = 0.0;
  double cumulative_rainfall = 0.0;
  double cumulative_leaching = 0.0;
  double cumulative_evapotranspiration = 0.0;
  int days_since_irrigation = 0;
  int days_since_fertilization = 0;
  double last_irrigation = 0.0;
  double last_nitrogen = 0.0;
  double water_stress = 1.0;
  double nitrogen_stress = 1.0;
  int season_length = 200;

  friend bool operator==(const CropState&, const CropState&) = default;
};

Observation Observe(const CropState& state);

struct StepInfo {
  double yield = 0.0;              // cumulative grain yield, kg/ha
  double nitrate_leached = 0.0;    // kg/ha this day
  double nitrogen_applied = 0.0;   // kg/ha this day
  double irrigation_applied = 0.0; // mm this day
  bool harvest = false;
  double rainfall = 0.0;           // mm this day
  double evapotranspiration = 0.0; // mm this day
  double drainage = 0.0;           // mm below the profile this day

  friend bool operator==(const StepInfo&, const StepInfo&) = default;
};

struct StepOutcome {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  StepInfo info;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

// Transforms the day's true weather before the crop model consumes it.
using WeatherHook = std::function<void(Weather&)>;

// The reset/step contract shared by the built-in surrogate and remote
// simulators.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual Observation Reset(std::uint64_t seed) = 0;
  virtual StepOutcome Step(ActionChoice action) = 0;

  // Installs (or clears, with an empty hook) a weather transform. Returns
  // false when the backend cannot perturb its weather.
  virtual bool SetWeatherHook(WeatherHook hook) {
    (void)hook;
    return false;
  }
  virtual int soil_layers() const { return 1; }
};

// Simplified maize process model: daily weather, a layered soil water and
// nitrate bucket, and stress-limited biomass growth.
class SurrogateEnv : public Environment {
 public:
  explicit SurrogateEnv(ScenarioConfig scenario, RewardWeights weights = {});

  Observation Reset(std::uint64_t seed) override;
  StepOutcome Step(ActionChoice action) override;
  bool SetWeatherHook(WeatherHook hook) override;
  int soil_layers() const override { return scenario_.soil.layers; }

  CropState ResetState(std::uint64_t seed);
  const CropState& state() const { return state_; }
  bool done() const { return done_; }
  const ScenarioConfig& scenario() const { return scenario_; }
  const RewardWeights& weights() const { return weights_; }

  // Water held in the whole soil profile, mm.
  double SoilWaterMm() const;

 private:
  Weather DrawWeather(int day);

  ScenarioConfig scenario_;
  RewardWeights weights_;
  CropState state_;
  Rng weather_rng_;
  double temp_anomaly_ = 0.0;
  bool done_ = true;
  WeatherHook weather_hook_;
};

// Calendar baseline: irrigate every `irrigation_interval` days and apply
// nitrogen on the listed days.
struct FixedManagementSchedule {
  double irrigation_mm = 12.0;
  int irrigation_interval = 4;
  double nitrogen_kg_ha = 80.0;
  std::vector<int> nitrogen_days = {10, 45};

  ActionChoice ActionForDay(int day) const;
};

// Writes one CSV row per day: observation fields, action, and reward terms.
class EpisodeTraceWriter {
 public:
  explicit EpisodeTraceWriter(std::ostream& out);
  void Record(const Observation& observation, ActionChoice action,
              const StepOutcome& outcome);

 private:
  std::ostream& out_;
};

}  // namespace croprl

#endif  // CROPRL_CROP_ENV_H_
