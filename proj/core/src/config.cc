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

#include "croprl/config.h"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <type_traits>

#include "croprl/errors.h"
#include "croprl/rng.h"

namespace croprl {
namespace {

// Published hyperparameters are emitted bare; everything else is flagged.
enum class Origin { kPublished, kFramework };
constexpr Origin kPub = Origin::kPublished;
constexpr Origin kFw = Origin::kFramework;

template <class Enum>
struct EnumField {
  Enum* value;
  std::string_view (*to_string)(Enum);
  Enum (*parse)(std::string_view);
};

// Walks every configurable field in emission order. The visitor sees
// Section(name) calls followed by Field(key, value&, origin) calls.
template <class Visitor>
void VisitConfig(RunConfig& c, Visitor& v) {
  v.Section("scenario");
  v.Field("name", c.scenario.name, kFw);
  v.Field("season_length", c.scenario.season_length, kFw);
  v.Field("temp_mean", c.scenario.temp_mean, kFw);
  v.Field("temp_seasonal_amplitude", c.scenario.temp_seasonal_amplitude, kFw);
  v.Field("temp_ar_coefficient", c.scenario.temp_ar_coefficient, kFw);
  v.Field("temp_noise_std", c.scenario.temp_noise_std, kFw);
  v.Field("temp_min", c.scenario.temp_min, kFw);
  v.Field("temp_max", c.scenario.temp_max, kFw);
  v.Field("rain_mean", c.scenario.rain_mean, kFw);
  v.Field("rain_wet_probability", c.scenario.rain_wet_probability, kFw);
  v.Field("solar_mean", c.scenario.solar_mean, kFw);
  v.Field("solar_seasonal_amplitude", c.scenario.solar_seasonal_amplitude, kFw);

  v.Section("soil");
  v.Field("layers", c.scenario.soil.layers, kFw);
  v.Field("layer_depth_mm", c.scenario.soil.layer_depth_mm, kFw);
  v.Field("saturation", c.scenario.soil.saturation, kFw);
  v.Field("field_capacity", c.scenario.soil.field_capacity, kFw);
  v.Field("wilting_point", c.scenario.soil.wilting_point, kFw);
  v.Field("initial_moisture", c.scenario.soil.initial_moisture, kFw);
  v.Field("drainage_coefficient", c.scenario.soil.drainage_coefficient, kFw);
  v.Field("initial_nitrogen", c.scenario.soil.initial_nitrogen, kFw);
  v.Field("mineralization_rate", c.scenario.soil.mineralization_rate, kFw);
  v.Field("nitrate_mobility", c.scenario.soil.nitrate_mobility, kFw);

  v.Section("crop");
  v.Field("max_daily_growth", c.scenario.crop.max_daily_growth, kFw);
  v.Field("growth_duration", c.scenario.crop.growth_duration, kFw);
  v.Field("grain_fill_start_day", c.scenario.crop.grain_fill_start_day, kFw);
  v.Field("grain_fraction", c.scenario.crop.grain_fraction, kFw);
  v.Field("nitrogen_concentration", c.scenario.crop.nitrogen_concentration, kFw);
  v.Field("uptake_fraction", c.scenario.crop.uptake_fraction, kFw);
  v.Field("optimal_temperature", c.scenario.crop.optimal_temperature, kFw);
  v.Field("temperature_tolerance", c.scenario.crop.temperature_tolerance, kFw);
  v.Field("reference_solar", c.scenario.crop.reference_solar, kFw);
  v.Field("max_lai", c.scenario.crop.max_lai, kFw);
  v.Field("lai_biomass_scale", c.scenario.crop.lai_biomass_scale, kFw);
  v.Field("stress_free_depletion", c.scenario.crop.stress_free_depletion, kFw);

  v.Section("reward");
  v.Field("yield_price", c.reward.yield_price, kFw);
  v.Field("nitrogen_cost", c.reward.nitrogen_cost, kFw);
  v.Field("irrigation_cost", c.reward.irrigation_cost, kFw);
  v.Field("leaching_penalty", c.reward.leaching_penalty, kFw);

  v.Section("ppo");
  v.Field("learning_rate", c.ppo.learning_rate, kPub);
  v.Field("gamma", c.ppo.gamma, kPub);
  v.Field("gae_lambda", c.ppo.gae_lambda, kPub);
  v.Field("clip_epsilon", c.ppo.clip_epsilon, kPub);
  v.Field("hidden", c.ppo.hidden, kPub);
  v.Field("buffer_size", c.ppo.buffer_size, kPub);
  v.Field("minibatch_size", c.ppo.minibatch_size, kPub);
  v.Field("epochs", c.ppo.epochs, kFw);
  v.Field("entropy_coef", c.ppo.entropy_coef, kFw);
  v.Field("value_coef", c.ppo.value_coef, kFw);
  v.Field("max_grad_norm", c.ppo.max_grad_norm, kFw);
  v.Field("target_kl", c.ppo.target_kl, kFw);
  EnumField<AdvantageMode> mode{&c.ppo.mode, &ToString, &ParseAdvantageMode};
  v.Field("mode", mode, kFw);
  v.Field("additive_coef", c.ppo.additive_coef, kFw);
  v.Field("reward_scale", c.ppo.reward_scale, kFw);

  v.Section("pga");
  v.Field("enabled", c.pga.enabled, kFw);
  v.Field("phase1_end", c.pga.phase1_end_p, kPub);
  v.Field("phase2_end", c.pga.phase2_end_p, kPub);
  v.Field("mask_prob_scale", c.pga.mask_prob_scale, kFw);
  v.Field("observation_noise", c.pga.observation_noise, kFw);
  v.Field("weather_perturbation", c.pga.weather_perturbation, kFw);
  v.Field("action_masking", c.pga.action_masking, kFw);

  v.Section("noise");
  v.Field("temp_threshold", c.noise.temp_threshold, kPub);
  v.Field("rain_threshold", c.noise.rain_threshold, kPub);
  v.Field("moisture_threshold", c.noise.moisture_threshold, kPub);
  v.Field("temp_sigma_base", c.noise.temp_sigma_base, kFw);
  v.Field("rain_bias_scale", c.noise.rain_bias_scale, kFw);
  v.Field("rain_noise_param", c.noise.rain_noise_param, kFw);
  v.Field("moisture_noise_param", c.noise.moisture_noise_param, kFw);
  EnumField<ParamInterpretation> rain_interp{&c.noise.rain_interpretation, &ToString,
                                             &ParseParamInterpretation};
  v.Field("rain_interpretation", rain_interp, kFw);
  EnumField<ParamInterpretation> moisture_interp{&c.noise.moisture_interpretation,
                                                 &ToString, &ParseParamInterpretation};
  v.Field("moisture_interpretation", moisture_interp, kFw);
  v.Field("moisture_layers", c.noise.moisture_layers, kFw);

  v.Section("rnd");
  v.Field("initial_weight", c.rnd.schedule.initial_weight, kPub);
  v.Field("decay_start", c.rnd.schedule.decay_start, kPub);
  v.Field("decay_end", c.rnd.schedule.decay_end, kPub);
  v.Field("hidden", c.rnd.hidden, kFw);
  v.Field("embedding_size", c.rnd.embedding_size, kFw);
  v.Field("learning_rate", c.rnd.learning_rate, kFw);
  v.Field("minibatch_size", c.rnd.minibatch_size, kFw);
  v.Field("epochs", c.rnd.epochs, kFw);
  v.Field("normalizer_warmup", c.rnd.normalizer_warmup, kFw);
  v.Field("adaptive_bonus", c.rnd.adaptive_bonus, kFw);
  v.Field("unvisited_bonus", c.rnd.unvisited_bonus, kFw);

  v.Section("training");
  v.Field("episodes", c.training.episodes, kPub);
  v.Field("validation_interval", c.training.validation_interval, kFw);
  v.Field("validation_episodes", c.training.validation_episodes, kFw);
  v.Field("early_stopping", c.training.early_stopping, kFw);
  v.Field("early_stop_min_delta", c.training.early_stop_min_delta, kFw);
  v.Field("early_stop_patience", c.training.early_stop_patience, kFw);
  v.Field("checkpoint_keep", c.training.checkpoint_keep, kFw);
  v.Field("eval_episodes", c.training.eval_episodes, kFw);
  v.Field("seeds", c.seeds, kPub);

  v.Section("coverage");
  v.Field("day_width", c.coverage.day.width, kFw);
  v.Field("day_max", c.coverage.day.upper, kFw);
  v.Field("yield_width", c.coverage.cumulative_yield.width, kFw);
  v.Field("yield_max", c.coverage.cumulative_yield.upper, kFw);
  v.Field("moisture_width", c.coverage.soil_moisture.width, kFw);
  v.Field("moisture_max", c.coverage.soil_moisture.upper, kFw);
  v.Field("irrigation_width", c.coverage.cumulative_irrigation.width, kFw);
  v.Field("irrigation_max", c.coverage.cumulative_irrigation.upper, kFw);
}

std::string FormatNumber(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  // Keep doubles recognizable as floats when read back by other tools.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

class Emitter {
 public:
  void Section(const char* name) {
    if (!first_) out_ << '\n';
    first_ = false;
    out_ << name << ":\n";
  }

  template <class T>
  void Field(const char* key, T& value, Origin origin) {
    std::string line = std::string("  ") + key + ": " + Render(value);
    if (origin == Origin::kFramework && IsNumeric(value)) {
      line.resize(std::max<std::size_t>(line.size(), 40), ' ');
      line += "  # framework default";
    }
    out_ << line << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string Render(double v) { return FormatNumber(v); }
  static std::string Render(int v) { return std::to_string(v); }
  static std::string Render(std::int64_t v) { return std::to_string(v); }
  static std::string Render(bool v) { return v ? "true" : "false"; }
  static std::string Render(const std::string& v) { return v; }
  template <class E>
  static std::string Render(const EnumField<E>& f) {
    return std::string(f.to_string(*f.value));
  }
  template <class T>
  static std::string Render(const std::vector<T>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(v[i]);
    }
    return s + "]";
  }

  template <class T>
  static bool IsNumeric(const T&) {
    return std::is_arithmetic_v<T> && !std::is_same_v<T, bool>;
  }
  template <class T>
  static bool IsNumeric(const std::vector<T>&) {
    return true;
  }

  std::ostringstream out_;
  bool first_ = true;
};

class Reader {
 public:
  explicit Reader(const YAML::Node& root) : root_(root) {}

  void Section(const char* name) {
    section_ = name;
    known_[section_];
    node_.emplace(static_cast<const YAML::Node&>(root_)[name]);
    if (*node_ && !node_->IsMap()) throw ConfigError(std::string("section '") + name + "' is not a map");
  }

  template <class T>
  void Field(const char* key, T& value, Origin) {
    known_[section_].insert(key);
    if (!*node_) return;
    const YAML::Node n = static_cast<const YAML::Node&>(*node_)[key];
    if (!n) return;
    try {
      Assign(n, value);
    } catch (const YAML::Exception& e) {
      throw ConfigError(section_ + "." + key + ": " + e.msg);
    } catch (const ConfigError& e) {
      throw ConfigError(section_ + "." + key + ": " + e.what());
    }
  }

  void CheckUnknown() const {
    if (!root_.IsMap()) throw ConfigError("config root must be a map");
    for (const auto& entry : root_) {
      const auto name = entry.first.as<std::string>();
      auto it = known_.find(name);
      if (it == known_.end()) throw ConfigError("unknown config section '" + name + "'");
      for (const auto& field : entry.second) {
        const auto key = field.first.as<std::string>();
        if (!it->second.contains(key)) {
          throw ConfigError("unknown config key '" + name + "." + key + "'");
        }
      }
    }
  }

 private:
  template <class T>
  static void Assign(const YAML::Node& n, T& value) {
    value = n.as<T>();
  }
  template <class E>
  static void Assign(const YAML::Node& n, EnumField<E>& f) {
    *f.value = f.parse(n.as<std::string>());
  }

  YAML::Node root_;
  std::optional<YAML::Node> node_;
  std::string section_;
  std::map<std::string, std::set<std::string>> known_;
};

}  // namespace

void TrainingConfig::Validate() const {
  if (episodes < 1) throw ConfigError("training.episodes must be positive");
  if (validation_interval < 1) throw ConfigError("training.validation_interval must be positive");
  if (validation_episodes < 1) throw ConfigError("training.validation_episodes must be positive");
  if (early_stop_patience < 1) throw ConfigError("training.early_stop_patience must be positive");
  if (early_stop_min_delta < 0) throw ConfigError("training.early_stop_min_delta must be non-negative");
  if (checkpoint_keep < 1) throw ConfigError("training.checkpoint_keep must be at least 1");
  if (eval_episodes < 1) throw ConfigError("training.eval_episodes must be positive");
}

void RunConfig::SetEpisodes(int episodes) {
  training.episodes = episodes;
  pga.total_episodes = episodes;
}

void RunConfig::Validate() const {
  scenario.Validate();
  reward.Validate();
  ppo.Validate();
  pga.Validate();
  noise.Validate();
  training.Validate();
  if (pga.total_episodes != training.episodes) {
    throw ConfigError("pga schedule length differs from training.episodes");
  }
  if (rnd.hidden.empty() || rnd.embedding_size < 1 || rnd.minibatch_size < 1 ||
      rnd.epochs < 0 || !(rnd.learning_rate > 0) || rnd.normalizer_warmup < 0 ||
      rnd.unvisited_bonus < 1.0) {
    throw ConfigError("invalid rnd parameters");
  }
  const auto& s = rnd.schedule;
  if (!(s.initial_weight >= 0 && s.decay_start >= 0 && s.decay_start < s.decay_end &&
        s.decay_end <= 1)) {
    throw ConfigError("invalid intrinsic weight schedule");
  }
  if (seeds.empty()) throw ConfigError("training.seeds must not be empty");
  for (const CoverageAxis* axis : {&coverage.day, &coverage.cumulative_yield,
                                   &coverage.soil_moisture, &coverage.cumulative_irrigation}) {
    if (!(axis->width > 0 && axis->upper > axis->lower)) {
      throw ConfigError("invalid coverage axis");
    }
  }
}

RunConfig ParseConfig(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("yaml parse error: " + e.msg);
  }
  RunConfig cfg;
  if (root.IsNull()) {
    cfg.Validate();
    return cfg;
  }
  // A built-in scenario name selects that scenario's defaults; explicit keys
  // then override them.
  const YAML::Node name = root.IsMap() && root["scenario"].IsMap()
                              ? YAML::Node(root["scenario"]["name"])
                              : YAML::Node();
  if (name.IsScalar()) {
    const std::string n = name.Scalar();
    if (n == "florida" || n == "zaragoza") cfg.scenario = ScenarioConfig::ByName(n);
  }
  Reader reader(root);
  VisitConfig(cfg, reader);
  reader.CheckUnknown();
  cfg.pga.total_episodes = cfg.training.episodes;
  cfg.Validate();
  return cfg;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::string EmitConfig(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Emitter emitter;
  VisitConfig(copy, emitter);
  return emitter.str();
}

std::map<std::string, RunConfig> DefaultConfigs() {
  std::map<std::string, RunConfig> out;
  RunConfig florida;
  florida.scenario = ScenarioConfig::Florida();
  out.emplace("florida", florida);
  RunConfig zaragoza;
  zaragoza.scenario = ScenarioConfig::Zaragoza();
  out.emplace("zaragoza", zaragoza);
  return out;
}

RunConfig DefaultConfig(std::string_view name) {
  auto all = DefaultConfigs();
  auto it = all.find(std::string(name));
  if (it == all.end()) throw ConfigError("no default config named '" + std::string(name) + "'");
  return it->second;
}

std::uint64_t ConfigHash(const RunConfig& cfg) { return Fnv1a64(EmitConfig(cfg)); }

}  // namespace croprl
