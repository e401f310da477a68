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

#ifndef CROPRL_CONFIG_H_
#define CROPRL_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "croprl/crop_env.h"
#include "croprl/noise.h"
#include "croprl/pga.h"
#include "croprl/ppo.h"
#include "croprl/rnd.h"

namespace croprl {

struct TrainingConfig {
  int episodes = 2000;
  int validation_interval = 50;
  int validation_episodes = 5;
  double early_stop_min_delta = 20.0;
  int early_stop_patience = 300;   // episodes
  int checkpoint_keep = 5;
  int eval_episodes = 20;          // per condition per seed
  bool early_stopping = true;

  void Validate() const;
};

// Everything one training run needs besides its seed.
struct RunConfig {
  ScenarioConfig scenario;
  RewardWeights reward;
  PpoConfig ppo;
  PgaConfig pga;
  NoiseConfig noise;
  RndConfig rnd;
  TrainingConfig training;
  CoverageBounds coverage;
  std::vector<std::uint64_t> seeds = {42, 123, 456, 789, 1024};

  // Applies a new episode budget to every schedule that depends on it.
  void SetEpisodes(int episodes);
  void Validate() const;
};

// Parses YAML text. Unknown keys and type mismatches raise ConfigError;
// missing keys keep their defaults.
RunConfig ParseConfig(std::string_view yaml_text);
RunConfig LoadConfig(const std::filesystem::path& path);

// YAML with every field present. Values that are not published
// hyperparameters carry a "# framework default" comment.
std::string EmitConfig(const RunConfig& cfg);

// Bundled "florida" and "zaragoza" configurations.
std::map<std::string, RunConfig> DefaultConfigs();
RunConfig DefaultConfig(std::string_view name);

// FNV-1a of the emitted YAML; identifies a configuration in manifests.
std::uint64_t ConfigHash(const RunConfig& cfg);

}  // namespace croprl

#endif  // CROPRL_CONFIG_H_
