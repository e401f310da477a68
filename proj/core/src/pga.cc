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

#include "croprl/pga.h"

#include <random>

#include "croprl/errors.h"

namespace croprl {
namespace {

void CheckProgress(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractViolation("training progress must lie in [0, 1]");
  }
}

}  // namespace

void PgaConfig::Validate() const {
  if (total_episodes <= 0) throw ConfigError("total_episodes must be positive");
  if (!(0.0 < phase1_end_p && phase1_end_p < phase2_end_p &&
        phase2_end_p <= 1.0)) {
    throw ConfigError("need 0 < phase1_end_p < phase2_end_p <= 1");
  }
  if (!(mask_prob_scale >= 0.0 && mask_prob_scale <= 1.0)) {
    throw ConfigError("mask_prob_scale must lie in [0, 1]");
  }
}

double Alpha(double p, const PgaConfig& cfg) {
  CheckProgress(p);
  if (p < cfg.phase1_end_p) return 0.0;
  if (p >= cfg.phase2_end_p) return 1.0;
  return (p - cfg.phase1_end_p) / (cfg.phase2_end_p - cfg.phase1_end_p);
}

int Phase(double p, const PgaConfig& cfg) {
  CheckProgress(p);
  if (p < cfg.phase1_end_p) return 1;
  if (p < cfg.phase2_end_p) return 2;
  return 3;
}

ScheduleState ScheduleAt(int episode, const PgaConfig& cfg) {
  if (episode < 0 || episode > cfg.total_episodes) {
    throw ContractViolation("episode outside the configured schedule");
  }
  ScheduleState s;
  s.episode = episode;
  s.progress = static_cast<double>(episode) / cfg.total_episodes;
  s.phase = Phase(s.progress, cfg);
  s.alpha = cfg.enabled ? Alpha(s.progress, cfg) : 0.0;
  return s;
}

bool ActionMaskGate(double alpha, Rng& rng, const PgaConfig& cfg) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractViolation("alpha must lie in [0, 1]");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < cfg.mask_prob_scale * alpha;
}

ActionChoice ReplaceMaskedAction(ActionChoice action, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, kNumActions - 2);
  int index = pick(rng);
  if (index >= action.index()) ++index;
  return ActionChoice::FromIndex(index);
}

Weather PerturbWeather(const Weather& weather, double alpha,
                       const NoiseConfig& cfg, NoiseStreams& streams) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractViolation("alpha must lie in [0, 1]");
  }
  Weather out = weather;
  const ChannelActivation active = ActiveChannels(alpha, cfg);
  if (active.temperature) {
    out.temperature = TempNoise(out.temperature, alpha, cfg, streams.temperature);
  }
  if (active.rainfall) {
    out.rainfall = RainNoise(out.rainfall, alpha, cfg, streams.rainfall);
  }
  return out;
}

}  // namespace croprl
