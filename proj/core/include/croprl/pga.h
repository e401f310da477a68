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

#ifndef CROPRL_PGA_H_
#define CROPRL_PGA_H_

#include "croprl/crop_env.h"
#include "croprl/noise.h"
#include "croprl/rng.h"

namespace croprl {

struct PgaConfig {
  bool enabled = true;
  int total_episodes = 2000;
  double phase1_end_p = 0.4;
  double phase2_end_p = 0.6;
  double mask_prob_scale = 0.1;
  bool observation_noise = true;
  bool weather_perturbation = true;
  bool action_masking = true;

  void Validate() const;
};

struct ScheduleState {
  int episode = 0;
  double progress = 0.0;
  double alpha = 0.0;
  int phase = 1;
};

// Augmentation strength: 0 before phase 2, linear ramp through phase 2,
// 1 from phase 3 on. Throws ContractViolation for p outside [0, 1].
double Alpha(double p, const PgaConfig& cfg = {});

// 1, 2 or 3; each boundary belongs to the later phase.
int Phase(double p, const PgaConfig& cfg = {});

// Progress is episode / total_episodes, fixed for the whole episode. With
// `cfg.enabled == false` alpha stays 0 (clean training).
ScheduleState ScheduleAt(int episode, const PgaConfig& cfg);

// True with probability mask_prob_scale * alpha.
bool ActionMaskGate(double alpha, Rng& rng, const PgaConfig& cfg = {});

// Uniform draw from the 24 actions other than `action`.
ActionChoice ReplaceMaskedAction(ActionChoice action, Rng& rng);

// Runs the temperature and rainfall noise channels over the simulator's
// true weather, gated by the same thresholds as observation noise.
Weather PerturbWeather(const Weather& weather, double alpha,
                       const NoiseConfig& cfg, NoiseStreams& streams);

}  // namespace croprl

#endif  // CROPRL_PGA_H_
