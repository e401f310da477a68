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

#ifndef CROPRL_TRAINER_H_
#define CROPRL_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "croprl/config.h"
#include "croprl/crop_env.h"
#include "croprl/eval.h"
#include "croprl/ppo.h"
#include "croprl/rnd.h"

namespace croprl {

// One row of the metrics table.
struct EpisodeRecord {
  int episode = 0;
  double progress = 0.0;
  int phase = 1;
  double alpha = 0.0;        // augmentation strength actually applied
  double lambda_int = 0.0;   // intrinsic weight actually applied
  double score = 0.0;
  double yield = 0.0;
  double irrigation = 0.0;
  double nitrogen = 0.0;
  double leaching = 0.0;
  std::optional<double> water_use_efficiency;
  std::optional<double> nitrogen_use_efficiency;
  double intrinsic_mean = 0.0;
  int masked_actions = 0;
  double coverage = 0.0;     // cumulative fraction of occupied bins
  std::optional<UpdateStats> update;  // last PPO update finished this episode
  std::optional<double> rnd_loss;
  std::optional<double> validation_score;
};

// Column order of metrics.csv.
std::string MetricsCsvHeader();
std::string MetricsCsvRow(const EpisodeRecord& record);

struct ValidationPoint {
  int episode = 0;
  double score = 0.0;
};

// True iff at least `patience` episodes of history exist and no validation
// score within the last `patience` episodes beats the best score before that
// window by min_delta or more. History must be non-empty and ordered.
bool EarlyStopCheck(std::span<const ValidationPoint> history, int patience,
                    double min_delta);

struct CheckpointEntry {
  int episode = 0;
  double validation_score = 0.0;
  std::string file;  // relative to the seed directory; empty if not written
  std::shared_ptr<const PolicyNet> policy;
};

// Highest `keep` validation scores, sorted descending; ties go to the later
// episode.
std::vector<CheckpointEntry> EnsembleSelect(std::vector<CheckpointEntry> checkpoints,
                                            int keep = 5);

// Seed shared by every validation run, independent of the training seed.
inline constexpr std::uint64_t kValidationSeed = 20260101;

// Mean clean-condition argmax score over n_episodes fixed validation seeds.
double Validate(Environment& env, Policy& policy, int n_episodes);

using EnvironmentFactory = std::function<std::unique_ptr<Environment>()>;

struct TrainOptions {
  // Directory for this seed's artifacts; nothing is written when empty.
  std::optional<std::filesystem::path> output_dir;
  // Defaults to the surrogate for cfg.scenario and cfg.reward.
  EnvironmentFactory env_factory;
  // Forces the intrinsic weight to zero in every episode.
  bool force_zero_lambda = false;
  std::ostream* progress = nullptr;
  int progress_every = 50;
};

struct RunArtifacts {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> metrics;
  std::vector<CheckpointEntry> checkpoints;  // ensemble, best first
  std::vector<ValidationPoint> validation_history;
  PolicyNet final_policy;
  CoverageGrid coverage;
  std::vector<std::pair<std::string, std::uint64_t>> rng_audit;
  bool early_stopped = false;
  bool weather_perturbation_active = false;
  int ppo_updates = 0;
  std::int64_t total_steps = 0;
  std::int64_t steps_in_updates = 0;
  std::string abort_reason;
};

// Trains one seed. On environment or numeric failure the artifacts gathered
// so far are written and the error is rethrown.
RunArtifacts Train(const RunConfig& cfg, std::uint64_t seed, const TrainOptions& options = {});

void WriteMetricsCsv(std::ostream& out, std::span<const EpisodeRecord> records);

// Policy checkpoint files.
void SavePolicy(const std::filesystem::path& path, const PolicyNet& net);
PolicyNet LoadPolicy(const std::filesystem::path& path);

}  // namespace croprl

#endif  // CROPRL_TRAINER_H_
