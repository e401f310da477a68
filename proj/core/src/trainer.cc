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

#include "croprl/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "croprl/errors.h"
#include "croprl/noise.h"
#include "croprl/pga.h"
#include "croprl/rng.h"
#include "json.hpp"

namespace croprl {
namespace {

using Json = nlohmann::json;

std::string Num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string Opt(const std::optional<double>& v) { return v ? Num(*v) : std::string(); }

Eigen::VectorXd ScaledObservation(const Observation& obs) {
  const Observation x = NetworkInput(obs);
  return Eigen::Map<const Eigen::VectorXd>(x.data(), kObservationSize);
}

std::string EpisodeFileName(int episode) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "episode_%04d.ckpt", episode);
  return buf;
}

// Predictor updates over the states gathered since the last PPO update.
double TrainRnd(RndNets& rnd, const Eigen::MatrixXd& states, const RndConfig& cfg, Rng& rng) {
  const Eigen::Index n = states.cols();
  if (n == 0 || cfg.epochs == 0) return 0.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double loss = 0.0;
  int batches = 0;
  const auto mb = static_cast<Eigen::Index>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index len = std::min(mb, n - start);
      Eigen::MatrixXd batch(states.rows(), len);
      for (Eigen::Index j = 0; j < len; ++j) {
        batch.col(j) = states.col(order[static_cast<std::size_t>(start + j)]);
      }
      loss += rnd.TrainPredictor(batch);
      ++batches;
    }
  }
  return loss / batches;
}

void WriteManifest(const std::filesystem::path& dir, const RunConfig& cfg,
                   const RunArtifacts& art, int episodes_run) {
  Json j;
  j["seed"] = art.seed;
  j["config_hash"] = ConfigHash(cfg);
  j["scenario"] = cfg.scenario.name;
  j["mode"] = std::string(ToString(cfg.ppo.mode));
  j["pga_enabled"] = cfg.pga.enabled;
  j["episodes_planned"] = cfg.training.episodes;
  j["episodes_run"] = episodes_run;
  j["early_stopped"] = art.early_stopped;
  j["weather_perturbation_active"] = art.weather_perturbation_active;
  j["ppo_updates"] = art.ppo_updates;
  j["total_steps"] = art.total_steps;
  j["steps_in_updates"] = art.steps_in_updates;
  j["final_checkpoint"] = "final.ckpt";
  j["coverage"] = art.coverage.Coverage();
  j["checkpoint_format_version"] = nn::kCheckpointVersion;
  if (!art.abort_reason.empty()) j["abort_reason"] = art.abort_reason;
  Json members = Json::array();
  double sum = 0.0;
  for (const CheckpointEntry& c : art.checkpoints) {
    members.push_back({{"episode", c.episode}, {"validation_score", c.validation_score},
                       {"file", c.file}});
    sum += c.validation_score;
  }
  j["ensemble"] = members;
  if (!art.checkpoints.empty()) {
    j["ensemble_mean_validation_score"] = sum / static_cast<double>(art.checkpoints.size());
  }
  Json audit = Json::array();
  for (const auto& [name, seed] : art.rng_audit) audit.push_back({{"stream", name}, {"seed", seed}});
  j["rng_audit"] = audit;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

void WriteArtifacts(const std::filesystem::path& dir, const RunConfig& cfg,
                    const RunArtifacts& art) {
  {
    std::ofstream out(dir / "metrics.csv");
    WriteMetricsCsv(out, art.metrics);
  }
  SavePolicy(dir / "final.ckpt", art.final_policy);
  {
    std::ofstream out(dir / "coverage.json");
    WriteCoverageJson(out, art.coverage);
  }
  {
    std::ofstream out(dir / "config.yaml");
    out << EmitConfig(cfg);
  }
  WriteManifest(dir, cfg, art, static_cast<int>(art.metrics.size()));
}

}  // namespace

std::string MetricsCsvHeader() {
  return "episode,progress,phase,alpha,lambda_int,score,yield,irrigation,nitrogen,leaching,"
         "wue,nue,intrinsic_mean,masked_actions,coverage,policy_loss,value_loss_ext,"
         "value_loss_int,entropy,clip_fraction,learning_rate,rnd_loss,validation_score";
}

std::string MetricsCsvRow(const EpisodeRecord& r) {
  std::string row = std::to_string(r.episode) + ',' + Num(r.progress) + ',' +
                    std::to_string(r.phase) + ',' + Num(r.alpha) + ',' + Num(r.lambda_int) +
                    ',' + Num(r.score) + ',' + Num(r.yield) + ',' + Num(r.irrigation) + ',' +
                    Num(r.nitrogen) + ',' + Num(r.leaching) + ',' +
                    Opt(r.water_use_efficiency) + ',' + Opt(r.nitrogen_use_efficiency) + ',' +
                    Num(r.intrinsic_mean) + ',' + std::to_string(r.masked_actions) + ',' +
                    Num(r.coverage) + ',';
  if (r.update) {
    row += Num(r.update->policy_loss) + ',' + Num(r.update->value_loss_ext) + ',' +
           Num(r.update->value_loss_int) + ',' + Num(r.update->entropy) + ',' +
           Num(r.update->clip_fraction) + ',' + Num(r.update->learning_rate) + ',';
  } else {
    row += ",,,,,,";
  }
  row += Opt(r.rnd_loss) + ',' + Opt(r.validation_score);
  return row;
}

void WriteMetricsCsv(std::ostream& out, std::span<const EpisodeRecord> records) {
  out << MetricsCsvHeader() << '\n';
  for (const EpisodeRecord& r : records) out << MetricsCsvRow(r) << '\n';
}

bool EarlyStopCheck(std::span<const ValidationPoint> history, int patience,
                    double min_delta) {
  if (history.empty()) throw ContractViolation("early stopping needs a non-empty history");
  if (patience < 1) throw ContractViolation("patience must be positive");
  const int last = history.back().episode;
  const int window_start = last - patience;  // entries after this are in the window
  if (window_start < history.front().episode) return false;
  double prior_best = -std::numeric_limits<double>::infinity();
  bool have_prior = false;
  for (const ValidationPoint& p : history) {
    if (p.episode <= window_start) {
      prior_best = std::max(prior_best, p.score);
      have_prior = true;
    }
  }
  if (!have_prior) return false;
  for (const ValidationPoint& p : history) {
    if (p.episode > window_start && p.score - prior_best >= min_delta) return false;
  }
  return true;
}

std::vector<CheckpointEntry> EnsembleSelect(std::vector<CheckpointEntry> checkpoints,
                                            int keep) {
  if (checkpoints.empty()) throw ContractViolation("ensemble selection needs a checkpoint");
  if (keep < 1) throw ContractViolation("ensemble size must be at least 1");
  std::stable_sort(checkpoints.begin(), checkpoints.end(),
                   [](const CheckpointEntry& a, const CheckpointEntry& b) {
                     if (a.validation_score != b.validation_score) {
                       return a.validation_score > b.validation_score;
                     }
                     return a.episode > b.episode;
                   });
  if (checkpoints.size() > static_cast<std::size_t>(keep)) {
    checkpoints.resize(static_cast<std::size_t>(keep));
  }
  return checkpoints;
}

double Validate(Environment& env, Policy& policy, int n_episodes) {
  if (n_episodes < 1) throw ContractViolation("validation needs at least one episode");
  const std::uint64_t seeds[] = {kValidationSeed};
  return Evaluate(env, policy, EvalCondition::kClean, n_episodes, seeds).score.mean;
}

void SavePolicy(const std::filesystem::path& path, const PolicyNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::vector<nn::Mlp> nets = net.Networks();
  nn::SaveNetworks(out, nets);
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

PolicyNet LoadPolicy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return PolicyNet::FromNetworks(nn::LoadNetworks(in));
}

RunArtifacts Train(const RunConfig& cfg_in, std::uint64_t seed, const TrainOptions& options) {
  RunConfig cfg = cfg_in;
  cfg.pga.total_episodes = cfg.training.episodes;
  cfg.Validate();

  const EnvironmentFactory factory =
      options.env_factory ? options.env_factory : EnvironmentFactory([&cfg] {
        return std::make_unique<SurrogateEnv>(cfg.scenario, cfg.reward);
      });
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  RunArtifacts art;
  art.seed = seed;
  art.coverage = CoverageGrid(cfg.coverage);

  RngStreams streams(seed);
  Rng init_rng = streams.Stream("policy-init");
  PolicyNet net = PolicyNet::ForCropObservation(cfg.ppo.hidden, init_rng);
  PolicyAdam adam = PolicyAdam::For(net);
  const bool use_rnd = cfg.ppo.mode != AdvantageMode::kPlain;
  Rng rnd_init = streams.Stream("rnd-init");
  RndNets rnd(kObservationSize, cfg.rnd, rnd_init);
  ObservationNormalizer normalizer(kObservationSize, cfg.rnd.normalizer_warmup);
  Rng sample_rng = streams.Stream("policy-sampling");
  Rng mask_rng = streams.Stream("masking");
  Rng shuffle_rng = streams.Stream("minibatch-shuffle");
  Rng rnd_shuffle = streams.Stream("rnd-shuffle");
  NoiseStreams obs_noise{streams.Stream("obs-noise-temperature"),
                         streams.Stream("obs-noise-rainfall"),
                         streams.Stream("obs-noise-moisture")};
  NoiseStreams weather_noise{streams.Stream("weather-noise-temperature"),
                             streams.Stream("weather-noise-rainfall"),
                             streams.Stream("weather-noise-moisture")};

  std::unique_ptr<Environment> env = factory();
  std::unique_ptr<Environment> validation_env;
  double alpha = 0.0;
  if (cfg.pga.enabled && cfg.pga.weather_perturbation) {
    art.weather_perturbation_active = env->SetWeatherHook([&](Weather& w) {
      if (alpha > 0.0) w = PerturbWeather(w, alpha, cfg.noise, weather_noise);
    });
  }

  RolloutBuffer buffer(cfg.ppo.buffer_size);
  Eigen::MatrixXd rnd_states(kObservationSize, cfg.ppo.buffer_size);
  Eigen::Index rnd_count = 0;
  std::vector<CheckpointEntry> checkpoints;
  const int episodes = cfg.training.episodes;

  auto run_update = [&](const Observation& next_obs, bool last_done, EpisodeRecord& record) {
    double boot_ext = 0.0, boot_int = 0.0;
    if (!last_done) {
      const Eigen::Map<const Eigen::VectorXd> x(next_obs.data(), kObservationSize);
      const PolicyNet::Output out = net.Forward(x);
      boot_ext = out.value_ext(0);
      boot_int = out.value_int(0);
    }
    buffer.Finalize(boot_ext, boot_int, cfg.ppo);
    const bool train_int =
        cfg.ppo.mode == AdvantageMode::kCoupled &&
        std::any_of(buffer.lambda_int.begin(), buffer.lambda_int.end(),
                    [](double l) { return l != 0.0; });
    const double lr = nn::LinearDecayLr(cfg.ppo.learning_rate, record.progress);
    record.update = PpoUpdate(net, adam, buffer, cfg.ppo, lr, shuffle_rng, train_int);
    if (use_rnd) {
      record.rnd_loss = TrainRnd(rnd, rnd_states.leftCols(rnd_count), cfg.rnd, rnd_shuffle);
    }
    ++art.ppo_updates;
    art.steps_in_updates += buffer.size();
    buffer.Clear();
    rnd_count = 0;
  };

  try {
    for (int episode = 0; episode < episodes; ++episode) {
      const ScheduleState sched = ScheduleAt(episode, cfg.pga);
      EpisodeRecord record;
      record.episode = episode;
      record.progress = sched.progress;
      record.phase = sched.phase;
      record.alpha = sched.alpha;
      record.lambda_int = (options.force_zero_lambda || cfg.ppo.mode != AdvantageMode::kCoupled)
                              ? 0.0
                              : LambdaInt(sched.progress, cfg.rnd.schedule);
      alpha = sched.alpha;
      const bool noise_on = cfg.pga.observation_noise && alpha > 0.0;
      const bool mask_on = cfg.pga.action_masking && alpha > 0.0;

      Observation obs = env->Reset(streams.DeriveSeed("weather", static_cast<std::uint64_t>(episode)));
      art.coverage.RecordVisit(obs);
      double intrinsic_sum = 0.0;
      int steps = 0;
      while (true) {
        const Observation seen = noise_on ? Inject(obs, alpha, cfg.noise, obs_noise) : obs;
        const ActResult act = Act(net, seen, &sample_rng);
        int action = act.action;
        double log_prob = act.log_prob;
        if (mask_on && ActionMaskGate(alpha, mask_rng, cfg.pga)) {
          action = ReplaceMaskedAction(ActionChoice::FromIndex(action), mask_rng).index();
          log_prob = act.log_probs(action);
          ++record.masked_actions;
        }

        const StepOutcome outcome = env->Step(ActionChoice::FromIndex(action));
        if (!std::isfinite(outcome.reward)) throw NumericError("environment returned a non-finite reward");

        // Novelty of the true state the action led to; coverage counts it afterwards.
        const CoverageBin bin = art.coverage.BinOf(outcome.observation);
        double r_int = 0.0;
        if (use_rnd) {
          const Eigen::VectorXd scaled = ScaledObservation(outcome.observation);
          normalizer.Update(scaled);
          const Eigen::VectorXd x = normalizer.Normalize(scaled);
          r_int = rnd.IntrinsicReward(x);
          if (cfg.rnd.adaptive_bonus && !art.coverage.IsOccupied(bin)) {
            r_int *= cfg.rnd.unvisited_bonus;
          }
          rnd_states.col(rnd_count++) = x;
        }
        art.coverage.RecordVisit(bin);

        buffer.Add({seen, action, log_prob, outcome.reward, r_int, act.value_ext,
                    act.value_int, outcome.done, record.lambda_int});
        record.score += outcome.reward;
        record.irrigation += outcome.info.irrigation_applied;
        record.nitrogen += outcome.info.nitrogen_applied;
        record.leaching += outcome.info.nitrate_leached;
        intrinsic_sum += r_int;
        ++steps;
        ++art.total_steps;
        obs = outcome.observation;
        if (buffer.full()) run_update(obs, outcome.done, record);
        if (outcome.done) {
          record.yield = outcome.info.yield;
          break;
        }
      }
      const bool last_episode = episode + 1 == episodes;
      if (last_episode && buffer.size() >= 2) run_update(obs, true, record);

      record.water_use_efficiency = UseEfficiency(record.yield, record.irrigation);
      record.nitrogen_use_efficiency = UseEfficiency(record.yield, record.nitrogen);
      record.intrinsic_mean = steps > 0 ? intrinsic_sum / steps : 0.0;
      record.coverage = art.coverage.Coverage();

      bool stop = false;
      if ((episode + 1) % cfg.training.validation_interval == 0 || last_episode) {
        if (!validation_env) validation_env = factory();
        NetworkPolicy policy(net);
        const double score = Validate(*validation_env, policy, cfg.training.validation_episodes);
        record.validation_score = score;
        art.validation_history.push_back({episode + 1, score});

        CheckpointEntry entry{episode + 1, score, "", std::make_shared<const PolicyNet>(net)};
        if (options.output_dir) {
          entry.file = EpisodeFileName(episode + 1);
          SavePolicy(*options.output_dir / entry.file, net);
        }
        checkpoints.push_back(entry);
        std::vector<CheckpointEntry> kept =
            EnsembleSelect(checkpoints, cfg.training.checkpoint_keep);
        if (options.output_dir) {
          for (const CheckpointEntry& c : checkpoints) {
            const bool retained = std::any_of(kept.begin(), kept.end(), [&](const auto& k) {
              return k.episode == c.episode;
            });
            if (!retained && !c.file.empty()) {
              std::filesystem::remove(*options.output_dir / c.file);
            }
          }
        }
        checkpoints = kept;
        if (cfg.training.early_stopping &&
            EarlyStopCheck(art.validation_history, cfg.training.early_stop_patience,
                           cfg.training.early_stop_min_delta)) {
          stop = true;
        }
      }
      art.metrics.push_back(record);

      if (options.progress && ((episode + 1) % options.progress_every == 0 || last_episode)) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "seed %llu episode %d/%d score %.1f yield %.0f alpha %.2f lambda %.2f "
                      "coverage %.4f\n",
                      static_cast<unsigned long long>(seed), episode + 1, episodes, record.score,
                      record.yield, record.alpha, record.lambda_int, record.coverage);
        *options.progress << line << std::flush;
      }
      if (stop) {
        art.early_stopped = true;
        // Steps still buffered join one last update so none go unused.
        if (buffer.size() >= 2) run_update(obs, true, art.metrics.back());
        break;
      }
    }
  } catch (const Error& e) {
    art.abort_reason = e.what();
    art.final_policy = net;
    art.checkpoints = checkpoints;
    art.rng_audit = streams.audit_log();
    if (options.output_dir) WriteArtifacts(*options.output_dir, cfg, art);
    throw;
  }

  art.final_policy = net;
  art.checkpoints = checkpoints;
  art.rng_audit = streams.audit_log();
  if (options.output_dir) WriteArtifacts(*options.output_dir, cfg, art);
  return art;
}

}  // namespace croprl
