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

#ifndef CROPRL_EVAL_H_
#define CROPRL_EVAL_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "croprl/crop_env.h"
#include "croprl/noise.h"
#include "croprl/ppo.h"
#include "croprl/rnd.h"

namespace croprl {

// Maps what the agent observes to an action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionChoice Choose(const Observation& observation) = 0;
  virtual std::string name() const = 0;
};

// Greedy (argmax) action of a trained network.
class NetworkPolicy : public Policy {
 public:
  explicit NetworkPolicy(PolicyNet net, std::string name = "network");
  ActionChoice Choose(const Observation& observation) override;
  std::string name() const override { return name_; }
  const PolicyNet& net() const { return net_; }

 private:
  PolicyNet net_;
  std::string name_;
};

// Calendar schedule keyed on the observed day.
class FixedManagementPolicy : public Policy {
 public:
  explicit FixedManagementPolicy(FixedManagementSchedule schedule = {});
  ActionChoice Choose(const Observation& observation) override;
  std::string name() const override { return "fixed-management"; }

 private:
  FixedManagementSchedule schedule_;
};

class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(ActionChoice action) : action_(action) {}
  ActionChoice Choose(const Observation&) override { return action_; }
  std::string name() const override { return "constant-" + std::to_string(action_.index()); }

 private:
  ActionChoice action_;
};

struct EpisodeMetrics {
  double score = 0.0;
  double yield = 0.0;
  double irrigation = 0.0;
  double nitrogen = 0.0;
  double leaching = 0.0;
  std::optional<double> water_use_efficiency;     // kg/ha per mm
  std::optional<double> nitrogen_use_efficiency;  // kg yield per kg N
};

// yield / denominator, absent when the denominator is zero.
std::optional<double> UseEfficiency(double yield, double input);

// One episode with `condition` applied to what the policy sees; the
// environment itself is never perturbed. Visited true states are recorded in
// `coverage` when given.
EpisodeMetrics RunEpisode(Environment& env, Policy& policy, EvalCondition condition,
                          std::uint64_t env_seed, Rng& perturbation_rng,
                          int moisture_layers = 1, CoverageGrid* coverage = nullptr);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population
  int count = 0;
};
Stat Summarize(std::span<const double> values);

struct MetricsRecord {
  EvalCondition condition = EvalCondition::kClean;
  Stat score;
  Stat yield;
  std::optional<Stat> water_use_efficiency;
  std::optional<Stat> nitrogen_use_efficiency;
  std::vector<double> per_seed_score;   // mean score of each seed
  std::vector<std::uint64_t> seeds;
  int episodes_per_seed = 0;
};

// Environment seed of evaluation episode `episode` under `seed`; shared by
// every condition so trajectories differ only through the policy.
std::uint64_t EvalEpisodeSeed(std::uint64_t seed, int episode);

// n_episodes argmax rollouts per seed, aggregated over all episodes.
MetricsRecord Evaluate(Environment& env, Policy& policy, EvalCondition condition,
                       int n_episodes, std::span<const std::uint64_t> seeds,
                       int moisture_layers = 1);

// perturbed / clean, with negatives clamped to zero; absent when clean <= 0.
std::optional<double> Retention(double perturbed_score, double clean_score);

std::vector<MetricsRecord> Sweep(Environment& env, Policy& policy,
                                 std::span<const EvalCondition> conditions, int n_episodes,
                                 std::span<const std::uint64_t> seeds, int moisture_layers = 1);

struct SensitivityRow {
  MetricsRecord metrics;
  double score_reduction_pct = 0.0;  // (clean - perturbed) / clean * 100
  double yield_reduction_pct = 0.0;
  Stat per_seed_score_reduction_pct;
};

struct SensitivityTable {
  std::string policy;
  std::vector<SensitivityRow> rows;  // clean first, then the four channels
};

SensitivityTable SensitivityAnalysis(Environment& env, Policy& policy, int n_episodes,
                                     std::span<const std::uint64_t> seeds,
                                     int moisture_layers = 1);

struct RobustnessRow {
  EvalCondition condition = EvalCondition::kClean;
  MetricsRecord a;
  MetricsRecord b;
  std::optional<double> retention_a;
  std::optional<double> retention_b;
};

struct RobustnessReport {
  std::string policy_a;
  std::string policy_b;
  std::vector<RobustnessRow> rows;
};

// Clean, temperature, rainfall and combined conditions for two policies.
// Each policy's retention is relative to its own clean score.
RobustnessReport RobustnessComparison(Environment& env, Policy& a, Policy& b, int n_episodes,
                                      std::span<const std::uint64_t> seeds,
                                      int moisture_layers = 1);

struct CoverageSummary {
  std::string configuration;
  int runs = 0;
  std::int64_t occupied = 0;
  std::int64_t total = 0;
  double coverage = 0.0;
};

// Union of the grids of each configuration over its runs.
std::vector<CoverageSummary> CoverageComparison(
    const std::map<std::string, std::vector<CoverageGrid>>& runs);

void WriteCoverageJson(std::ostream& out, const CoverageGrid& grid);
CoverageGrid ReadCoverageJson(std::istream& in);

std::string FormatSweepText(const std::vector<MetricsRecord>& records, const std::string& policy);
std::string FormatSweepCsv(const std::vector<MetricsRecord>& records, const std::string& policy);
std::string FormatSensitivityText(const SensitivityTable& table);
std::string FormatSensitivityCsv(const SensitivityTable& table);
std::string SensitivityJson(const SensitivityTable& table);
std::string FormatRobustnessText(const RobustnessReport& report);
std::string FormatRobustnessCsv(const RobustnessReport& report);
std::string RobustnessJson(const RobustnessReport& report);
std::string FormatCoverageText(const std::vector<CoverageSummary>& rows);

// Renders a stored sensitivity or robustness JSON document as text.
std::string RenderReportJson(const std::string& json_text);

}  // namespace croprl

#endif  // CROPRL_EVAL_H_
