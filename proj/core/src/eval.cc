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

#include "croprl/eval.h"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "croprl/errors.h"
#include "croprl/rng.h"
#include "json.hpp"

namespace croprl {
namespace {

using Json = nlohmann::json;

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string text = buf;
  if (text[0] == '-' && text.find_first_of("123456789") == std::string::npos) text.erase(0, 1);
  return text;
}

std::string Pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string PadLeft(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

double ReductionPct(double clean, double perturbed) {
  if (clean == 0.0) return 0.0;
  return (clean - perturbed) / clean * 100.0;
}

std::string RetentionText(const std::optional<double>& r) {
  return r ? Fixed(*r * 100.0, 1) + "%" : "n/a";
}

Json StatJson(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}}; }

Stat StatFrom(const Json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("count").get<int>()};
}

Json RecordJson(const MetricsRecord& r) {
  Json j;
  j["condition"] = std::string(ToString(r.condition));
  j["score"] = StatJson(r.score);
  j["yield"] = StatJson(r.yield);
  j["wue"] = r.water_use_efficiency ? StatJson(*r.water_use_efficiency) : Json(nullptr);
  j["nue"] = r.nitrogen_use_efficiency ? StatJson(*r.nitrogen_use_efficiency) : Json(nullptr);
  j["per_seed_score"] = r.per_seed_score;
  j["seeds"] = r.seeds;
  j["episodes_per_seed"] = r.episodes_per_seed;
  return j;
}

MetricsRecord RecordFrom(const Json& j) {
  MetricsRecord r;
  r.condition = ParseEvalCondition(j.at("condition").get<std::string>());
  r.score = StatFrom(j.at("score"));
  r.yield = StatFrom(j.at("yield"));
  if (!j.at("wue").is_null()) r.water_use_efficiency = StatFrom(j.at("wue"));
  if (!j.at("nue").is_null()) r.nitrogen_use_efficiency = StatFrom(j.at("nue"));
  r.per_seed_score = j.at("per_seed_score").get<std::vector<double>>();
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.episodes_per_seed = j.at("episodes_per_seed").get<int>();
  return r;
}

Json OptionalJson(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> OptionalFrom(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string StatText(const std::optional<Stat>& s, int digits) {
  return s ? Fixed(s->mean, digits) + " +/- " + Fixed(s->std, digits) : "n/a";
}

}  // namespace

NetworkPolicy::NetworkPolicy(PolicyNet net, std::string name)
    : net_(std::move(net)), name_(std::move(name)) {}

ActionChoice NetworkPolicy::Choose(const Observation& observation) {
  return ActionChoice::FromIndex(Act(net_, observation, nullptr, true).action);
}

FixedManagementPolicy::FixedManagementPolicy(FixedManagementSchedule schedule)
    : schedule_(std::move(schedule)) {}

ActionChoice FixedManagementPolicy::Choose(const Observation& observation) {
  return schedule_.ActionForDay(static_cast<int>(std::lround(observation[obs::kDay])));
}

std::optional<double> UseEfficiency(double yield, double input) {
  if (input == 0.0) return std::nullopt;
  return yield / input;
}

EpisodeMetrics RunEpisode(Environment& env, Policy& policy, EvalCondition condition,
                          std::uint64_t env_seed, Rng& perturbation_rng, int moisture_layers,
                          CoverageGrid* coverage) {
  EpisodeMetrics m;
  Observation observation = env.Reset(env_seed);
  if (coverage) coverage->RecordVisit(observation);
  while (true) {
    const Observation seen =
        EvalPerturbation(observation, condition, perturbation_rng, moisture_layers);
    const ActionChoice action = policy.Choose(seen);
    const StepOutcome outcome = env.Step(action);
    m.score += outcome.reward;
    m.irrigation += outcome.info.irrigation_applied;
    m.nitrogen += outcome.info.nitrogen_applied;
    m.leaching += outcome.info.nitrate_leached;
    observation = outcome.observation;
    if (coverage) coverage->RecordVisit(observation);
    if (outcome.done) {
      m.yield = outcome.info.yield;
      break;
    }
  }
  m.water_use_efficiency = UseEfficiency(m.yield, m.irrigation);
  m.nitrogen_use_efficiency = UseEfficiency(m.yield, m.nitrogen);
  return m;
}

Stat Summarize(std::span<const double> values) {
  Stat s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / s.count);
  return s;
}

std::uint64_t EvalEpisodeSeed(std::uint64_t seed, int episode) {
  return DeriveSeed(seed, "eval-episode", static_cast<std::uint64_t>(episode));
}

MetricsRecord Evaluate(Environment& env, Policy& policy, EvalCondition condition,
                       int n_episodes, std::span<const std::uint64_t> seeds,
                       int moisture_layers) {
  if (n_episodes < 1) throw ContractViolation("evaluation needs at least one episode");
  if (seeds.empty()) throw ContractViolation("evaluation needs at least one seed");
  MetricsRecord record;
  record.condition = condition;
  record.seeds.assign(seeds.begin(), seeds.end());
  record.episodes_per_seed = n_episodes;
  std::vector<double> scores, yields, wue, nue;
  for (std::uint64_t seed : seeds) {
    Rng noise_rng(DeriveSeed(seed, "eval-noise-" + std::string(ToString(condition)), 0));
    double seed_sum = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
      const EpisodeMetrics m = RunEpisode(env, policy, condition, EvalEpisodeSeed(seed, e),
                                          noise_rng, moisture_layers);
      scores.push_back(m.score);
      yields.push_back(m.yield);
      if (m.water_use_efficiency) wue.push_back(*m.water_use_efficiency);
      if (m.nitrogen_use_efficiency) nue.push_back(*m.nitrogen_use_efficiency);
      seed_sum += m.score;
    }
    record.per_seed_score.push_back(seed_sum / n_episodes);
  }
  record.score = Summarize(scores);
  record.yield = Summarize(yields);
  if (!wue.empty()) record.water_use_efficiency = Summarize(wue);
  if (!nue.empty()) record.nitrogen_use_efficiency = Summarize(nue);
  return record;
}

std::optional<double> Retention(double perturbed_score, double clean_score) {
  if (!(clean_score > 0.0)) return std::nullopt;
  return std::max(0.0, perturbed_score) / clean_score;
}

std::vector<MetricsRecord> Sweep(Environment& env, Policy& policy,
                                 std::span<const EvalCondition> conditions, int n_episodes,
                                 std::span<const std::uint64_t> seeds, int moisture_layers) {
  std::vector<MetricsRecord> out;
  for (EvalCondition c : conditions) {
    out.push_back(Evaluate(env, policy, c, n_episodes, seeds, moisture_layers));
  }
  return out;
}

SensitivityTable SensitivityAnalysis(Environment& env, Policy& policy, int n_episodes,
                                     std::span<const std::uint64_t> seeds,
                                     int moisture_layers) {
  static constexpr EvalCondition kRows[] = {
      EvalCondition::kClean, EvalCondition::kTemperature, EvalCondition::kRainfall,
      EvalCondition::kSoilMoisture, EvalCondition::kSolarRadiation};
  SensitivityTable table;
  table.policy = policy.name();
  const std::vector<MetricsRecord> records =
      Sweep(env, policy, kRows, n_episodes, seeds, moisture_layers);
  const MetricsRecord& clean = records.front();
  for (const MetricsRecord& r : records) {
    SensitivityRow row;
    row.metrics = r;
    row.score_reduction_pct = ReductionPct(clean.score.mean, r.score.mean);
    row.yield_reduction_pct = ReductionPct(clean.yield.mean, r.yield.mean);
    std::vector<double> per_seed;
    for (std::size_t i = 0; i < r.per_seed_score.size(); ++i) {
      per_seed.push_back(ReductionPct(clean.per_seed_score[i], r.per_seed_score[i]));
    }
    row.per_seed_score_reduction_pct = Summarize(per_seed);
    table.rows.push_back(std::move(row));
  }
  return table;
}

RobustnessReport RobustnessComparison(Environment& env, Policy& a, Policy& b, int n_episodes,
                                      std::span<const std::uint64_t> seeds,
                                      int moisture_layers) {
  static constexpr EvalCondition kRows[] = {EvalCondition::kClean, EvalCondition::kTemperature,
                                            EvalCondition::kRainfall, EvalCondition::kCombined};
  RobustnessReport report;
  report.policy_a = a.name();
  report.policy_b = b.name();
  const auto ra = Sweep(env, a, kRows, n_episodes, seeds, moisture_layers);
  const auto rb = Sweep(env, b, kRows, n_episodes, seeds, moisture_layers);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    RobustnessRow row;
    row.condition = kRows[i];
    row.a = ra[i];
    row.b = rb[i];
    row.retention_a = Retention(ra[i].score.mean, ra[0].score.mean);
    row.retention_b = Retention(rb[i].score.mean, rb[0].score.mean);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<CoverageSummary> CoverageComparison(
    const std::map<std::string, std::vector<CoverageGrid>>& runs) {
  std::vector<CoverageSummary> out;
  for (const auto& [name, grids] : runs) {
    if (grids.empty()) throw ContractViolation("configuration '" + name + "' has no runs");
    CoverageGrid all(grids.front().bounds());
    for (const CoverageGrid& g : grids) all.UnionWith(g);
    out.push_back({name, static_cast<int>(grids.size()), all.occupied_count(),
                   all.total_bins(), all.Coverage()});
  }
  return out;
}

void WriteCoverageJson(std::ostream& out, const CoverageGrid& grid) {
  const CoverageBounds& b = grid.bounds();
  auto axis = [](const CoverageAxis& a) {
    return Json{{"lower", a.lower}, {"upper", a.upper}, {"width", a.width}};
  };
  Json j;
  j["bounds"] = {{"day", axis(b.day)},
                 {"cumulative_yield", axis(b.cumulative_yield)},
                 {"soil_moisture", axis(b.soil_moisture)},
                 {"cumulative_irrigation", axis(b.cumulative_irrigation)}};
  j["total_bins"] = grid.total_bins();
  j["occupied_count"] = grid.occupied_count();
  j["coverage"] = grid.Coverage();
  j["occupied"] = grid.OccupiedIndices();
  out << j.dump() << '\n';
}

CoverageGrid ReadCoverageJson(std::istream& in) {
  try {
    const Json j = Json::parse(in);
    auto axis = [](const Json& a) {
      return CoverageAxis{a.at("lower").get<double>(), a.at("upper").get<double>(),
                          a.at("width").get<double>()};
    };
    const Json& b = j.at("bounds");
    CoverageBounds bounds{axis(b.at("day")), axis(b.at("cumulative_yield")),
                          axis(b.at("soil_moisture")), axis(b.at("cumulative_irrigation"))};
    CoverageGrid grid(bounds);
    for (std::int64_t idx : j.at("occupied").get<std::vector<std::int64_t>>()) {
      grid.MarkOccupied(idx);
    }
    return grid;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid coverage file: ") + e.what());
  }
}

std::string FormatSweepText(const std::vector<MetricsRecord>& records, const std::string& policy) {
  std::ostringstream out;
  out << "policy: " << policy << '\n';
  out << Pad("condition", 12) << PadLeft("score", 22) << PadLeft("yield", 24)
      << PadLeft("retention", 11) << PadLeft("n", 6) << '\n';
  const double clean = records.empty() ? 0.0 : records.front().score.mean;
  for (const MetricsRecord& r : records) {
    out << Pad(std::string(ToString(r.condition)), 12)
        << PadLeft(StatText(r.score, 2), 22) << PadLeft(StatText(r.yield, 1), 24)
        << PadLeft(RetentionText(Retention(r.score.mean, clean)), 11)
        << PadLeft(std::to_string(r.score.count), 6) << '\n';
  }
  return out.str();
}

std::string FormatSweepCsv(const std::vector<MetricsRecord>& records, const std::string& policy) {
  std::ostringstream out;
  out.precision(17);
  out << "policy,condition,score_mean,score_std,yield_mean,yield_std,wue_mean,nue_mean,"
         "episodes\n";
  for (const MetricsRecord& r : records) {
    out << policy << ',' << ToString(r.condition) << ',' << r.score.mean << ',' << r.score.std
        << ',' << r.yield.mean << ',' << r.yield.std << ',';
    if (r.water_use_efficiency) out << r.water_use_efficiency->mean;
    out << ',';
    if (r.nitrogen_use_efficiency) out << r.nitrogen_use_efficiency->mean;
    out << ',' << r.score.count << '\n';
  }
  return out.str();
}

std::string FormatSensitivityText(const SensitivityTable& table) {
  std::ostringstream out;
  out << "policy: " << table.policy << '\n';
  out << Pad("condition", 12) << PadLeft("score", 12) << PadLeft("yield", 12)
      << PadLeft("score red.", 12) << PadLeft("yield red.", 12) << PadLeft("seed std", 10)
      << '\n';
  for (const SensitivityRow& row : table.rows) {
    const MetricsRecord& m = row.metrics;
    out << Pad(std::string(ToString(m.condition)), 12) << PadLeft(Fixed(m.score.mean, 2), 12)
        << PadLeft(Fixed(m.yield.mean, 1), 12)
        << PadLeft(Fixed(row.score_reduction_pct, 1) + "%", 12)
        << PadLeft(Fixed(row.yield_reduction_pct, 1) + "%", 12)
        << PadLeft(Fixed(row.per_seed_score_reduction_pct.std, 1), 10) << '\n';
  }
  return out.str();
}

std::string FormatSensitivityCsv(const SensitivityTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "policy,condition,score_mean,yield_mean,score_reduction_pct,yield_reduction_pct,"
         "seed_reduction_std,episodes\n";
  for (const SensitivityRow& row : table.rows) {
    out << table.policy << ',' << ToString(row.metrics.condition) << ','
        << row.metrics.score.mean << ',' << row.metrics.yield.mean << ','
        << Fixed(row.score_reduction_pct, 1) << ',' << Fixed(row.yield_reduction_pct, 1) << ','
        << row.per_seed_score_reduction_pct.std << ',' << row.metrics.score.count << '\n';
  }
  return out.str();
}

std::string SensitivityJson(const SensitivityTable& table) {
  Json j;
  j["kind"] = "sensitivity";
  j["policy"] = table.policy;
  j["rows"] = Json::array();
  for (const SensitivityRow& row : table.rows) {
    j["rows"].push_back({{"metrics", RecordJson(row.metrics)},
                         {"score_reduction_pct", row.score_reduction_pct},
                         {"yield_reduction_pct", row.yield_reduction_pct},
                         {"per_seed_score_reduction_pct",
                          StatJson(row.per_seed_score_reduction_pct)}});
  }
  return j.dump(2) + "\n";
}

std::string FormatRobustnessText(const RobustnessReport& report) {
  std::ostringstream out;
  const std::size_t w = std::max<std::size_t>(
      24, std::max(report.policy_a.size(), report.policy_b.size()) + 14);
  out << Pad("condition", 12) << PadLeft(report.policy_a, w) << PadLeft("retention", 11)
      << PadLeft(report.policy_b, w) << PadLeft("retention", 11) << '\n';
  for (const RobustnessRow& row : report.rows) {
    out << Pad(std::string(ToString(row.condition)), 12)
        << PadLeft(StatText(row.a.score, 2), w) << PadLeft(RetentionText(row.retention_a), 11)
        << PadLeft(StatText(row.b.score, 2), w) << PadLeft(RetentionText(row.retention_b), 11)
        << '\n';
  }
  auto seed_std = [](const MetricsRecord& r) {
    return Summarize(r.per_seed_score).std;
  };
  out << "per-seed std of mean score:";
  for (const RobustnessRow& row : report.rows) {
    out << ' ' << ToString(row.condition) << '=' << Fixed(seed_std(row.a), 2) << '/'
        << Fixed(seed_std(row.b), 2);
  }
  out << '\n';
  return out.str();
}

std::string FormatRobustnessCsv(const RobustnessReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "condition,policy,score_mean,score_std,seed_std,retention\n";
  for (const RobustnessRow& row : report.rows) {
    for (int k = 0; k < 2; ++k) {
      const MetricsRecord& r = k == 0 ? row.a : row.b;
      const auto& ret = k == 0 ? row.retention_a : row.retention_b;
      out << ToString(row.condition) << ',' << (k == 0 ? report.policy_a : report.policy_b)
          << ',' << r.score.mean << ',' << r.score.std << ','
          << Summarize(r.per_seed_score).std << ',';
      if (ret) out << *ret;
      out << '\n';
    }
  }
  return out.str();
}

std::string RobustnessJson(const RobustnessReport& report) {
  Json j;
  j["kind"] = "robustness";
  j["policy_a"] = report.policy_a;
  j["policy_b"] = report.policy_b;
  j["rows"] = Json::array();
  for (const RobustnessRow& row : report.rows) {
    j["rows"].push_back({{"condition", std::string(ToString(row.condition))},
                         {"a", RecordJson(row.a)},
                         {"b", RecordJson(row.b)},
                         {"retention_a", OptionalJson(row.retention_a)},
                         {"retention_b", OptionalJson(row.retention_b)}});
  }
  return j.dump(2) + "\n";
}

std::string FormatCoverageText(const std::vector<CoverageSummary>& rows) {
  std::ostringstream out;
  out << Pad("configuration", 20) << PadLeft("runs", 6) << PadLeft("occupied", 10)
      << PadLeft("bins", 10) << PadLeft("coverage", 10) << '\n';
  for (const CoverageSummary& r : rows) {
    out << Pad(r.configuration, 20) << PadLeft(std::to_string(r.runs), 6)
        << PadLeft(std::to_string(r.occupied), 10) << PadLeft(std::to_string(r.total), 10)
        << PadLeft(Fixed(r.coverage * 100.0, 1) + "%", 10) << '\n';
  }
  return out.str();
}

std::string RenderReportJson(const std::string& json_text) {
  try {
    const Json j = Json::parse(json_text);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "sensitivity") {
      SensitivityTable t;
      t.policy = j.at("policy").get<std::string>();
      for (const Json& r : j.at("rows")) {
        t.rows.push_back({RecordFrom(r.at("metrics")), r.at("score_reduction_pct").get<double>(),
                          r.at("yield_reduction_pct").get<double>(),
                          StatFrom(r.at("per_seed_score_reduction_pct"))});
      }
      return FormatSensitivityText(t);
    }
    if (kind == "robustness") {
      RobustnessReport rep;
      rep.policy_a = j.at("policy_a").get<std::string>();
      rep.policy_b = j.at("policy_b").get<std::string>();
      for (const Json& r : j.at("rows")) {
        rep.rows.push_back({ParseEvalCondition(r.at("condition").get<std::string>()),
                            RecordFrom(r.at("a")), RecordFrom(r.at("b")),
                            OptionalFrom(r.at("retention_a")), OptionalFrom(r.at("retention_b"))});
      }
      return FormatRobustnessText(rep);
    }
    throw ConfigError("unknown report kind '" + kind + "'");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid report file: ") + e.what());
  }
}

}  // namespace croprl
