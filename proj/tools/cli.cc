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

#include "cli.h"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "croprl/config.h"
#include "croprl/errors.h"
#include "croprl/eval.h"
#include "croprl/protocol.h"
#include "croprl/trainer.h"

namespace croprl::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options shared by the verbs that need a config and an environment.
struct CommonOptions {
  std::string config_path;
  std::string scenario = "florida";
  std::string seeds;
  std::string backend = "surrogate";
  std::string env_command;
  std::string output_root;
  std::string run_id;
};

struct Options {
  CommonOptions common;
  int episodes = 0;
  std::string mode;
  bool quiet = false;
  std::string policy;
  std::string compare;
  std::string condition = "clean";
  std::string conditions = "clean,temp,rain,combined";
  std::vector<std::string> runs;
  std::string input;
  std::string default_config;
};

void AddCommon(CLI::App* cmd, CommonOptions& o, bool with_output = true) {
  cmd->add_option("--config", o.config_path, "YAML run config");
  cmd->add_option("--scenario", o.scenario, "Bundled config when --config is absent")
      ->check(CLI::IsMember({"florida", "zaragoza"}));
  cmd->add_option("--seeds", o.seeds, "Comma-separated seed list overriding the config");
  cmd->add_option("--backend", o.backend, "Environment backend")
      ->check(CLI::IsMember({"surrogate", "external"}));
  cmd->add_option("--env-command", o.env_command,
                  "Shell command serving the wire protocol (external backend)");
  if (with_output) {
    cmd->add_option("--output-root", o.output_root,
                    std::string("Output root (default: $") + kOutputRootEnv + " or ./croprl-runs)");
    cmd->add_option("--run-id", o.run_id, "Run directory name (default: verb and UTC stamp)");
  }
}

std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw UsageError("empty entry in --seeds");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item[0] == '-') {
      throw UsageError("--seeds entry '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw UsageError("--seeds is empty");
  return seeds;
}

RunConfig ResolveConfig(const CommonOptions& o) {
  RunConfig cfg = o.config_path.empty() ? DefaultConfig(o.scenario) : LoadConfig(o.config_path);
  if (!o.seeds.empty()) cfg.seeds = ParseSeeds(o.seeds);
  return cfg;
}

EnvironmentFactory MakeFactory(const CommonOptions& o, const RunConfig& cfg) {
  if (o.backend == "external") {
    if (o.env_command.empty()) throw UsageError("--backend external needs --env-command");
    const std::string command = o.env_command;
    return [command] {
      return std::make_unique<RemoteEnv>(std::make_unique<ChildProcessTransport>(command));
    };
  }
  if (!o.env_command.empty()) throw UsageError("--env-command requires --backend external");
  return [scenario = cfg.scenario, reward = cfg.reward] {
    return std::make_unique<SurrogateEnv>(scenario, reward);
  };
}

std::string UtcStamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path MakeRunDirectory(const CommonOptions& o, const std::string& verb) {
  fs::path root;
  if (!o.output_root.empty()) {
    root = o.output_root;
  } else if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') {
    root = env;
  } else {
    root = "croprl-runs";
  }
  fs::path dir;
  if (!o.run_id.empty()) {
    if (o.run_id.find('/') != std::string::npos || o.run_id == "." || o.run_id == "..") {
      throw UsageError("--run-id must be a plain directory name");
    }
    dir = root / o.run_id;
  } else {
    const std::string base = verb + "-" + UtcStamp();
    dir = root / base;
    for (int n = 1; fs::exists(dir); ++n) dir = root / (base + "-" + std::to_string(n));
  }
  fs::create_directories(dir);
  return dir;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

std::string ReadText(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::unique_ptr<Policy> LoadNamedPolicy(const std::string& spec) {
  if (spec.empty()) throw UsageError("--policy is required");
  if (spec == "fixed") return std::make_unique<FixedManagementPolicy>();
  const fs::path path(spec);
  if (!fs::is_regular_file(path)) throw UsageError("policy checkpoint '" + spec + "' not found");
  return std::make_unique<NetworkPolicy>(LoadPolicy(path), path.stem().string());
}

int Train(const Options& opt, std::ostream& out) {
  RunConfig cfg = ResolveConfig(opt.common);
  if (opt.episodes > 0) cfg.SetEpisodes(opt.episodes);
  if (!opt.mode.empty()) cfg.ppo.mode = ParseAdvantageMode(opt.mode);
  cfg.Validate();
  const EnvironmentFactory factory = MakeFactory(opt.common, cfg);
  const fs::path dir = MakeRunDirectory(opt.common, "train");
  WriteText(dir / "config.yaml", EmitConfig(cfg));
  out << "run directory: " << dir.string() << "\n";

  std::ostringstream summary;
  summary << "seed,episodes,best_validation,best_episode,final_validation,coverage,early_stopped\n";
  for (const std::uint64_t seed : cfg.seeds) {
    TrainOptions options;
    options.output_dir = dir / std::to_string(seed);
    options.env_factory = factory;
    options.progress = opt.quiet ? nullptr : &out;
    const RunArtifacts art = croprl::Train(cfg, seed, options);
    const CheckpointEntry best = art.checkpoints.empty() ? CheckpointEntry{} : art.checkpoints.front();
    const double final_validation =
        art.validation_history.empty() ? 0.0 : art.validation_history.back().score;
    char line[256];
    std::snprintf(line, sizeof(line),
                  "seed %llu: %zu episodes, best validation %.2f (episode %d), final validation "
                  "%.2f, coverage %.4f%s\n",
                  static_cast<unsigned long long>(seed), art.metrics.size(),
                  best.validation_score, best.episode, final_validation,
                  art.coverage.Coverage(), art.early_stopped ? ", stopped early" : "");
    out << line;
    summary << seed << ',' << art.metrics.size() << ',' << best.validation_score << ','
            << best.episode << ',' << final_validation << ',' << art.coverage.Coverage() << ','
            << (art.early_stopped ? 1 : 0) << "\n";
  }
  WriteText(dir / "summary.csv", summary.str());
  return kExitOk;
}

struct EvalSetup {
  RunConfig cfg;
  std::unique_ptr<Environment> env;
  int episodes = 0;
};

EvalSetup PrepareEval(const Options& opt) {
  EvalSetup s;
  s.cfg = ResolveConfig(opt.common);
  s.env = MakeFactory(opt.common, s.cfg)();
  s.episodes = opt.episodes > 0 ? opt.episodes : s.cfg.training.eval_episodes;
  return s;
}

int Evaluate(const Options& opt, std::ostream& out) {
  std::unique_ptr<Policy> policy = LoadNamedPolicy(opt.policy);
  EvalSetup s = PrepareEval(opt);
  const EvalCondition condition = ParseEvalCondition(opt.condition);
  const fs::path dir = MakeRunDirectory(opt.common, "evaluate");
  const std::vector<MetricsRecord> records{croprl::Evaluate(
      *s.env, *policy, condition, s.episodes, s.cfg.seeds, s.env->soil_layers())};
  const std::string text = FormatSweepText(records, policy->name());
  WriteText(dir / "evaluate.txt", text);
  WriteText(dir / "evaluate.csv", FormatSweepCsv(records, policy->name()));
  out << "run directory: " << dir.string() << "\n" << text;
  return kExitOk;
}

int Sweep(const Options& opt, std::ostream& out) {
  std::unique_ptr<Policy> policy = LoadNamedPolicy(opt.policy);
  EvalSetup s = PrepareEval(opt);
  const fs::path dir = MakeRunDirectory(opt.common, "sweep");
  out << "run directory: " << dir.string() << "\n";
  if (!opt.compare.empty()) {
    std::unique_ptr<Policy> other = LoadNamedPolicy(opt.compare);
    const RobustnessReport report = RobustnessComparison(*s.env, *policy, *other, s.episodes,
                                                         s.cfg.seeds, s.env->soil_layers());
    const std::string text = FormatRobustnessText(report);
    WriteText(dir / "robustness.json", RobustnessJson(report));
    WriteText(dir / "robustness.csv", FormatRobustnessCsv(report));
    WriteText(dir / "robustness.txt", text);
    out << text;
    return kExitOk;
  }
  const std::vector<EvalCondition> conditions = ParseEvalConditions(opt.conditions);
  const std::vector<MetricsRecord> records = croprl::Sweep(
      *s.env, *policy, conditions, s.episodes, s.cfg.seeds, s.env->soil_layers());
  const std::string text = FormatSweepText(records, policy->name());
  WriteText(dir / "sweep.csv", FormatSweepCsv(records, policy->name()));
  WriteText(dir / "sweep.txt", text);
  out << text;
  return kExitOk;
}

int Sensitivity(const Options& opt, std::ostream& out) {
  std::unique_ptr<Policy> policy = LoadNamedPolicy(opt.policy);
  EvalSetup s = PrepareEval(opt);
  const fs::path dir = MakeRunDirectory(opt.common, "sensitivity");
  const SensitivityTable table =
      SensitivityAnalysis(*s.env, *policy, s.episodes, s.cfg.seeds, s.env->soil_layers());
  const std::string text = FormatSensitivityText(table);
  WriteText(dir / "sensitivity.json", SensitivityJson(table));
  WriteText(dir / "sensitivity.csv", FormatSensitivityCsv(table));
  WriteText(dir / "sensitivity.txt", text);
  out << "run directory: " << dir.string() << "\n" << text;
  return kExitOk;
}

// A coverage source is a coverage.json file, a seed directory holding one,
// or a train run directory whose seed subdirectories hold one each.
std::vector<CoverageGrid> LoadCoverage(const fs::path& source) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(source)) {
    files.push_back(source);
  } else if (fs::is_regular_file(source / "coverage.json")) {
    files.push_back(source / "coverage.json");
  } else if (fs::is_directory(source)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_directory() && fs::is_regular_file(entry.path() / "coverage.json")) {
        files.push_back(entry.path() / "coverage.json");
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw UsageError("no coverage.json under '" + source.string() + "'");
  std::vector<CoverageGrid> grids;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    if (!in) throw Error("cannot read " + f.string());
    grids.push_back(ReadCoverageJson(in));
  }
  return grids;
}

int Coverage(const Options& opt, std::ostream& out) {
  if (opt.runs.empty()) throw UsageError("coverage needs at least one --run label=path");
  std::map<std::string, std::vector<CoverageGrid>> runs;
  for (const std::string& spec : opt.runs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw UsageError("--run expects label=path, got '" + spec + "'");
    }
    std::vector<CoverageGrid> grids = LoadCoverage(spec.substr(eq + 1));
    auto& slot = runs[spec.substr(0, eq)];
    for (CoverageGrid& g : grids) slot.push_back(std::move(g));
  }
  const std::string text = FormatCoverageText(CoverageComparison(runs));
  const fs::path dir = MakeRunDirectory(opt.common, "coverage");
  WriteText(dir / "coverage.txt", text);
  out << "run directory: " << dir.string() << "\n" << text;
  return kExitOk;
}

int ProtocolServe(const Options& opt, std::istream& in, std::ostream& out) {
  if (opt.common.backend != "surrogate") {
    throw UsageError("protocol-serve only serves the surrogate backend");
  }
  const RunConfig cfg = ResolveConfig(opt.common);
  SurrogateEnv env(cfg.scenario, cfg.reward);
  ServeProtocol(in, out, env);
  return kExitOk;
}

// Renders every stored report artifact in a directory. Output depends only
// on the artifact files, so repeated runs produce identical report.txt.
int Report(const Options& opt, std::ostream& out) {
  if (!opt.default_config.empty()) {
    if (!opt.input.empty()) throw UsageError("--default-config and --input are exclusive");
    out << EmitConfig(DefaultConfig(opt.default_config));
    return kExitOk;
  }
  if (opt.input.empty()) throw UsageError("report needs --input or --default-config");
  const fs::path dir(opt.input);
  if (!fs::is_directory(dir)) throw UsageError("report input '" + opt.input + "' is not a directory");
  std::string text;
  for (const char* name : {"sensitivity.json", "robustness.json"}) {
    const fs::path file = dir / name;
    if (!fs::is_regular_file(file)) continue;
    if (!text.empty()) text += "\n";
    text += RenderReportJson(ReadText(file));
  }
  if (text.empty()) {
    throw UsageError("no sensitivity.json or robustness.json in '" + opt.input + "'");
  }
  WriteText(dir / "report.txt", text);
  out << text;
  return kExitOk;
}

std::string OneLine(std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::replace(message.begin(), message.end(), '\r', ' ');
  return message;
}

int Fail(std::ostream& err, const char* category, const std::string& message, int code) {
  err << "croprl: error[" << category << "]: " << OneLine(message) << "\n";
  return code;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  Options opt;
  CLI::App app{"Crop-management reinforcement learning framework", "croprl"};
  app.require_subcommand(1);

  CLI::App* train = app.add_subcommand("train", "Train one policy per seed");
  AddCommon(train, opt.common);
  train->add_option("--episodes", opt.episodes, "Override training.episodes")
      ->check(CLI::PositiveNumber);
  train->add_option("--mode", opt.mode, "Advantage mode")
      ->check(CLI::IsMember({"coupled", "additive", "plain"}));
  train->add_flag("--quiet", opt.quiet, "Suppress progress lines");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a policy under one condition");
  AddCommon(evaluate, opt.common);
  evaluate->add_option("--policy", opt.policy, "Checkpoint file, or 'fixed'")->required();
  evaluate->add_option("--condition", opt.condition, "Evaluation condition");
  evaluate->add_option("--episodes", opt.episodes, "Episodes per seed")
      ->check(CLI::PositiveNumber);

  CLI::App* sweep = app.add_subcommand("sweep", "Evaluate a policy across conditions");
  AddCommon(sweep, opt.common);
  sweep->add_option("--policy", opt.policy, "Checkpoint file, or 'fixed'")->required();
  sweep->add_option("--conditions", opt.conditions, "Comma-separated conditions");
  sweep->add_option("--compare", opt.compare,
                    "Second policy; produces the four-condition retention comparison");
  sweep->add_option("--episodes", opt.episodes, "Episodes per seed")->check(CLI::PositiveNumber);

  CLI::App* sensitivity =
      app.add_subcommand("sensitivity", "Single-channel noise sensitivity table");
  AddCommon(sensitivity, opt.common);
  sensitivity->add_option("--policy", opt.policy, "Checkpoint file, or 'fixed'")->required();
  sensitivity->add_option("--episodes", opt.episodes, "Episodes per seed")
      ->check(CLI::PositiveNumber);

  CLI::App* coverage = app.add_subcommand("coverage", "Union coverage per configuration");
  AddCommon(coverage, opt.common);
  coverage->add_option("--run", opt.runs, "label=path to a run, seed directory or coverage.json")
      ->required();

  CLI::App* serve =
      app.add_subcommand("protocol-serve", "Serve the surrogate over stdin/stdout");
  AddCommon(serve, opt.common, /*with_output=*/false);

  CLI::App* report = app.add_subcommand("report", "Render stored report artifacts");
  report->add_option("--input", opt.input, "Directory holding sensitivity/robustness JSON");
  report->add_option("--default-config", opt.default_config, "Print a bundled config")
      ->check(CLI::IsMember({"florida", "zaragoza"}));

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("croprl");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const int code = Fail(err, "usage", e.what(), kExitUsage);
    err << app.help();
    return code;
  }

  try {
    if (train->parsed()) return Train(opt, out);
    if (evaluate->parsed()) return Evaluate(opt, out);
    if (sweep->parsed()) return Sweep(opt, out);
    if (sensitivity->parsed()) return Sensitivity(opt, out);
    if (coverage->parsed()) return Coverage(opt, out);
    if (serve->parsed()) return ProtocolServe(opt, in, out);
    if (report->parsed()) return Report(opt, out);
    return Fail(err, "usage", "no verb given", kExitUsage);
  } catch (const UsageError& e) {
    return Fail(err, "usage", e.what(), kExitUsage);
  } catch (const ConfigError& e) {
    return Fail(err, "config", e.what(), kExitConfig);
  } catch (const ProtocolError& e) {
    return Fail(err, "protocol", e.what(), kExitRuntime);
  } catch (const SessionError& e) {
    return Fail(err, "session", e.what(), kExitRuntime);
  } catch (const NumericError& e) {
    return Fail(err, "numeric", e.what(), kExitRuntime);
  } catch (const ContractViolation& e) {
    return Fail(err, "contract", e.what(), kExitRuntime);
  } catch (const std::exception& e) {
    return Fail(err, "runtime", e.what(), kExitRuntime);
  }
}

}  // namespace croprl::cli
