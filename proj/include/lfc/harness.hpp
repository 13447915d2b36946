#pragma once

// Experiment harness: settings, closed-loop evaluation, metrics and the
// artifact-producing pipeline behind the CLI.

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfc/agent.hpp"
#include "lfc/config.hpp"
#include "lfc/emulator.hpp"
#include "lfc/environment.hpp"
#include "lfc/metrics.hpp"
#include "lfc/pid.hpp"
#include "lfc/scenario.hpp"

namespace lfc {

struct TrajectoryRow {
  double t = 0.0;
  double delta_f = 0.0;
  double delta_pm = 0.0;
  double delta_pg = 0.0;
  double delta_pc = 0.0;  // command held over the period ending at t
  double delta_pd = 0.0;  // disturbance at t
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;  // one per control period, t = Tc..T
  bool diverged = false;

  std::vector<double> delta_f() const;
};

using Controller = std::function<double(const Observation&)>;

struct NamedController {
  std::string name;
  Controller control;
};

Controller open_loop_controller();
Controller pid_controller(const PidGains& gains, double a_max = kDefaultActionBound);
Controller actor_controller(Actor actor);

Trajectory run_episode(const PlantConfig& plant, const Scenario& scenario,
                       const Controller& controller);
Metrics compute_metrics(const Trajectory& trajectory);

// CSV: t,delta_f,delta_pm,delta_pg,delta_pc,delta_pd with 17 significant digits.
void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

struct ComparisonRow {
  std::string name;
  Metrics metrics;
  bool diverged = false;
  std::string error;  // non-empty when the run raised
};

// Every controller runs on the same plant and the same sampled disturbance.
std::vector<ComparisonRow> compare(const PlantConfig& plant, const Scenario& scenario,
                                   const std::vector<NamedController>& controllers);

nlohmann::json metrics_json(const Metrics& m);
nlohmann::json comparison_json(const std::vector<ComparisonRow>& rows);

struct Settings {
  PlantConfig plant;                 // plant used for data, training and evaluation
  Scenario scenario;                 // evaluation / training scenario
  double a_max = kDefaultActionBound;

  PidGrid tune_grid = PidGrid::standard();
  bool tune_on_linear = true;        // canonical tuning ignores GDB/GRC
  Scenario tune_scenario;            // defaults to the ±0.03 p.u. benchmark steps
  std::optional<PidGains> pid_gains; // fixed gains instead of the tuned file

  DatabaseSpec database;
  EmulatorConfig emulator;
  PretrainConfig pretrain;
  TrainConfig train;

  std::string controller = "pid";    // evaluate: open-loop | pid | pid-actor | actor
  std::vector<std::string> compare_controllers{"open-loop", "pid", "actor"};
  std::filesystem::path output_dir = "runs/default";
  std::optional<std::filesystem::path> actor_path;

  static Settings from_config(const Config& config);
};

// Every key understood by Settings::from_config.
const std::set<std::string>& known_config_keys();

// Artifacts live under settings.output_dir with fixed names.
class Workspace {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit Workspace(Settings settings, Logger logger = {});

  const Settings& settings() const { return settings_; }
  std::filesystem::path path(const std::string& name) const { return settings_.output_dir / name; }
  std::filesystem::path actor_path() const;

  TuneResult tune_pid() const;               // -> pid_gains.json
  LfcDatabase generate_database() const;     // -> database.csv (+ .meta.json)
  EmulatorFit train_emulator() const;        // -> emulator.mlp, emulator_log.csv
  Actor pretrain_actor() const;              // -> pid_actor.mlp
  TrainResult train() const;                 // -> actor.mlp, train_log.csv
  Trajectory evaluate() const;               // -> trajectory.csv, metrics.json
  std::vector<ComparisonRow> compare() const;  // -> compare.json
  void plot_data() const;                    // -> figures/*.csv

  // tune-pid, gen-db, train-emulator, pretrain-actor, train, compare.
  std::vector<ComparisonRow> run_pipeline() const;

  PidGains gains() const;  // fixed gains or the tuned file
  NamedController controller(const std::string& name) const;

 private:
  void log(const std::string& message) const;

  Settings settings_;
  Logger logger_;
};

PidGains load_gains(const std::filesystem::path& path);

}  // namespace lfc
