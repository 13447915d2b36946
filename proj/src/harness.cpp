#include "lfc/harness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lfc/error.hpp"

namespace lfc {

using nlohmann::json;

std::vector<double> Trajectory::delta_f() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.delta_f);
  return out;
}

Controller open_loop_controller() {
  return [](const Observation&) { return 0.0; };
}

Controller pid_controller(const PidGains& gains, double a_max) {
  return [gains, a_max](const Observation& obs) { return pid_control(obs, gains, a_max); };
}

Controller actor_controller(Actor actor) {
  return [actor = std::move(actor)](const Observation& obs) { return act(actor, obs, 0.0); };
}

Trajectory run_episode(const PlantConfig& plant, const Scenario& scenario,
                       const Controller& controller) {
  Environment env(plant, scenario);
  Trajectory traj;
  traj.rows.reserve(plant.sim.control_steps());
  while (!env.done()) {
    const double u = controller(env.observation());
    const auto out = env.step(u);
    if (out.diverged) break;
    const auto& x = env.state();
    traj.rows.push_back({env.time(), x.delta_f, x.delta_pm, x.delta_pg, u,
                         env.current_disturbance()});
  }
  traj.diverged = env.diverged();
  return traj;
}

Metrics compute_metrics(const Trajectory& trajectory) {
  return compute_metrics(trajectory.delta_f());
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr const char* kTrajectoryHeader = "t,delta_f,delta_pm,delta_pg,delta_pc,delta_pd";

}  // namespace

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << kTrajectoryHeader << '\n';
  for (const auto& r : trajectory.rows) {
    out << fmt17(r.t) << ',' << fmt17(r.delta_f) << ',' << fmt17(r.delta_pm) << ','
        << fmt17(r.delta_pg) << ',' << fmt17(r.delta_pc) << ',' << fmt17(r.delta_pd) << '\n';
  }
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) {
    throw ParseError("trajectory '" + path.string() + "': bad or missing header");
  }
  Trajectory traj;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    double v[6];
    int n = 0;
    while (n < 6 && std::getline(ss, cell, ',')) {
      const char* end = cell.data() + cell.size();
      auto res = std::from_chars(cell.data(), end, v[n]);
      if (cell.empty() || res.ec != std::errc() || res.ptr != end) {
        throw ParseError("trajectory line " + std::to_string(lineno) + ": column " +
                         std::to_string(n + 1) + " is not a number");
      }
      ++n;
    }
    if (n != 6) throw ParseError("trajectory line " + std::to_string(lineno) + ": expected 6 columns");
    traj.rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  return traj;
}

std::vector<ComparisonRow> compare(const PlantConfig& plant, const Scenario& scenario,
                                   const std::vector<NamedController>& controllers) {
  if (controllers.size() < 2) throw ConfigError("compare needs at least two controllers");
  std::vector<ComparisonRow> rows;
  for (const auto& c : controllers) {
    ComparisonRow row;
    row.name = c.name;
    try {
      const auto traj = run_episode(plant, scenario, c.control);
      row.metrics = compute_metrics(traj);
      row.diverged = traj.diverged;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json metrics_json(const Metrics& m) {
  return {{"q_sum", m.q_sum},
          {"mean_abs_f", m.mean_abs_f},
          {"largest_var", m.largest_var},
          {"reward", m.reward}};
}

json comparison_json(const std::vector<ComparisonRow>& rows) {
  json out = json::object();
  for (const auto& r : rows) {
    json row = metrics_json(r.metrics);
    row["diverged"] = r.diverged;
    if (!r.error.empty()) row["error"] = r.error;
    out[r.name] = std::move(row);
  }
  return out;
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "plant.t_g", "plant.t_t", "plant.h", "plant.d", "plant.r_droop",
      "nonlinear.gdb_kappa", "nonlinear.grc_sigma",
      "sim.dt", "sim.control_period", "sim.horizon", "sim.f_max",
      "scenario.steps", "scenario.wind.enabled", "scenario.wind.rated",
      "scenario.wind.correlation_time", "scenario.wind.volatility", "scenario.wind.seed",
      "actor.a_max",
      "tune.kp", "tune.ki", "tune.kd", "tune.linear", "tune.steps",
      "pid.kp", "pid.ki", "pid.kd",
      "database.episodes", "database.noise_std", "database.magnitude_min",
      "database.magnitude_max", "database.wind", "database.seed",
      "emulator.epochs", "emulator.batch_size", "emulator.learning_rate",
      "emulator.validation_split", "emulator.patience", "emulator.hidden", "emulator.seed",
      "emulator.scale.f_dev", "emulator.scale.f_int", "emulator.scale.f_der",
      "emulator.scale.action",
      "pretrain.epochs", "pretrain.batch_size", "pretrain.learning_rate", "pretrain.hidden",
      "pretrain.patience", "pretrain.seed", "pretrain.scale.f_dev", "pretrain.scale.f_int",
      "pretrain.scale.f_der",
      "zoo.epsilon", "zoo.samples", "zoo.seed", "zoo.sampling",
      "train.episodes", "train.buffer", "train.minibatch", "train.learning_rate",
      "train.updates_per_step", "train.seed", "train.randomize_schedule",
      "train.magnitude_min", "train.magnitude_max", "train.checkpoint_every",
      "train.ou.theta", "train.ou.sigma", "train.ou.decay",
      "evaluate.controller", "evaluate.actor", "compare.controllers", "output.dir"};
  return keys;
}

namespace {

StepSchedule schedule_from(const Config& c, const std::string& key, const StepSchedule& fallback) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& e : fallback.events) pairs.emplace_back(e.time, e.level);
  StepSchedule s;
  for (const auto& [t, level] : c.get_pairs(key, pairs)) s.events.push_back({t, level});
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
  return s;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Settings Settings::from_config(const Config& c) {
  c.check_known(known_config_keys());
  Settings s;
  auto& p = s.plant.params;
  p.t_g = c.get_double("plant.t_g", p.t_g);
  p.t_t = c.get_double("plant.t_t", p.t_t);
  p.h = c.get_double("plant.h", p.h);
  p.d = c.get_double("plant.d", p.d);
  p.r_droop = c.get_double("plant.r_droop", p.r_droop);
  auto& nl = s.plant.nl;
  nl.gdb_kappa = c.get_double("nonlinear.gdb_kappa", nl.gdb_kappa);
  nl.grc_sigma = c.get_double("nonlinear.grc_sigma", nl.grc_sigma);
  auto& sim = s.plant.sim;
  sim.dt = c.get_double("sim.dt", sim.dt);
  sim.control_period = c.get_double("sim.control_period", sim.control_period);
  sim.horizon = c.get_double("sim.horizon", sim.horizon);
  sim.f_max = c.get_double("sim.f_max", sim.f_max);
  s.plant.validate();

  s.scenario.steps = schedule_from(c, "scenario.steps", StepSchedule::benchmark());
  auto& w = s.scenario.wind;
  w.enabled = c.get_bool("scenario.wind.enabled", w.enabled);
  w.rated = c.get_double("scenario.wind.rated", w.rated);
  w.correlation_time = c.get_double("scenario.wind.correlation_time", w.correlation_time);
  w.volatility = c.get_double("scenario.wind.volatility", w.volatility);
  w.seed = c.get_seed("scenario.wind.seed", w.seed);
  if (!(w.rated > 0.0) || !(w.correlation_time > 0.0) || !(w.volatility >= 0.0)) {
    throw ConfigError("config key 'scenario.wind.*': rated and correlation_time must be > 0");
  }

  s.a_max = c.get_double("actor.a_max", s.a_max);
  if (!(s.a_max > 0.0)) throw ConfigError("config key 'actor.a_max' must be > 0");

  s.tune_grid.kp = c.get_list("tune.kp", s.tune_grid.kp);
  s.tune_grid.ki = c.get_list("tune.ki", s.tune_grid.ki);
  s.tune_grid.kd = c.get_list("tune.kd", s.tune_grid.kd);
  s.tune_on_linear = c.get_bool("tune.linear", s.tune_on_linear);
  s.tune_scenario.steps = schedule_from(c, "tune.steps", StepSchedule::benchmark());
  if (c.has("pid.kp") || c.has("pid.ki") || c.has("pid.kd")) {
    s.pid_gains = PidGains{c.get_double("pid.kp", 0.0), c.get_double("pid.ki", 0.0),
                           c.get_double("pid.kd", 0.0)};
  }

  auto& db = s.database;
  db.episodes = c.get_int("database.episodes", db.episodes);
  db.noise_std = c.get_double("database.noise_std", db.noise_std);
  db.magnitude_range = {c.get_double("database.magnitude_min", db.magnitude_range.first),
                        c.get_double("database.magnitude_max", db.magnitude_range.second)};
  db.wind = c.get_bool("database.wind", db.wind);
  db.wind_model = s.scenario.wind;
  db.seed = c.get_seed("database.seed", db.seed);
  db.a_max = s.a_max;
  if (db.episodes < 1) throw ConfigError("config key 'database.episodes' must be >= 1");
  if (db.noise_std < 0.0) throw ConfigError("config key 'database.noise_std' must be >= 0");

  auto& em = s.emulator;
  em.epochs = c.get_int("emulator.epochs", em.epochs);
  em.batch_size = c.get_int("emulator.batch_size", em.batch_size);
  em.learning_rate = c.get_double("emulator.learning_rate", em.learning_rate);
  em.validation_split = c.get_double("emulator.validation_split", em.validation_split);
  em.patience = c.get_int("emulator.patience", em.patience);
  em.hidden = c.get_int_list("emulator.hidden", em.hidden);
  em.seed = c.get_seed("emulator.seed", em.seed);
  em.scales.f_dev = c.get_double("emulator.scale.f_dev", em.scales.f_dev);
  em.scales.f_int = c.get_double("emulator.scale.f_int", em.scales.f_int);
  em.scales.f_der = c.get_double("emulator.scale.f_der", em.scales.f_der);
  em.scales.action = c.get_double("emulator.scale.action", em.scales.action);
  em.validate();

  auto& pt = s.pretrain;
  pt.epochs = c.get_int("pretrain.epochs", pt.epochs);
  pt.batch_size = c.get_int("pretrain.batch_size", pt.batch_size);
  pt.learning_rate = c.get_double("pretrain.learning_rate", pt.learning_rate);
  pt.hidden = c.get_int_list("pretrain.hidden", pt.hidden);
  pt.patience = c.get_int("pretrain.patience", pt.patience);
  pt.seed = c.get_seed("pretrain.seed", pt.seed);
  pt.scales.f_dev = c.get_double("pretrain.scale.f_dev", pt.scales.f_dev);
  pt.scales.f_int = c.get_double("pretrain.scale.f_int", pt.scales.f_int);
  pt.scales.f_der = c.get_double("pretrain.scale.f_der", pt.scales.f_der);
  pt.a_max = s.a_max;
  pt.validate();

  auto& tr = s.train;
  tr.zoo.epsilon = c.get_double("zoo.epsilon", tr.zoo.epsilon);
  tr.zoo.n_samples = c.get_int("zoo.samples", tr.zoo.n_samples);
  tr.zoo.seed = c.get_seed("zoo.seed", tr.zoo.seed);
  const auto sampling = c.get_string("zoo.sampling", "stratified");
  if (sampling == "stratified") {
    tr.zoo.sampling = ZooSampling::kStratified;
  } else if (sampling == "iid") {
    tr.zoo.sampling = ZooSampling::kIid;
  } else {
    throw ConfigError("config key 'zoo.sampling': expected 'stratified' or 'iid', got '" +
                      sampling + "'");
  }
  tr.episodes = c.get_int("train.episodes", tr.episodes);
  const int buffer = c.get_int("train.buffer", static_cast<int>(tr.buffer_capacity));
  const int minibatch = c.get_int("train.minibatch", static_cast<int>(tr.minibatch));
  if (buffer < 1 || minibatch < 1) {
    throw ConfigError("config keys 'train.buffer' and 'train.minibatch' must be >= 1");
  }
  tr.buffer_capacity = static_cast<std::size_t>(buffer);
  tr.minibatch = static_cast<std::size_t>(minibatch);
  tr.learning_rate = c.get_double("train.learning_rate", tr.learning_rate);
  tr.updates_per_step = c.get_int("train.updates_per_step", tr.updates_per_step);
  tr.seed = c.get_seed("train.seed", tr.seed);
  tr.randomize_schedule = c.get_bool("train.randomize_schedule", tr.randomize_schedule);
  tr.magnitude_range = {c.get_double("train.magnitude_min", tr.magnitude_range.first),
                        c.get_double("train.magnitude_max", tr.magnitude_range.second)};
  tr.checkpoint_every = c.get_int("train.checkpoint_every", tr.checkpoint_every);
  tr.ou_theta = c.get_double("train.ou.theta", tr.ou_theta);
  tr.ou_sigma = c.get_double("train.ou.sigma", tr.ou_sigma);
  tr.ou_decay = c.get_double("train.ou.decay", tr.ou_decay);
  tr.validate();
  OuNoise(tr.ou_theta, tr.ou_sigma, tr.ou_decay, 0);  // validates the OU settings

  s.controller = c.get_string("evaluate.controller", s.controller);
  if (c.has("evaluate.actor")) s.actor_path = c.get_string("evaluate.actor", "");
  if (c.has("compare.controllers")) {
    s.compare_controllers = split_names(c.get_string("compare.controllers", ""));
  }
  s.output_dir = c.get_string("output.dir", s.output_dir.string());
  s.train.checkpoint_dir = s.output_dir / "checkpoints";
  return s;
}

Workspace::Workspace(Settings settings, Logger logger)
    : settings_(std::move(settings)), logger_(std::move(logger)) {}

void Workspace::log(const std::string& message) const {
  if (logger_) logger_(message);
}

std::filesystem::path Workspace::actor_path() const {
  return settings_.actor_path ? *settings_.actor_path : path("actor.mlp");
}

PidGains load_gains(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("PID gains file '" + path.string() + "' not found; run tune-pid");
  try {
    const json j = json::parse(in);
    return {j.at("kp"), j.at("ki"), j.at("kd")};
  } catch (const json::exception& e) {
    throw ParseError("PID gains file '" + path.string() + "': " + e.what());
  }
}

PidGains Workspace::gains() const {
  if (settings_.pid_gains) return *settings_.pid_gains;
  return load_gains(path("pid_gains.json"));
}

namespace {

void require_file(const std::filesystem::path& p, const std::string& producer) {
  if (!std::filesystem::exists(p)) {
    throw ConfigError("required file '" + p.string() + "' does not exist; run " + producer);
  }
}

void write_json(const json& j, const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace

NamedController Workspace::controller(const std::string& name) const {
  if (name == "open-loop") return {name, open_loop_controller()};
  if (name == "pid") return {name, pid_controller(gains(), settings_.a_max)};
  if (name == "pid-actor" || name == "actor") {
    const auto p = name == "actor" ? actor_path() : path("pid_actor.mlp");
    require_file(p, name == "actor" ? "train" : "pretrain-actor");
    return {name, actor_controller(load_actor(p))};
  }
  throw ConfigError("unknown controller '" + name +
                    "' (expected open-loop, pid, pid-actor or actor)");
}

TuneResult Workspace::tune_pid() const {
  PlantConfig plant = settings_.plant;
  if (settings_.tune_on_linear) plant.nl = NonlinearityConfig::linear();
  log("tuning PID over " +
      std::to_string(settings_.tune_grid.kp.size() * settings_.tune_grid.ki.size() *
                     settings_.tune_grid.kd.size()) +
      " candidates");
  const auto res = lfc::tune_pid(plant, settings_.tune_scenario, settings_.tune_grid, settings_.a_max);
  std::filesystem::create_directories(settings_.output_dir);
  write_json({{"kp", res.gains.kp},
              {"ki", res.gains.ki},
              {"kd", res.gains.kd},
              {"cost", res.cost},
              {"evaluated", res.evaluated},
              {"diverged", res.diverged}},
             path("pid_gains.json"));
  return res;
}

LfcDatabase Workspace::generate_database() const {
  const auto g = gains();
  log("generating database from " + std::to_string(settings_.database.episodes) + " PID episodes");
  auto db = lfc::generate_database(settings_.plant, g, settings_.database);
  if (db.empty()) throw InsufficientDataError("every database episode diverged");
  std::filesystem::create_directories(settings_.output_dir);
  save_database(db, path("database.csv"));
  log("database: " + std::to_string(db.size()) + " records, " +
      std::to_string(db.dropped_episodes) + " episodes dropped");
  return db;
}

EmulatorFit Workspace::train_emulator() const {
  require_file(path("database.csv"), "gen-db");
  const auto db = load_database(path("database.csv"));
  log("training emulator on " + std::to_string(db.size()) + " records");
  auto fit = lfc::train_emulator(db, settings_.emulator);
  save_emulator(fit.emulator, path("emulator.mlp"));
  std::ofstream out(path("emulator_log.csv"));
  out << "epoch,train_mse,validation_mse\n";
  for (std::size_t i = 0; i < fit.log.train_loss.size(); ++i) {
    out << i << ',' << fmt17(fit.log.train_loss[i]) << ',' << fmt17(fit.log.validation_loss[i])
        << '\n';
  }
  log("emulator: validation RMSE " + fmt17(fit.log.validation_rmse) + " Hz vs target RMS " +
      fmt17(fit.log.validation_target_rms) + " Hz");
  return fit;
}

Actor Workspace::pretrain_actor() const {
  require_file(path("database.csv"), "gen-db");
  const auto db = load_database(path("database.csv"));
  log("cloning PID into the actor network");
  PretrainLog plog;
  auto actor = lfc::pretrain_actor(db, settings_.pretrain, &plog);
  save_actor(actor, path("pid_actor.mlp"));
  if (!plog.loss.empty()) log("pretrain: clone MSE " + fmt17(plog.loss[plog.best_epoch]));
  return actor;
}

TrainResult Workspace::train() const {
  require_file(path("database.csv"), "gen-db");
  require_file(path("emulator.mlp"), "train-emulator");
  require_file(path("pid_actor.mlp"), "pretrain-actor");
  const auto db = load_database(path("database.csv"));
  const auto em = load_emulator(path("emulator.mlp"));
  auto actor = load_actor(path("pid_actor.mlp"));
  log("training actor for " + std::to_string(settings_.train.episodes) + " episodes");
  auto res = lfc::train(settings_.plant, settings_.scenario, settings_.train, std::move(actor), em, db);
  save_actor(res.actor, actor_path());
  save_train_log(res.log, path("train_log.csv"));
  if (!res.log.empty()) {
    log("train: episode 1 reward " + fmt17(res.log.front().metrics.reward) + ", final reward " +
        fmt17(res.log.back().metrics.reward));
  }
  return res;
}

Trajectory Workspace::evaluate() const {
  const auto c = controller(settings_.controller);
  const auto traj = run_episode(settings_.plant, settings_.scenario, c.control);
  std::filesystem::create_directories(settings_.output_dir);
  save_trajectory(traj, path("trajectory.csv"));
  json j = json::object();
  j[c.name] = metrics_json(compute_metrics(traj));
  j[c.name]["diverged"] = traj.diverged;
  write_json(j, path("metrics.json"));
  return traj;
}

std::vector<ComparisonRow> Workspace::compare() const {
  std::vector<NamedController> controllers;
  for (const auto& name : settings_.compare_controllers) controllers.push_back(controller(name));
  auto rows = lfc::compare(settings_.plant, settings_.scenario, controllers);
  std::filesystem::create_directories(settings_.output_dir);
  write_json(comparison_json(rows), path("compare.json"));
  return rows;
}

void Workspace::plot_data() const {
  const auto dir = path("figures");
  std::filesystem::create_directories(dir);

  if (std::filesystem::exists(path("train_log.csv"))) {
    std::ifstream in(path("train_log.csv"));
    std::ofstream out(dir / "reward_vs_episode.csv");
    out << "episode,reward\n";
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string episode, reward;
      std::getline(ss, episode, ',');
      std::getline(ss, reward, ',');
      out << episode << ',' << reward << '\n';
    }
  }

  std::vector<NamedController> controllers;
  for (const auto& name : settings_.compare_controllers) controllers.push_back(controller(name));

  auto emit = [&](const Scenario& scenario, const std::string& suffix) {
    std::vector<Trajectory> trajs;
    for (const auto& c : controllers) trajs.push_back(run_episode(settings_.plant, scenario, c.control));
    const auto steps = static_cast<std::size_t>(settings_.plant.sim.control_steps());
    std::ofstream f(dir / ("delta_f_vs_time" + suffix + ".csv"));
    std::ofstream pm(dir / ("delta_pm_vs_time" + suffix + ".csv"));
    std::ofstream pd(dir / ("disturbance" + suffix + ".csv"));
    f << 't';
    pm << 't';
    for (const auto& c : controllers) {
      f << ',' << c.name;
      pm << ',' << c.name;
    }
    f << '\n';
    pm << '\n';
    pd << "t,delta_pd\n";
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k + 1) * settings_.plant.sim.control_period;
      f << fmt17(t);
      pm << fmt17(t);
      for (const auto& tr : trajs) {
        // Diverged runs leave the remaining cells empty.
        f << ',' << (k < tr.rows.size() ? fmt17(tr.rows[k].delta_f) : "");
        pm << ',' << (k < tr.rows.size() ? fmt17(tr.rows[k].delta_pm) : "");
      }
      f << '\n';
      pm << '\n';
      if (!trajs.empty() && k < trajs.front().rows.size()) {
        pd << fmt17(t) << ',' << fmt17(trajs.front().rows[k].delta_pd) << '\n';
      }
    }
  };
  Scenario steps_only = settings_.scenario;
  steps_only.wind.enabled = false;
  emit(steps_only, "");
  Scenario with_wind = settings_.scenario;
  with_wind.wind.enabled = true;
  emit(with_wind, "_wind");
}

std::vector<ComparisonRow> Workspace::run_pipeline() const {
  if (!settings_.pid_gains) tune_pid();
  generate_database();
  train_emulator();
  pretrain_actor();
  train();
  return compare();
}

}  // namespace lfc
