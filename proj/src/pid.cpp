#include "lfc/pid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lfc/error.hpp"
#include "lfc/random.hpp"

namespace lfc {

double pid_control(const Observation& obs, const PidGains& gains, double a_max) {
  const double u = -(gains.kp * obs.f_dev + gains.ki * obs.f_int + gains.kd * obs.f_der);
  return std::clamp(u, -a_max, a_max);
}

PidGrid PidGrid::standard() {
  PidGrid grid;
  for (int i = 1; i <= 20; ++i) {
    grid.kp.push_back(i / 10.0);
    grid.ki.push_back(i / 10.0);
  }
  for (int i = 0; i <= 10; ++i) grid.kd.push_back(i * 0.05);
  return grid;
}

double pid_cost(const PlantConfig& plant, const Scenario& scenario, const PidGains& gains,
                double a_max) {
  Environment env(plant, scenario);
  double cost = 0.0;
  while (!env.done()) {
    const auto out = env.step(pid_control(env.observation(), gains, a_max));
    if (out.diverged) return std::numeric_limits<double>::infinity();
    cost += std::abs(out.delta_f);
  }
  return cost;
}

TuneResult tune_pid(const PlantConfig& plant, const Scenario& scenario, const PidGrid& grid,
                    double a_max) {
  if (grid.kp.empty() || grid.ki.empty() || grid.kd.empty()) {
    throw ConfigError("PID search grid is empty");
  }
  TuneResult best;
  best.cost = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double kp : grid.kp) {
    for (double ki : grid.ki) {
      for (double kd : grid.kd) {
        const PidGains g{kp, ki, kd};
        const double cost = pid_cost(plant, scenario, g, a_max);
        ++best.evaluated;
        if (!std::isfinite(cost)) {
          ++best.diverged;
          continue;
        }
        if (!found || cost < best.cost || (cost == best.cost && g < best.gains)) {
          best.gains = g;
          best.cost = cost;
          found = true;
        }
      }
    }
  }
  if (!found) {
    throw TuningFailedError("all " + std::to_string(best.evaluated) +
                            " PID candidates diverged on the tuning scenario");
  }
  return best;
}

LfcDatabase generate_database(const PlantConfig& plant, const PidGains& gains,
                              const DatabaseSpec& spec) {
  if (spec.episodes < 1) throw ConfigError("database.episodes must be >= 1");
  if (spec.noise_std < 0.0) throw ConfigError("database.noise_std must be >= 0");
  LfcDatabase db;
  db.plant = plant;
  db.gains = gains;
  db.spec = spec;

  Rng noise_rng(derive_seed(spec.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int episode = 0; episode < spec.episodes; ++episode) {
    const std::uint64_t episode_seed = derive_seed(spec.seed, 1 + episode);
    Scenario scenario;
    scenario.steps = randomized_training_schedule(episode_seed, spec.magnitude_range,
                                                  plant.sim.horizon);
    scenario.wind = spec.wind_model;
    scenario.wind.enabled = spec.wind;
    scenario.wind.seed = derive_seed(episode_seed, 7);

    Environment env(plant, scenario);
    std::vector<LfcRecord> episode_records;
    episode_records.reserve(plant.sim.control_steps());
    while (!env.done()) {
      LfcRecord rec;
      rec.obs = env.observation();
      rec.state = env.state();
      const auto window = env.upcoming_disturbance();
      rec.disturbance.assign(window.begin(), window.end());
      double action = pid_control(rec.obs, gains, spec.a_max);
      // Draw even when std is zero so the stream layout does not depend on it.
      const double z = normal(noise_rng);
      if (spec.noise_std > 0.0) {
        action = std::clamp(action + spec.noise_std * z, -spec.a_max, spec.a_max);
      }
      rec.action = action;
      const auto out = env.step(action);
      if (out.diverged) break;
      rec.next_delta_f = out.delta_f;
      episode_records.push_back(std::move(rec));
    }
    if (env.diverged()) {
      ++db.dropped_episodes;
      continue;
    }
    for (auto& r : episode_records) db.records.push_back(std::move(r));
  }
  return db;
}

std::filesystem::path database_metadata_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".meta.json";
  return p;
}

namespace {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_csv_field(const std::string& text, const char* name, std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ParseError("database line " + std::to_string(line) + ": field '" + name +
                     "' is not a number");
  }
  return v;
}

}  // namespace

void save_database(const LfcDatabase& db, const std::filesystem::path& csv_path) {
  {
    std::ofstream out(csv_path);
    if (!out) throw Error("cannot open '" + csv_path.string() + "' for writing");
    out << "f_dev,f_int,f_der,action,next_f_dev\n";
    for (const auto& r : db.records) {
      out << fmt17(r.obs.f_dev) << ',' << fmt17(r.obs.f_int) << ',' << fmt17(r.obs.f_der) << ','
          << fmt17(r.action) << ',' << fmt17(r.next_delta_f) << '\n';
    }
  }
  const auto& p = db.plant;
  json meta = {
      {"plant",
       {{"t_g", p.params.t_g}, {"t_t", p.params.t_t}, {"h", p.params.h}, {"d", p.params.d},
        {"r_droop", p.params.r_droop}}},
      {"nonlinear",
       {{"gdb_kappa", p.nl.gdb_kappa}, {"grc_sigma", finite_or_null(p.nl.grc_sigma)}}},
      {"sim",
       {{"dt", p.sim.dt},
        {"control_period", p.sim.control_period},
        {"horizon", p.sim.horizon},
        {"f_max", p.sim.f_max}}},
      {"gains", {{"kp", db.gains.kp}, {"ki", db.gains.ki}, {"kd", db.gains.kd}}},
      {"episodes", db.spec.episodes},
      {"dropped_episodes", db.dropped_episodes},
      {"noise_std", db.spec.noise_std},
      {"magnitude_range", {db.spec.magnitude_range.first, db.spec.magnitude_range.second}},
      {"wind", db.spec.wind},
      {"wind_rated", db.spec.wind_model.rated},
      {"wind_correlation_time", db.spec.wind_model.correlation_time},
      {"wind_volatility", db.spec.wind_model.volatility},
      {"seed", db.spec.seed},
      {"a_max", db.spec.a_max},
      {"records", db.records.size()}};
  std::ofstream out(database_metadata_path(csv_path));
  if (!out) throw Error("cannot write database metadata next to '" + csv_path.string() + "'");
  out << meta.dump(2) << '\n';
}

LfcDatabase load_database(const std::filesystem::path& csv_path) {
  LfcDatabase db;
  const auto meta_path = database_metadata_path(csv_path);
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw ParseError("missing database metadata '" + meta_path.string() + "'");
  json meta;
  try {
    meta = json::parse(meta_in);
    const auto& pl = meta.at("plant");
    db.plant.params = {pl.at("t_g"), pl.at("t_t"), pl.at("h"), pl.at("d"), pl.at("r_droop")};
    const auto& nl = meta.at("nonlinear");
    db.plant.nl.gdb_kappa = nl.at("gdb_kappa");
    db.plant.nl.grc_sigma = nl.at("grc_sigma").is_null()
                                ? std::numeric_limits<double>::infinity()
                                : nl.at("grc_sigma").get<double>();
    const auto& sim = meta.at("sim");
    db.plant.sim = {sim.at("dt"), sim.at("control_period"), sim.at("horizon"), sim.at("f_max")};
    const auto& g = meta.at("gains");
    db.gains = {g.at("kp"), g.at("ki"), g.at("kd")};
    db.spec.episodes = meta.at("episodes");
    db.dropped_episodes = meta.at("dropped_episodes");
    db.spec.noise_std = meta.at("noise_std");
    db.spec.magnitude_range = {meta.at("magnitude_range").at(0), meta.at("magnitude_range").at(1)};
    db.spec.wind = meta.at("wind");
    db.spec.wind_model.rated = meta.at("wind_rated");
    db.spec.wind_model.correlation_time = meta.at("wind_correlation_time");
    db.spec.wind_model.volatility = meta.at("wind_volatility");
    db.spec.seed = meta.at("seed");
    db.spec.a_max = meta.at("a_max");
  } catch (const json::exception& e) {
    throw ParseError("database metadata '" + meta_path.string() + "': " + e.what());
  }

  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open database '" + csv_path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "f_dev,f_int,f_der,action,next_f_dev") {
    throw ParseError("database '" + csv_path.string() + "': bad or missing header");
  }
  static constexpr const char* kFields[] = {"f_dev", "f_int", "f_der", "action", "next_f_dev"};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    double v[5];
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      if (n == 5) throw ParseError("database line " + std::to_string(lineno) + ": too many fields");
      v[n] = parse_csv_field(cell, kFields[n], lineno);
      ++n;
    }
    if (n != 5) {
      throw ParseError("database line " + std::to_string(lineno) + ": field '" + kFields[n] +
                       "' is missing");
    }
    LfcRecord r;
    r.obs = {v[0], v[1], v[2]};
    r.action = v[3];
    r.next_delta_f = v[4];
    db.records.push_back(std::move(r));
  }
  return db;
}

}  // namespace lfc
