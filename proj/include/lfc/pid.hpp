#pragma once

// Baseline PID controller, grid-search tuning and the LFC database that
// seeds both the emulator and the actor.

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "lfc/environment.hpp"
#include "lfc/plant.hpp"
#include "lfc/scenario.hpp"

namespace lfc {

inline constexpr double kDefaultActionBound = 0.1;  // p.u.

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  friend bool operator==(const PidGains&, const PidGains&) = default;
  friend auto operator<=>(const PidGains&, const PidGains&) = default;
};

// ΔP_c = -(kp*f_dev + ki*f_int + kd*f_der), clipped to [-a_max, a_max].
double pid_control(const Observation& obs, const PidGains& gains,
                   double a_max = kDefaultActionBound);

struct PidGrid {
  std::vector<double> kp;
  std::vector<double> ki;
  std::vector<double> kd;

  // kp, ki in {0.1, ..., 2.0}; kd in {0, 0.05, ..., 0.5}.
  static PidGrid standard();
};

struct TuneResult {
  PidGains gains;
  double cost = 0.0;  // sum_t |Δf_t| on the tuning scenario
  int evaluated = 0;
  int diverged = 0;
};

// Sum of |Δf_t| over the control grid, or +inf when the loop diverges.
double pid_cost(const PlantConfig& plant, const Scenario& scenario, const PidGains& gains,
                double a_max = kDefaultActionBound);

// Exhaustive search; ties go to the lexicographically smallest (kp, ki, kd).
// Throws TuningFailedError when every candidate diverges.
TuneResult tune_pid(const PlantConfig& plant, const Scenario& scenario, const PidGrid& grid,
                    double a_max = kDefaultActionBound);

struct LfcRecord {
  Observation obs;
  double action = 0.0;
  double next_delta_f = 0.0;
  // Replay data, kept in memory only: plant state at the record's time and
  // the disturbance seen over the following control period.
  PlantState state;
  std::vector<double> disturbance;
};

struct DatabaseSpec {
  int episodes = 40;
  double noise_std = 0.01;  // p.u.
  std::pair<double, double> magnitude_range{-0.03, 0.03};
  bool wind = true;
  WindModel wind_model;  // seed is replaced per episode
  std::uint64_t seed = 1;
  double a_max = kDefaultActionBound;
};

struct LfcDatabase {
  std::vector<LfcRecord> records;
  PlantConfig plant;
  PidGains gains;
  DatabaseSpec spec;
  int dropped_episodes = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

LfcDatabase generate_database(const PlantConfig& plant, const PidGains& gains,
                              const DatabaseSpec& spec);

// CSV with header f_dev,f_int,f_der,action,next_f_dev plus a JSON metadata
// file next to it (<path>.meta.json).
void save_database(const LfcDatabase& db, const std::filesystem::path& csv_path);
LfcDatabase load_database(const std::filesystem::path& csv_path);

std::filesystem::path database_metadata_path(const std::filesystem::path& csv_path);

}  // namespace lfc
