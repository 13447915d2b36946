#pragma once

// Exogenous disturbance ΔP_d(t) = ΔP_L(t) + ΔP_w(t).

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace lfc {

struct StepEvent {
  double time = 0.0;   // s
  double level = 0.0;  // p.u., held until the next event
  friend bool operator==(const StepEvent&, const StepEvent&) = default;
};

struct StepSchedule {
  std::vector<StepEvent> events;

  // ±0.03 p.u. steps at 4 s and 12 s.
  static StepSchedule benchmark();
  void validate() const;
  friend bool operator==(const StepSchedule&, const StepSchedule&) = default;
};

struct WindModel {
  bool enabled = false;
  double rated = 0.02;             // p.u.
  double correlation_time = 5.0;   // s
  double volatility = 0.005;       // p.u./sqrt(s)
  std::uint64_t seed = 0;
};

double step_profile(const StepSchedule& schedule, double t);

// Reflected Ornstein-Uhlenbeck path around rated/2, bounded to [0, rated].
std::vector<double> wind_profile(const WindModel& model, std::span<const double> t_grid);

// 1-3 events at uniform times in [0, horizon) with uniform levels in the range.
StepSchedule randomized_training_schedule(std::uint64_t seed,
                                          std::pair<double, double> magnitude_range,
                                          double horizon);

// Disturbance sampled on the integrator grid t_k = k*dt, k = 0..n-1.
struct Scenario {
  StepSchedule steps;
  WindModel wind;

  std::vector<double> sample(double dt, std::size_t n) const;
};

}  // namespace lfc
