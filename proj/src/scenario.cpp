#include "lfc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lfc/error.hpp"

namespace lfc {

StepSchedule StepSchedule::benchmark() { return {{{4.0, -0.03}, {12.0, 0.03}}}; }

void StepSchedule::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!std::isfinite(events[i].time) || !std::isfinite(events[i].level)) {
      throw ConfigError("step schedule entries must be finite");
    }
    if (i > 0 && !(events[i].time > events[i - 1].time)) {
      throw ConfigError("step schedule times must be strictly increasing");
    }
  }
}

double step_profile(const StepSchedule& schedule, double t) {
  double level = 0.0;
  for (const auto& e : schedule.events) {
    if (e.time > t) break;
    level = e.level;
  }
  return level;
}

std::vector<double> wind_profile(const WindModel& model, std::span<const double> t_grid) {
  std::vector<double> out;
  out.reserve(t_grid.size());
  const double mean = 0.5 * model.rated;
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double x = mean;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i > 0) {
      const double dt = t_grid[i] - t_grid[i - 1];
      const double decay = std::exp(-dt / model.correlation_time);
      const double spread = model.volatility *
                            std::sqrt(0.5 * model.correlation_time * (1.0 - decay * decay));
      x = mean + (x - mean) * decay + spread * normal(rng);
      // Reflect until inside [0, rated]; a single large draw may cross both walls.
      while (x < 0.0 || x > model.rated) {
        x = x < 0.0 ? -x : 2.0 * model.rated - x;
      }
    }
    out.push_back(x);
  }
  return out;
}

StepSchedule randomized_training_schedule(std::uint64_t seed,
                                          std::pair<double, double> magnitude_range,
                                          double horizon) {
  auto [lo, hi] = magnitude_range;
  if (lo > hi) std::swap(lo, hi);
  if (lo < -0.05 || hi > 0.05) {
    throw ConfigError("magnitude range must lie within [-0.05, 0.05] p.u.");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_real_distribution<double> when(0.0, horizon);
  std::uniform_real_distribution<double> level(lo, hi);
  const int n = count(rng);
  std::vector<double> times(n);
  for (auto& t : times) t = when(rng);
  std::sort(times.begin(), times.end());
  StepSchedule schedule;
  for (int i = 0; i < n; ++i) {
    double t = times[i];
    if (!schedule.events.empty() && t <= schedule.events.back().time) {
      t = std::nextafter(schedule.events.back().time, horizon);
    }
    schedule.events.push_back({t, lo == hi ? lo : level(rng)});
  }
  return schedule;
}

std::vector<double> Scenario::sample(double dt, std::size_t n) const {
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k) grid[k] = static_cast<double>(k) * dt;
  std::vector<double> out(n);
  // Slack so events that fall on the grid are not lost to rounding.
  for (std::size_t k = 0; k < n; ++k) out[k] = step_profile(steps, grid[k] + 1e-9 * dt);
  if (wind.enabled) {
    const auto w = wind_profile(wind, grid);
    for (std::size_t k = 0; k < n; ++k) out[k] += w[k];
  }
  return out;
}

}  // namespace lfc
