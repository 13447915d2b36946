#include "lfc/environment.hpp"

#include <cmath>

#include "lfc/error.hpp"

namespace lfc {

int SimConfig::substeps() const {
  return static_cast<int>(std::lround(control_period / dt));
}

int SimConfig::control_steps() const {
  return static_cast<int>(std::lround(horizon / control_period));
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !(control_period > 0.0) || !(horizon > 0.0) || !(f_max > 0.0)) {
    throw ConfigError("sim: dt, control_period, horizon and f_max must be positive");
  }
  if (std::abs(substeps() * dt - control_period) > 1e-9 * control_period || substeps() < 1) {
    throw ConfigError("sim.control_period must be a multiple of sim.dt");
  }
  if (std::abs(control_steps() * control_period - horizon) > 1e-9 * horizon ||
      control_steps() < 1) {
    throw ConfigError("sim.horizon must be a multiple of sim.control_period");
  }
}

void PlantConfig::validate() const {
  try {
    params.validate();
    nl.validate();
  } catch (const InvalidStateError& e) {
    throw ConfigError(e.what());
  }
  sim.validate();
}

Environment::Environment(PlantConfig config, const Scenario& scenario)
    : config_(std::move(config)) {
  config_.validate();
  scenario.steps.validate();
  const auto n = static_cast<std::size_t>(config_.sim.control_steps()) * config_.sim.substeps() + 1;
  disturbance_ = scenario.sample(config_.sim.dt, n);
}

std::span<const double> Environment::upcoming_disturbance() const {
  const auto m = static_cast<std::size_t>(config_.sim.substeps());
  return std::span<const double>(disturbance_).subspan(static_cast<std::size_t>(step_) * m, m);
}

double Environment::current_disturbance() const {
  return disturbance_[static_cast<std::size_t>(step_) * config_.sim.substeps()];
}

StepOutcome Environment::step(double action) {
  if (done()) throw InvalidStateError("episode already finished");
  const auto& sim = config_.sim;
  try {
    state_ = advance(state_, action, upcoming_disturbance(), config_.params, config_.nl, sim.dt,
                     sim.f_max);
  } catch (const DivergedError&) {
    diverged_ = true;
    return {obs_, state_.delta_f, true};
  }
  obs_ = observe(state_.delta_f, obs_.f_int, obs_.f_dev, sim.control_period);
  ++step_;
  return {obs_, state_.delta_f, false};
}

}  // namespace lfc
