#pragma once

// Closed-loop wrapper around the plant: zero-order hold of the command over a
// control period, disturbance bookkeeping and the observation pipeline.

#include <span>
#include <vector>

#include "lfc/plant.hpp"
#include "lfc/scenario.hpp"

namespace lfc {

struct SimConfig {
  double dt = 0.01;             // integrator step, s
  double control_period = 0.1;  // command hold, s
  double horizon = 20.0;        // episode length, s
  double f_max = kDefaultFMax;  // divergence guard, Hz

  int substeps() const;       // integrator steps per control period
  int control_steps() const;  // control periods per episode
  void validate() const;
};

struct PlantConfig {
  PlantParams params;
  NonlinearityConfig nl;
  SimConfig sim;

  void validate() const;
};

struct StepOutcome {
  Observation obs;   // observation after the step
  double delta_f;    // Δf at the end of the period
  bool diverged;
};

class Environment {
 public:
  Environment(PlantConfig config, const Scenario& scenario);

  const PlantConfig& config() const { return config_; }
  const PlantState& state() const { return state_; }
  const Observation& observation() const { return obs_; }
  int step_index() const { return step_; }
  double time() const { return step_ * config_.sim.control_period; }
  bool diverged() const { return diverged_; }
  bool done() const { return diverged_ || step_ >= config_.sim.control_steps(); }

  // Disturbance samples used by the next control period, one per substep.
  std::span<const double> upcoming_disturbance() const;
  // Disturbance at the current time t_k.
  double current_disturbance() const;

  // Holds `action` for one control period. On divergence the state is left
  // at its last finite value and the episode ends.
  StepOutcome step(double action);

 private:
  PlantConfig config_;
  std::vector<double> disturbance_;  // (control_steps * substeps + 1) samples
  PlantState state_;
  Observation obs_;
  int step_ = 0;
  bool diverged_ = false;
};

}  // namespace lfc
