#pragma once

// Single-area load frequency control plant: governor, turbine and swing
// equation with an optional governor dead band (GDB) and generation rate
// constraint (GRC).

#include <limits>
#include <span>

namespace lfc {

inline constexpr double kDefaultFMax = 2.0;  // Hz

struct PlantParams {
  double t_g = 0.10;     // governor time constant, s
  double t_t = 0.40;     // turbine time constant, s
  double h = 0.0833;     // inertia constant, p.u./Hz
  double d = 0.0015;     // damping coefficient, p.u./Hz
  double r_droop = 0.33; // speed droop, Hz/p.u.

  void validate() const;
};

struct NonlinearityConfig {
  double gdb_kappa = 0.0;  // dead-band half-width, p.u.; 0 disables
  double grc_sigma = std::numeric_limits<double>::infinity();  // p.u./s

  static NonlinearityConfig linear() { return {}; }
  static NonlinearityConfig benchmark() { return {0.0006, 0.0017}; }

  bool grc_active() const { return grc_sigma < std::numeric_limits<double>::infinity(); }
  void validate() const;
};

struct PlantState {
  double delta_f = 0.0;   // Hz
  double delta_pm = 0.0;  // p.u.
  double delta_pg = 0.0;  // p.u.

  bool finite() const;
  friend bool operator==(const PlantState&, const PlantState&) = default;
};

// Time derivative of PlantState; same layout.
using PlantRate = PlantState;

struct Observation {
  double f_dev = 0.0;  // Hz
  double f_int = 0.0;  // Hz*s
  double f_der = 0.0;  // Hz/s

  bool finite() const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

double dead_zone(double u, double kappa);
double rate_limit(double raw_rate, double sigma);

// Throws InvalidStateError on non-finite input.
PlantRate derivatives(const PlantState& state, double u_c, double p_d,
                      const PlantParams& params, const NonlinearityConfig& nl);

// One classical RK4 step of length dt with u_c and p_d held constant.
// Throws DivergedError once |Δf| exceeds f_max.
PlantState step(const PlantState& state, double u_c, double p_d,
                const PlantParams& params, const NonlinearityConfig& nl,
                double dt, double f_max = kDefaultFMax);

// Holds u_c over one control period made of p_d_substeps.size() RK4 steps,
// using p_d_substeps[i] for the i-th substep.
PlantState advance(const PlantState& state, double u_c,
                   std::span<const double> p_d_substeps,
                   const PlantParams& params, const NonlinearityConfig& nl,
                   double dt, double f_max = kDefaultFMax);

// Rectangle-rule integral and backward-difference derivative of Δf.
Observation observe(double delta_f, double f_int_prev, double delta_f_prev,
                    double dt);

// Linear-plant equilibrium frequency for a constant disturbance.
double steady_state_freq(double p_d, const PlantParams& params);

// Full equilibrium state (Δf_ss, ΔP_m, ΔP_g) of the linear plant with u_c=0.
PlantState steady_state(double p_d, const PlantParams& params);

}  // namespace lfc
