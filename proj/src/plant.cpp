#include "lfc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfc/error.hpp"

namespace lfc {

void PlantParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(t_g) || !positive(t_t) || !positive(h) || !positive(d) ||
      !positive(r_droop)) {
    throw InvalidStateError("plant parameters must be finite and strictly positive");
  }
}

void NonlinearityConfig::validate() const {
  if (!(gdb_kappa >= 0.0) || !std::isfinite(gdb_kappa)) {
    throw InvalidStateError("gdb_kappa must be finite and >= 0");
  }
  if (!(grc_sigma > 0.0)) {
    throw InvalidStateError("grc_sigma must be > 0");
  }
}

bool PlantState::finite() const {
  return std::isfinite(delta_f) && std::isfinite(delta_pm) && std::isfinite(delta_pg);
}

bool Observation::finite() const {
  return std::isfinite(f_dev) && std::isfinite(f_int) && std::isfinite(f_der);
}

double dead_zone(double u, double kappa) {
  return std::max(0.0, u - kappa) + std::min(0.0, u + kappa);
}

double rate_limit(double raw_rate, double sigma) {
  return std::clamp(raw_rate, -sigma, sigma);
}

PlantRate derivatives(const PlantState& state, double u_c, double p_d,
                      const PlantParams& params, const NonlinearityConfig& nl) {
  if (!state.finite() || !std::isfinite(u_c) || !std::isfinite(p_d)) {
    throw InvalidStateError("non-finite plant state or input");
  }
  const double two_h = 2.0 * params.h;
  PlantRate rate;
  rate.delta_f = (state.delta_pm - p_d) / two_h - params.d * state.delta_f / two_h;
  rate.delta_pm = (state.delta_pg - state.delta_pm) / params.t_t;
  if (nl.grc_active()) rate.delta_pm = rate_limit(rate.delta_pm, nl.grc_sigma);
  rate.delta_pg = (dead_zone(u_c, nl.gdb_kappa) - state.delta_f / params.r_droop -
                   state.delta_pg) /
                  params.t_g;
  return rate;
}

namespace {

PlantState axpy(const PlantState& x, double a, const PlantRate& k) {
  return {x.delta_f + a * k.delta_f, x.delta_pm + a * k.delta_pm,
          x.delta_pg + a * k.delta_pg};
}

}  // namespace

PlantState step(const PlantState& state, double u_c, double p_d,
                const PlantParams& params, const NonlinearityConfig& nl,
                double dt, double f_max) {
  if (!(dt > 0.0)) throw InvalidStateError("integrator step must be positive");
  const PlantRate k1 = derivatives(state, u_c, p_d, params, nl);
  const PlantRate k2 = derivatives(axpy(state, 0.5 * dt, k1), u_c, p_d, params, nl);
  const PlantRate k3 = derivatives(axpy(state, 0.5 * dt, k2), u_c, p_d, params, nl);
  const PlantRate k4 = derivatives(axpy(state, dt, k3), u_c, p_d, params, nl);
  const double w = dt / 6.0;
  PlantState next{
      state.delta_f + w * (k1.delta_f + 2.0 * k2.delta_f + 2.0 * k3.delta_f + k4.delta_f),
      state.delta_pm + w * (k1.delta_pm + 2.0 * k2.delta_pm + 2.0 * k3.delta_pm + k4.delta_pm),
      state.delta_pg + w * (k1.delta_pg + 2.0 * k2.delta_pg + 2.0 * k3.delta_pg + k4.delta_pg)};
  if (!next.finite() || std::abs(next.delta_f) > f_max) {
    std::ostringstream msg;
    msg << "frequency deviation " << next.delta_f << " Hz exceeds bound " << f_max;
    throw DivergedError(msg.str(), 0.0);
  }
  return next;
}

PlantState advance(const PlantState& state, double u_c,
                   std::span<const double> p_d_substeps,
                   const PlantParams& params, const NonlinearityConfig& nl,
                   double dt, double f_max) {
  PlantState x = state;
  for (double p_d : p_d_substeps) x = step(x, u_c, p_d, params, nl, dt, f_max);
  return x;
}

Observation observe(double delta_f, double f_int_prev, double delta_f_prev,
                    double dt) {
  return {delta_f, f_int_prev + delta_f * dt, (delta_f - delta_f_prev) / dt};
}

double steady_state_freq(double p_d, const PlantParams& params) {
  return -p_d / (params.d + 1.0 / params.r_droop);
}

PlantState steady_state(double p_d, const PlantParams& params) {
  const double f = steady_state_freq(p_d, params);
  const double p = -f / params.r_droop;
  return {f, p, p};
}

}  // namespace lfc
