#pragma once

#include <span>

namespace lfc {

// Episode summary over the control-period grid t = 1..T.
struct Metrics {
  double q_sum = 0.0;        // sum of -Δf_t^2
  double mean_abs_f = 0.0;   // Hz
  double largest_var = 0.0;  // max |Δf_t|, Hz
  double reward = 0.0;       // -sum |Δf_t|

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics compute_metrics(std::span<const double> delta_f);

// Action value of one step, -Δf_{t+1}^2.
inline double q_value(double delta_f_next) { return -delta_f_next * delta_f_next; }

}  // namespace lfc
