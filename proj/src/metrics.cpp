#include "lfc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace lfc {

Metrics compute_metrics(std::span<const double> delta_f) {
  Metrics m;
  if (delta_f.empty()) return m;
  double abs_sum = 0.0;
  for (double f : delta_f) {
    const double a = std::abs(f);
    abs_sum += a;
    m.q_sum -= f * f;
    m.largest_var = std::max(m.largest_var, a);
  }
  m.reward = -abs_sum;
  m.mean_abs_f = abs_sum / static_cast<double>(delta_f.size());
  return m;
}

}  // namespace lfc
