#include "microgrid/core.hpp"

#include <cmath>
#include <stdexcept>

namespace microgrid {

void TimeGrid::validate() const {
  if (step_minutes <= 0) throw std::invalid_argument("TimeGrid: step_minutes must be positive");
  if (horizon_steps <= 0) throw std::invalid_argument("TimeGrid: horizon_steps must be positive");
  if (sim_steps <= 0) throw std::invalid_argument("TimeGrid: sim_steps must be positive");
  if ((24 * 60) % step_minutes != 0)
    throw std::invalid_argument("TimeGrid: step_minutes must divide 24 hours evenly");
}

void PenaltyWeights::validate() const {
  auto nonneg = [](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("PenaltyWeights: ") + what + " must be nonnegative");
  };
  nonneg(alpha_load, "alpha_load");
  nonneg(alpha_pv, "alpha_pv");
  nonneg(alpha_cyc_bes, "alpha_cyc_bes");
  nonneg(alpha_range, "alpha_range");
  nonneg(alpha_diff, "alpha_diff");
  nonneg(alpha_curv, "alpha_curv");
  nonneg(alpha_prev, "alpha_prev");
  for (double a : alpha_cyc_ev) nonneg(a, "alpha_cyc_ev[i]");
  for (double a : alpha_des) nonneg(a, "alpha_des[i]");
  if (!(rho > 0.0)) throw std::invalid_argument("PenaltyWeights: rho must be positive");
}

double smoothing_cost(const PowerSchedule& p, double alpha_range,
                      double alpha_diff, double alpha_curv) {
  const Eigen::Index n = p.size();
  if (n < 3)
    throw std::invalid_argument("smoothing_cost: need at least 3 entries (curvature undefined)");

  const double range = p.maxCoeff() - p.minCoeff();
  double tv = 0.0;
  for (Eigen::Index t = 0; t + 1 < n; ++t) tv += std::abs(p[t + 1] - p[t]);
  double curv = 0.0;
  for (Eigen::Index t = 0; t + 2 < n; ++t) {
    const double d2 = p[t] - 2.0 * p[t + 1] + p[t + 2];
    curv += d2 * d2;
  }
  return alpha_range * range + alpha_diff * tv + alpha_curv * curv;
}

double smoothing_cost(const PowerSchedule& p, const PenaltyWeights& w) {
  return smoothing_cost(p, w.alpha_range, w.alpha_diff, w.alpha_curv);
}

double power_to_energy(double p_kw, const TimeGrid& grid) {
  return p_kw * grid.step_minutes / 60.0;
}

}  // namespace microgrid
