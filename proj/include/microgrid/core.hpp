#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace microgrid {

using Vec = Eigen::VectorXd;

/// Signed power schedule in kW on a uniform time grid. Consumption is
/// positive, generation is negative.
using PowerSchedule = Eigen::VectorXd;

/// Stored energy in kWh at grid points; one more entry than the horizon.
using ChargeTrajectory = Eigen::VectorXd;

/// Per-step price in $/kWh.
using PriceSchedule = Eigen::VectorXd;

/// Uniform time grid shared by every schedule in a scenario.
struct TimeGrid {
  int step_minutes = 15;
  int horizon_steps = 96;  // MPC lookahead
  int sim_steps = 96;
  std::int64_t origin_unix = 0;  // timestamp of step 0, seconds since epoch

  double dt_hours() const { return step_minutes / 60.0; }

  /// Steps per 24-hour period; step_minutes must divide a day evenly.
  int period_steps() const { return (24 * 60) / step_minutes; }

  void validate() const;
};

/// Weights for every penalty term in the microgrid objective plus the
/// exchange penalty parameter rho.
struct PenaltyWeights {
  double alpha_load = 0.0;
  double alpha_pv = 0.0;
  double alpha_cyc_bes = 0.0;
  std::vector<double> alpha_cyc_ev;
  double alpha_range = 0.0;
  double alpha_diff = 0.0;
  double alpha_curv = 0.0;
  double alpha_prev = 0.0;
  std::vector<double> alpha_des;
  double rho = 1.0;

  void validate() const;
};

/// Range + total-variation + curvature cost of a power profile:
///   alpha_range * (max p - min p)
/// + alpha_diff  * sum |p(t+1) - p(t)|
/// + alpha_curv  * sum (p(t) - 2 p(t+1) + p(t+2))^2
/// Throws std::invalid_argument when p has fewer than 3 entries.
double smoothing_cost(const PowerSchedule& p, double alpha_range,
                      double alpha_diff, double alpha_curv);

double smoothing_cost(const PowerSchedule& p, const PenaltyWeights& w);

/// kW sustained over one grid step -> kWh.
double power_to_energy(double p_kw, const TimeGrid& grid);

}  // namespace microgrid
