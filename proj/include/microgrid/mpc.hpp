#pragma once

#include "microgrid/scenario.hpp"

#include <string>
#include <vector>

namespace microgrid {

struct SimEvent {
  int step = 0;  // simulation step (0-based)
  std::string kind;
  std::string detail;
  double magnitude = 0.0;  // kW or kWh depending on kind
};

struct StepStats {
  int step = 0;
  int iterations = 0;      // exchange iterations (ADMM) or QP iterations
  double r_norm = 0.0;     // exchange residuals; zero in centralized modes
  double s_norm = 0.0;
  double plan_cost = 0.0;  // sum of agent local costs of the plan
  double solve_seconds = 0.0;
};

struct EvDayRecord {
  int vehicle = 0;
  int day = 0;  // simulation day index
  double q_at_departure = 0.0;
  double required = 0.0;  // alpha_des * q_des (actual)
  double shortfall = 0.0;
};

/// Executed trajectories over the simulation window plus diagnostics.
struct SimulationResult {
  RunMode mode = RunMode::Admm;
  int sim_steps = 0;
  double dt_hours = 0.25;

  PowerSchedule load, pv, bes, grid;  // realized, one entry per sim step
  std::vector<PowerSchedule> ev;      // per vehicle
  ChargeTrajectory q_bes;             // sim_steps + 1
  std::vector<ChargeTrajectory> q_ev;
  std::vector<std::vector<bool>> ev_present;

  Vec load_desired;   // actual demand before curtailment
  Vec pv_available;   // actual available generation (<= 0)
  Vec price;          // $/kWh over the sim window

  std::vector<SimEvent> events;
  std::vector<StepStats> stats;
  std::vector<EvDayRecord> ev_days;
};

/// Runs the receding-horizon loop in the given mode over scenario.sim_steps
/// steps: forecast, solve (exchange or centralized), execute the first step
/// against actual realizations, propagate charge states.
SimulationResult run_mpc(const Scenario& scenario, RunMode mode);

/// Offline penalty-parameter search: runs the first-step exchange for each
/// candidate rho and reports (rho, iterations to convergence).
std::vector<std::pair<double, int>> tune_rho(const Scenario& scenario,
                                             const std::vector<double>& candidates);

}  // namespace microgrid
