#pragma once

#include "microgrid/agents.hpp"
#include "microgrid/mpc.hpp"
#include "microgrid/qp.hpp"

#include <span>
#include <vector>

namespace microgrid {

/// All agent encodings stacked into one QP with explicit power-balance rows
/// sum_i p_i(t) = 0.  The same encodings drive both the exchange agents and
/// this monolithic form.
struct StackedProblem {
  qp::CanonicalQP qp;
  std::vector<Eigen::Index> offsets;  // variable offset per agent
  std::vector<Eigen::Index> sizes;    // variable count per agent
};

StackedProblem assemble_stacked(std::span<Agent* const> agents);

struct CentralizedSolution {
  std::vector<AgentPlan> plans;  // one per agent, schedule order preserved
  double objective = 0.0;        // sum of agent local costs at the optimum
  qp::QPSolution raw;
};

inline qp::SolverSettings tightened_settings() {
  qp::SolverSettings s;
  s.eps_abs = 1e-8;
  s.max_iter = 200000;
  return s;
}

/// Solves the full-horizon problem monolithically at a tightened tolerance;
/// the oracle for exchange correctness.  Throws std::runtime_error naming
/// the failure when the stacked program is infeasible.
CentralizedSolution solve_centralized(std::span<Agent* const> agents,
                                      qp::SolverSettings settings = tightened_settings());

/// The identical MPC loop with the monolithic solver in place of the
/// exchange; prescient substitutes actual future PV/load/EV parameters for
/// forecasts.
SimulationResult run_centralized_mpc(const Scenario& scenario, bool prescient);

}  // namespace microgrid
