#pragma once

#include "microgrid/agents.hpp"
#include "microgrid/core.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace microgrid {

/// Per-iteration state of the exchange iteration: all agent schedules, their
/// mean (the net imbalance), and the shared scaled price u.
struct ExchangeState {
  int k = 0;
  std::vector<PowerSchedule> p;
  PowerSchedule p_bar;
  PowerSchedule u;
  double rho = 1.0;
  std::vector<std::pair<double, double>> residual_history;  // (r_norm, s_norm)
};

struct RhoAdapt {
  bool enabled = false;
  double factor = 2.0;  // halve/double
  double ratio = 10.0;  // trigger when residuals are this far out of balance
};

struct ExchangeSettings {
  double eps_pri = -1.0;   // <= 0: default 1e-3 * sqrt(N*T)
  double eps_dual = -1.0;  // <= 0: default 1e-3 * sqrt(N*T)
  int max_iter = 2000;
  double rho = 1.0;
  RhoAdapt rho_adapt;
  int parallelism = 0;  // 0: all available threads; 1: serial reference path
};

enum class ExchangeStatus { Converged, MaxIterations };

struct ExchangeResult {
  ExchangeState state;
  ExchangeStatus status = ExchangeStatus::MaxIterations;
};

/// Runs the exchange iteration
///   p_i <- prox_i(p_i - p_bar - u; rho),  u <- u + p_bar
/// until ||p_bar||_2 <= eps_pri and the dual residual
/// rho*||(p - p_bar) - (p_prev - p_bar_prev)||_2 <= eps_dual.
/// Agent updates run in parallel; the averaging is a fixed-order serial
/// reduction so results are identical at any parallelism degree.
ExchangeResult run_exchange(std::span<Agent* const> agents, std::optional<ExchangeState> init,
                            const ExchangeSettings& settings);

/// (r_norm, s_norm) between consecutive states.
std::pair<double, double> residuals(const ExchangeState& cur, const ExchangeState& prev);

/// Changes rho while preserving the unscaled price y = rho * u (fixed points
/// of the iteration are preserved).
ExchangeState rescale_rho(ExchangeState state, double new_rho);

}  // namespace microgrid
