#pragma once

#include "microgrid/mpc.hpp"
#include "microgrid/scenario.hpp"

#include <string>

namespace microgrid {

/// Table-style cost metrics over realized (executed) schedules.
struct MetricsReport {
  double external_cost_usd = 0.0;   // sum c(t) p_grid(t) dt
  double smoothing_cost = 0.0;      // range/TV/curvature cost of realized p_grid
  double pv_curtailed_kwh = 0.0;    // available minus realized generation
  double load_curtailed_kwh = 0.0;  // desired minus served demand
  double ev_shortfall_kwh = 0.0;    // sum over vehicle-days below the target
  double cycling_cost = 0.0;        // L1 cycling terms (BES + EVs)
  double curtail_penalty = 0.0;     // quadratic curtailment penalties
  double total_objective = 0.0;     // full realized objective
};

MetricsReport compute_metrics(const SimulationResult& result, const Scenario& scenario);

std::string metrics_to_json(const MetricsReport& m, RunMode mode, std::uint64_t seed);

struct CompareReport {
  MetricsReport admm, centralized, prescient;
  double gap_admm_vs_central = 0.0;
  double gap_central_vs_prescient = 0.0;
};

/// Runs all three modes on identical data and reports the metric table plus
/// relative objective gaps.
CompareReport compare(const Scenario& scenario);

std::string compare_to_json(const CompareReport& report, std::uint64_t seed);
std::string compare_to_table(const CompareReport& report);

}  // namespace microgrid
