#include "microgrid/metrics.hpp"

#include "json.hpp"

#include <cmath>
#include <sstream>

namespace microgrid {

using nlohmann::json;

MetricsReport compute_metrics(const SimulationResult& result, const Scenario& scenario) {
  MetricsReport m;
  const double dt = result.dt_hours;
  const auto& w = scenario.config.weights;
  const int steps = result.sim_steps;

  for (int t = 0; t < steps; ++t)
    m.external_cost_usd += result.price[t] * result.grid[t] * dt;

  if (steps >= 3) m.smoothing_cost = smoothing_cost(result.grid, w);

  double load_pen = 0.0, pv_pen = 0.0;
  for (int t = 0; t < steps; ++t) {
    const double load_cut = std::max(0.0, result.load_desired[t] - result.load[t]);
    const double pv_cut = std::max(0.0, result.pv[t] - result.pv_available[t]);
    m.load_curtailed_kwh += load_cut * dt;
    m.pv_curtailed_kwh += pv_cut * dt;
    load_pen += (result.load_desired[t] - result.load[t]) *
                (result.load_desired[t] - result.load[t]);
    pv_pen += (result.pv_available[t] - result.pv[t]) * (result.pv_available[t] - result.pv[t]);
  }
  m.curtail_penalty = w.alpha_load * load_pen + w.alpha_pv * pv_pen;

  auto tv = [](const PowerSchedule& p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i + 1 < p.size(); ++i) acc += std::abs(p[i + 1] - p[i]);
    return acc;
  };
  m.cycling_cost = w.alpha_cyc_bes * tv(result.bes);
  for (std::size_t i = 0; i < result.ev.size(); ++i) {
    const double a = i < w.alpha_cyc_ev.size() ? w.alpha_cyc_ev[i] : 0.0;
    m.cycling_cost += a * tv(result.ev[i]);
  }

  for (const auto& rec : result.ev_days) m.ev_shortfall_kwh += rec.shortfall;

  m.total_objective =
      m.external_cost_usd + m.smoothing_cost + m.curtail_penalty + m.cycling_cost;
  return m;
}

namespace {

json metrics_json(const MetricsReport& m) {
  return json{{"external_cost_usd", m.external_cost_usd},
              {"smoothing_cost", m.smoothing_cost},
              {"pv_curtailed_kwh", m.pv_curtailed_kwh},
              {"load_curtailed_kwh", m.load_curtailed_kwh},
              {"ev_shortfall_kwh", m.ev_shortfall_kwh},
              {"cycling_cost", m.cycling_cost},
              {"curtail_penalty", m.curtail_penalty},
              {"total_objective", m.total_objective}};
}

}  // namespace

std::string metrics_to_json(const MetricsReport& m, RunMode mode, std::uint64_t seed) {
  json j = metrics_json(m);
  j["mode"] = to_string(mode);
  j["seed"] = seed;
  return j.dump(2);
}

CompareReport compare(const Scenario& scenario) {
  CompareReport report;
  report.admm = compute_metrics(run_mpc(scenario, RunMode::Admm), scenario);
  report.centralized = compute_metrics(run_mpc(scenario, RunMode::Centralized), scenario);
  report.prescient = compute_metrics(run_mpc(scenario, RunMode::Prescient), scenario);

  const double oc = report.centralized.total_objective;
  const double op = report.prescient.total_objective;
  report.gap_admm_vs_central =
      std::abs(report.admm.total_objective - oc) / std::max(1e-12, std::abs(oc));
  report.gap_central_vs_prescient = std::abs(oc - op) / std::max(1e-12, std::abs(op));
  return report;
}

std::string compare_to_json(const CompareReport& r, std::uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["admm"] = metrics_json(r.admm);
  j["centralized"] = metrics_json(r.centralized);
  j["prescient"] = metrics_json(r.prescient);
  j["gap_admm_vs_central"] = r.gap_admm_vs_central;
  j["gap_central_vs_prescient"] = r.gap_central_vs_prescient;
  return j.dump(2);
}

std::string compare_to_table(const CompareReport& r) {
  std::ostringstream os;
  auto row = [&os](const char* name, const MetricsReport& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s %14.2f %16.2f %16.2f %18.2f %18.3f\n", name,
                  m.external_cost_usd, m.smoothing_cost, m.pv_curtailed_kwh,
                  m.load_curtailed_kwh, m.ev_shortfall_kwh);
    os << buf;
  };
  os << "Method                   External [$]   Smoothing [kW]   PV curt. [kWh]   "
        "Load curt. [kWh]   EV shortfall [kWh]\n";
  row("centralized (prescient)", r.prescient);
  row("centralized", r.centralized);
  row("ADMM decentralized", r.admm);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "\nrelative objective gaps: admm vs centralized %.4f%%, centralized vs prescient "
                "%.4f%%\n",
                100.0 * r.gap_admm_vs_central, 100.0 * r.gap_central_vs_prescient);
  os << buf;
  return os.str();
}

}  // namespace microgrid
