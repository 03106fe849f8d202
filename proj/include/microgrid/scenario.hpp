#pragma once

#include "microgrid/agents.hpp"
#include "microgrid/core.hpp"
#include "microgrid/exchange.hpp"
#include "microgrid/forecast.hpp"
#include "microgrid/qp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace microgrid {

enum class RunMode { Admm, Centralized, Prescient };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& s);

/// Diurnal sinusoid with seeded multiplicative noise and cloud-dip events.
struct SyntheticPVSpec {
  double peak_kw = 1200.0;
  double sunrise_hour = 6.0;
  double sunset_hour = 20.0;
  double noise_frac = 0.04;
  double cloud_dips_per_day = 3.0;
  double dip_depth_min = 0.2, dip_depth_max = 0.7;
  int dip_len_min = 3, dip_len_max = 10;
  double clearness_min = 0.85, clearness_max = 1.0;
};

/// Commercial double-hump profile with seeded noise.
struct SyntheticLoadSpec {
  double base_kw = 60.0;
  double peak_kw = 150.0;
  double morning_hour = 10.0, morning_width_hours = 2.5;
  double afternoon_hour = 15.0, afternoon_width_hours = 3.0;
  double noise_frac = 0.03;
};

/// Day-ahead wholesale shape: overnight trough, daytime shoulder, evening
/// peak; hourly values held over the step grid.
struct SyntheticPriceSpec {
  double off_peak = 0.025;
  double shoulder = 0.06;
  double peak = 0.12;
  double peak_hour = 18.0;
  double day_jitter_frac = 0.10;
};

struct PVSource {
  bool use_csv = false;
  std::string csv;
  SyntheticPVSpec synthetic;
};
struct LoadSource {
  bool use_csv = false;
  std::string csv;
  SyntheticLoadSpec synthetic;
};
struct PriceSource {
  bool use_csv = false;
  std::string csv;
  SyntheticPriceSpec synthetic;
};

struct BESConfig {
  StorageParams params;  // defaults set in load_scenario
  double q_init_frac = 0.5;
  double q_final_frac = 0.5;
};

struct EVFleetConfig {
  int count = 20;
  double charger_kw = 7.2;
  double eta_c = 0.9, eta_d = 0.9, eta_q = 1.0;
  double q_min_frac = 0.3, q_max_frac = 0.9;
  double alpha_cyc = 0.01;
  double alpha_des = 1.0;
  std::vector<double> trip_miles;  // explicit per-vehicle longest trips, optional
  double trip_miles_min = 15.0, trip_miles_max = 60.0;
  double arrival_mean_hour = 8.0, arrival_std_hours = 0.5;
  double departure_mean_hour = 17.0, departure_std_hours = 0.75;
  double min_window_hours = 3.5;
  double init_frac_min = 0.30, init_frac_max = 0.55;
  double des_frac_min = 0.50, des_frac_max = 0.80;
};

struct ForecastConfig {
  int ar_order = 4;
  double decay = 0.7;
  double gamma_asym_pv = 9.0;
  double gamma_asym_load = 1.0;
  double gamma_curv = 0.1;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  TimeGrid grid;  // sim_steps = sim_days * period
  int sim_days = 3;
  int history_days = 5;
  RunMode mode = RunMode::Admm;
  double pcc_limit_kw = 200.0;
  double beta = 0.5;  // minimal load fraction
  PVSource pv;
  LoadSource load;
  PriceSource price;
  BESConfig bes;
  EVFleetConfig ev;
  PenaltyWeights weights;
  ForecastConfig forecast;
  ExchangeSettings admm;
  qp::SolverSettings qp_settings;
};

/// Parses and validates a scenario JSON file; all defaults are resolved.
/// Validation errors name the offending field and constraint.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario_json(const std::string& text, const std::string& base_dir);

/// Serializes the fully resolved config; load(save(x)) round-trips exactly.
std::string scenario_to_json(const ScenarioConfig& config);
void save_scenario(const ScenarioConfig& config, const std::string& path);

/// 2x buffer at 0.311 kWh/mile.
double size_ev_battery(double longest_trip_miles);

struct FleetSample {
  std::vector<StorageParams> batteries;
  std::vector<std::string> names;
  /// [vehicle][day]: actual parameters, day-relative steps.
  std::vector<std::vector<EvObservation>> days;
};

/// Deterministic fleet construction plus per-day parameter draws for
/// history_days + sim_days days.
FleetSample sample_fleet(const EVFleetConfig& spec, int days, int period_steps, double dt_hours,
                         std::uint64_t seed);

/// Fully materialized experiment data on the absolute step grid
/// [0, hist_steps + sim_steps); the simulation starts at step hist_steps.
struct Scenario {
  ScenarioConfig config;
  int period = 96;
  int hist_steps = 0;
  int sim_steps = 0;
  Vec load_actual;  // desired demand, >= 0 (hist + sim)
  Vec pv_actual;    // available generation, <= 0 (hist + sim)
  Vec price;        // $/kWh (hist + sim)
  FleetSample fleet;
};

Scenario materialize(const ScenarioConfig& config);

}  // namespace microgrid
