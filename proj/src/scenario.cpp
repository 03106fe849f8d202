#include "microgrid/scenario.hpp"

#include "microgrid/csv.hpp"
#include "microgrid/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace microgrid {

using nlohmann::json;

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Admm: return "admm";
    case RunMode::Centralized: return "centralized";
    case RunMode::Prescient: return "prescient";
  }
  return "admm";
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "admm") return RunMode::Admm;
  if (s == "centralized") return RunMode::Centralized;
  if (s == "prescient") return RunMode::Prescient;
  throw std::invalid_argument("scenario: mode must be admm|centralized|prescient, got '" + s +
                              "'");
}

double size_ev_battery(double longest_trip_miles) {
  if (!(longest_trip_miles > 0.0))
    throw std::invalid_argument("size_ev_battery: miles must be positive");
  return 2.0 * longest_trip_miles * 0.311;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& constraint) {
  throw std::invalid_argument("scenario: field '" + field + "' " + constraint);
}

double num_in(const json& j, const std::string& path, const char* key, double def, double lo,
              double hi) {
  double v = def;
  if (j.contains(key)) {
    if (!j.at(key).is_number()) fail(path + key, "must be a number");
    v = j.at(key).get<double>();
  }
  if (v < lo || v > hi)
    fail(path + key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

int int_in(const json& j, const std::string& path, const char* key, int def, int lo, int hi) {
  int v = def;
  if (j.contains(key)) {
    if (!j.at(key).is_number_integer()) fail(path + key, "must be an integer");
    v = j.at(key).get<int>();
  }
  if (v < lo || v > hi)
    fail(path + key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

bool bool_or(const json& j, const char* key, bool def) {
  return j.contains(key) ? j.at(key).get<bool>() : def;
}

std::string resolve_path(const std::string& base_dir, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_absolute() || base_dir.empty()) return rel;
  return (std::filesystem::path(base_dir) / p).string();
}

template <typename SourceT, typename ParseFn>
void parse_source(const json& data, const char* key, const std::string& base_dir, SourceT& out,
                  ParseFn parse_spec) {
  if (!data.contains(key)) return;
  const json& j = data.at(key);
  if (j.contains("csv")) {
    out.use_csv = true;
    out.csv = resolve_path(base_dir, j.at("csv").get<std::string>());
    if (!std::filesystem::exists(out.csv))
      fail(std::string("data.") + key + ".csv", "references a missing file: " + out.csv);
  } else if (j.contains("synthetic")) {
    out.use_csv = false;
    out.synthetic = parse_spec(j.at("synthetic"), std::string("data.") + key + ".synthetic.");
  } else {
    fail(std::string("data.") + key, "must contain either 'csv' or 'synthetic'");
  }
}

}  // namespace

ScenarioConfig parse_scenario_json(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario: invalid JSON: ") + e.what());
  }

  ScenarioConfig c;
  if (!j.contains("seed")) fail("seed", "is required");
  if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
    fail("seed", "must be a nonnegative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  const json time = j.value("time", json::object());
  c.grid.step_minutes = int_in(time, "time.", "step_minutes", 15, 1, 24 * 60);
  if ((24 * 60) % c.grid.step_minutes != 0) fail("time.step_minutes", "must divide 24 hours");
  c.grid.horizon_steps = int_in(time, "time.", "horizon_steps", (24 * 60) / c.grid.step_minutes,
                                2, 4 * (24 * 60) / c.grid.step_minutes);
  c.sim_days = int_in(time, "time.", "sim_days", 3, 1, 365);
  c.history_days = int_in(time, "time.", "history_days", 5, 2, 60);
  c.grid.sim_steps = c.sim_days * c.grid.period_steps();
  if (time.contains("origin"))
    c.grid.origin_unix = parse_iso8601(time.at("origin").get<std::string>());
  else
    c.grid.origin_unix = parse_iso8601("2013-05-18T00:00:00");

  c.mode = parse_run_mode(j.value("mode", std::string("admm")));
  c.pcc_limit_kw = num_in(j, "", "pcc_limit_kw", 200.0, 1e-6, 1e9);
  c.beta = num_in(j, "", "beta_min_load_frac", 0.5, 0.0, 1.0);

  const json data = j.value("data", json::object());
  parse_source(data, "pv", base_dir, c.pv, [](const json& s, const std::string& p) {
    SyntheticPVSpec out;
    out.peak_kw = num_in(s, p, "peak_kw", out.peak_kw, 0.0, 1e9);
    out.sunrise_hour = num_in(s, p, "sunrise_hour", out.sunrise_hour, 0.0, 12.0);
    out.sunset_hour = num_in(s, p, "sunset_hour", out.sunset_hour, 12.0, 24.0);
    out.noise_frac = num_in(s, p, "noise_frac", out.noise_frac, 0.0, 1.0);
    out.cloud_dips_per_day = num_in(s, p, "cloud_dips_per_day", out.cloud_dips_per_day, 0.0, 50.0);
    out.dip_depth_min = num_in(s, p, "dip_depth_min", out.dip_depth_min, 0.0, 1.0);
    out.dip_depth_max = num_in(s, p, "dip_depth_max", out.dip_depth_max, out.dip_depth_min, 1.0);
    out.dip_len_min = int_in(s, p, "dip_len_min", out.dip_len_min, 1, 500);
    out.dip_len_max = int_in(s, p, "dip_len_max", out.dip_len_max, out.dip_len_min, 500);
    out.clearness_min = num_in(s, p, "clearness_min", out.clearness_min, 0.0, 1.0);
    out.clearness_max = num_in(s, p, "clearness_max", out.clearness_max, out.clearness_min, 1.0);
    return out;
  });
  parse_source(data, "load", base_dir, c.load, [](const json& s, const std::string& p) {
    SyntheticLoadSpec out;
    out.base_kw = num_in(s, p, "base_kw", out.base_kw, 0.0, 1e9);
    out.peak_kw = num_in(s, p, "peak_kw", out.peak_kw, out.base_kw, 1e9);
    out.morning_hour = num_in(s, p, "morning_hour", out.morning_hour, 0.0, 24.0);
    out.morning_width_hours =
        num_in(s, p, "morning_width_hours", out.morning_width_hours, 0.1, 12.0);
    out.afternoon_hour = num_in(s, p, "afternoon_hour", out.afternoon_hour, 0.0, 24.0);
    out.afternoon_width_hours =
        num_in(s, p, "afternoon_width_hours", out.afternoon_width_hours, 0.1, 12.0);
    out.noise_frac = num_in(s, p, "noise_frac", out.noise_frac, 0.0, 1.0);
    return out;
  });
  parse_source(data, "price", base_dir, c.price, [](const json& s, const std::string& p) {
    SyntheticPriceSpec out;
    out.off_peak = num_in(s, p, "off_peak", out.off_peak, -10.0, 10.0);
    out.shoulder = num_in(s, p, "shoulder", out.shoulder, -10.0, 10.0);
    out.peak = num_in(s, p, "peak", out.peak, -10.0, 10.0);
    out.peak_hour = num_in(s, p, "peak_hour", out.peak_hour, 16.5, 20.5);
    out.day_jitter_frac = num_in(s, p, "day_jitter_frac", out.day_jitter_frac, 0.0, 1.0);
    return out;
  });

  const json bes = j.value("bes", json::object());
  c.bes.params.c_max = num_in(bes, "bes.", "c_max_kw", 500.0, 0.0, 1e9);
  c.bes.params.d_max = num_in(bes, "bes.", "d_max_kw", 500.0, 0.0, 1e9);
  c.bes.params.eta_c = num_in(bes, "bes.", "eta_c", 0.85, 1e-6, 1.0);
  c.bes.params.eta_d = num_in(bes, "bes.", "eta_d", 0.85, 1e-6, 1.0);
  c.bes.params.eta_q = num_in(bes, "bes.", "eta_q", 0.99, 1e-6, 1.0);
  c.bes.params.q_min_frac = num_in(bes, "bes.", "q_min_frac", 0.20, 0.0, 1.0);
  c.bes.params.q_max_frac = num_in(bes, "bes.", "q_max_frac", 0.90, c.bes.params.q_min_frac, 1.0);
  c.bes.params.q_cap = num_in(bes, "bes.", "q_cap_kwh", 3000.0, 1e-6, 1e9);
  c.bes.params.alpha_cyc = num_in(bes, "bes.", "alpha_cyc", 0.01, 0.0, 1e9);
  c.bes.q_init_frac = num_in(bes, "bes.", "q_init_frac", 0.5, c.bes.params.q_min_frac,
                             c.bes.params.q_max_frac);
  c.bes.q_final_frac = num_in(bes, "bes.", "q_final_frac", 0.5, c.bes.params.q_min_frac,
                              c.bes.params.q_max_frac);

  const json ev = j.value("ev_fleet", json::object());
  c.ev.count = int_in(ev, "ev_fleet.", "count", 20, 0, 10000);
  c.ev.charger_kw = num_in(ev, "ev_fleet.", "charger_kw", 7.2, 0.0, 1e6);
  c.ev.eta_c = num_in(ev, "ev_fleet.", "eta_c", 0.9, 1e-6, 1.0);
  c.ev.eta_d = num_in(ev, "ev_fleet.", "eta_d", 0.9, 1e-6, 1.0);
  c.ev.eta_q = num_in(ev, "ev_fleet.", "eta_q", 1.0, 1e-6, 1.0);
  c.ev.q_min_frac = num_in(ev, "ev_fleet.", "q_min_frac", 0.30, 0.0, 1.0);
  c.ev.q_max_frac = num_in(ev, "ev_fleet.", "q_max_frac", 0.90, c.ev.q_min_frac, 1.0);
  c.ev.alpha_cyc = num_in(ev, "ev_fleet.", "alpha_cyc", 0.01, 0.0, 1e9);
  c.ev.alpha_des = num_in(ev, "ev_fleet.", "alpha_des", 1.0, 1e-6, 1.0);
  if (ev.contains("trip_miles")) {
    for (const auto& m : ev.at("trip_miles")) c.ev.trip_miles.push_back(m.get<double>());
    if (static_cast<int>(c.ev.trip_miles.size()) != c.ev.count)
      fail("ev_fleet.trip_miles", "must list one value per vehicle");
    for (double m : c.ev.trip_miles)
      if (!(m > 0)) fail("ev_fleet.trip_miles", "entries must be positive");
  } else {
    c.ev.trip_miles_min = num_in(ev, "ev_fleet.", "trip_miles_min", 15.0, 0.1, 1e4);
    c.ev.trip_miles_max =
        num_in(ev, "ev_fleet.", "trip_miles_max", 60.0, c.ev.trip_miles_min, 1e4);
  }
  c.ev.arrival_mean_hour = num_in(ev, "ev_fleet.", "arrival_mean_hour", 8.0, 0.0, 24.0);
  c.ev.arrival_std_hours = num_in(ev, "ev_fleet.", "arrival_std_hours", 0.5, 0.0, 6.0);
  c.ev.departure_mean_hour = num_in(ev, "ev_fleet.", "departure_mean_hour", 17.0, 0.0, 24.0);
  c.ev.departure_std_hours = num_in(ev, "ev_fleet.", "departure_std_hours", 0.75, 0.0, 6.0);
  c.ev.min_window_hours = num_in(ev, "ev_fleet.", "min_window_hours", 3.5, 0.5, 24.0);
  c.ev.init_frac_min = num_in(ev, "ev_fleet.", "init_frac_min", 0.30, 0.0, 1.0);
  c.ev.init_frac_max = num_in(ev, "ev_fleet.", "init_frac_max", 0.55, c.ev.init_frac_min, 1.0);
  c.ev.des_frac_min = num_in(ev, "ev_fleet.", "des_frac_min", 0.50, 0.0, 1.0);
  c.ev.des_frac_max = num_in(ev, "ev_fleet.", "des_frac_max", 0.80, c.ev.des_frac_min, 1.0);

  const json w = j.value("weights", json::object());
  c.weights.alpha_load = num_in(w, "weights.", "alpha_load", 0.1, 0.0, 1e9);
  c.weights.alpha_pv = num_in(w, "weights.", "alpha_pv", 0.1, 0.0, 1e9);
  c.weights.alpha_range = num_in(w, "weights.", "alpha_range", 0.05, 0.0, 1e9);
  c.weights.alpha_diff = num_in(w, "weights.", "alpha_diff", 0.02, 0.0, 1e9);
  c.weights.alpha_curv = num_in(w, "weights.", "alpha_curv", 0.005, 0.0, 1e9);
  c.weights.alpha_prev = num_in(w, "weights.", "alpha_prev", 0.1, 0.0, 1e9);
  c.weights.alpha_cyc_bes = c.bes.params.alpha_cyc;
  c.weights.alpha_cyc_ev.assign(static_cast<std::size_t>(c.ev.count), c.ev.alpha_cyc);
  c.weights.alpha_des.assign(static_cast<std::size_t>(c.ev.count), c.ev.alpha_des);

  const json fc = j.value("forecast", json::object());
  c.forecast.ar_order = int_in(fc, "forecast.", "ar_order", 4, 1, 96);
  c.forecast.decay = num_in(fc, "forecast.", "decay", 0.7, 1e-9, 1.0 - 1e-9);
  c.forecast.gamma_asym_pv = num_in(fc, "forecast.", "gamma_asym_pv", 9.0, 0.0, 1e6);
  c.forecast.gamma_asym_load = num_in(fc, "forecast.", "gamma_asym_load", 1.0, 0.0, 1e6);
  c.forecast.gamma_curv = num_in(fc, "forecast.", "gamma_curv", 0.1, 0.0, 1e9);

  const json admm = j.value("admm", json::object());
  c.admm.rho = num_in(admm, "admm.", "rho", 1.0, 1e-9, 1e9);
  c.weights.rho = c.admm.rho;
  c.admm.eps_pri = num_in(admm, "admm.", "eps_pri", -1.0, -1.0, 1e9);
  c.admm.eps_dual = num_in(admm, "admm.", "eps_dual", -1.0, -1.0, 1e9);
  c.admm.max_iter = int_in(admm, "admm.", "max_iter", 2000, 1, 1000000);
  c.admm.parallelism = int_in(admm, "admm.", "parallelism", 0, 0, 1024);
  c.admm.rho_adapt.enabled = bool_or(admm, "rho_adapt", false);

  const json qps = j.value("qp", json::object());
  c.qp_settings.eps_abs = num_in(qps, "qp.", "eps_abs", 1e-6, 1e-12, 1.0);
  c.qp_settings.eps_rel = num_in(qps, "qp.", "eps_rel", 1e-4, 0.0, 1.0);
  c.qp_settings.max_iter = int_in(qps, "qp.", "max_iter", 20000, 10, 10000000);

  c.grid.validate();
  c.weights.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_json(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["time"] = {{"step_minutes", c.grid.step_minutes},
               {"horizon_steps", c.grid.horizon_steps},
               {"sim_days", c.sim_days},
               {"history_days", c.history_days},
               {"origin", format_iso8601(c.grid.origin_unix)}};
  j["mode"] = to_string(c.mode);
  j["pcc_limit_kw"] = c.pcc_limit_kw;
  j["beta_min_load_frac"] = c.beta;

  auto pv = json::object();
  if (c.pv.use_csv) {
    pv["csv"] = c.pv.csv;
  } else {
    const auto& s = c.pv.synthetic;
    pv["synthetic"] = {{"peak_kw", s.peak_kw},
                       {"sunrise_hour", s.sunrise_hour},
                       {"sunset_hour", s.sunset_hour},
                       {"noise_frac", s.noise_frac},
                       {"cloud_dips_per_day", s.cloud_dips_per_day},
                       {"dip_depth_min", s.dip_depth_min},
                       {"dip_depth_max", s.dip_depth_max},
                       {"dip_len_min", s.dip_len_min},
                       {"dip_len_max", s.dip_len_max},
                       {"clearness_min", s.clearness_min},
                       {"clearness_max", s.clearness_max}};
  }
  auto load = json::object();
  if (c.load.use_csv) {
    load["csv"] = c.load.csv;
  } else {
    const auto& s = c.load.synthetic;
    load["synthetic"] = {{"base_kw", s.base_kw},
                         {"peak_kw", s.peak_kw},
                         {"morning_hour", s.morning_hour},
                         {"morning_width_hours", s.morning_width_hours},
                         {"afternoon_hour", s.afternoon_hour},
                         {"afternoon_width_hours", s.afternoon_width_hours},
                         {"noise_frac", s.noise_frac}};
  }
  auto price = json::object();
  if (c.price.use_csv) {
    price["csv"] = c.price.csv;
  } else {
    const auto& s = c.price.synthetic;
    price["synthetic"] = {{"off_peak", s.off_peak},
                          {"shoulder", s.shoulder},
                          {"peak", s.peak},
                          {"peak_hour", s.peak_hour},
                          {"day_jitter_frac", s.day_jitter_frac}};
  }
  j["data"] = {{"pv", pv}, {"load", load}, {"price", price}};

  j["bes"] = {{"c_max_kw", c.bes.params.c_max},
              {"d_max_kw", c.bes.params.d_max},
              {"eta_c", c.bes.params.eta_c},
              {"eta_d", c.bes.params.eta_d},
              {"eta_q", c.bes.params.eta_q},
              {"q_min_frac", c.bes.params.q_min_frac},
              {"q_max_frac", c.bes.params.q_max_frac},
              {"q_cap_kwh", c.bes.params.q_cap},
              {"alpha_cyc", c.bes.params.alpha_cyc},
              {"q_init_frac", c.bes.q_init_frac},
              {"q_final_frac", c.bes.q_final_frac}};

  json ev = {{"count", c.ev.count},
             {"charger_kw", c.ev.charger_kw},
             {"eta_c", c.ev.eta_c},
             {"eta_d", c.ev.eta_d},
             {"eta_q", c.ev.eta_q},
             {"q_min_frac", c.ev.q_min_frac},
             {"q_max_frac", c.ev.q_max_frac},
             {"alpha_cyc", c.ev.alpha_cyc},
             {"alpha_des", c.ev.alpha_des},
             {"arrival_mean_hour", c.ev.arrival_mean_hour},
             {"arrival_std_hours", c.ev.arrival_std_hours},
             {"departure_mean_hour", c.ev.departure_mean_hour},
             {"departure_std_hours", c.ev.departure_std_hours},
             {"min_window_hours", c.ev.min_window_hours},
             {"init_frac_min", c.ev.init_frac_min},
             {"init_frac_max", c.ev.init_frac_max},
             {"des_frac_min", c.ev.des_frac_min},
             {"des_frac_max", c.ev.des_frac_max}};
  if (!c.ev.trip_miles.empty())
    ev["trip_miles"] = c.ev.trip_miles;
  else {
    ev["trip_miles_min"] = c.ev.trip_miles_min;
    ev["trip_miles_max"] = c.ev.trip_miles_max;
  }
  j["ev_fleet"] = ev;

  j["weights"] = {{"alpha_load", c.weights.alpha_load},
                  {"alpha_pv", c.weights.alpha_pv},
                  {"alpha_range", c.weights.alpha_range},
                  {"alpha_diff", c.weights.alpha_diff},
                  {"alpha_curv", c.weights.alpha_curv},
                  {"alpha_prev", c.weights.alpha_prev}};
  j["forecast"] = {{"ar_order", c.forecast.ar_order},
                   {"decay", c.forecast.decay},
                   {"gamma_asym_pv", c.forecast.gamma_asym_pv},
                   {"gamma_asym_load", c.forecast.gamma_asym_load},
                   {"gamma_curv", c.forecast.gamma_curv}};
  j["admm"] = {{"rho", c.admm.rho},
               {"eps_pri", c.admm.eps_pri},
               {"eps_dual", c.admm.eps_dual},
               {"max_iter", c.admm.max_iter},
               {"parallelism", c.admm.parallelism},
               {"rho_adapt", c.admm.rho_adapt.enabled}};
  j["qp"] = {{"eps_abs", c.qp_settings.eps_abs},
             {"eps_rel", c.qp_settings.eps_rel},
             {"max_iter", c.qp_settings.max_iter}};
  return j.dump(2);
}

void save_scenario(const ScenarioConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << scenario_to_json(config) << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic data generation

namespace {

int poisson_draw(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  int k = 0;
  double prod = rng.uniform();
  while (prod > limit && k < 1000) {
    ++k;
    prod *= rng.uniform();
  }
  return k;
}

Vec generate_pv(const SyntheticPVSpec& s, int total_steps, int period, double dt_hours, Rng rng) {
  Vec out = Vec::Zero(total_steps);
  const int days = (total_steps + period - 1) / period;
  std::vector<double> clearness(static_cast<std::size_t>(days));
  Vec dip = Vec::Ones(total_steps);
  for (int d = 0; d < days; ++d) {
    clearness[static_cast<std::size_t>(d)] = rng.uniform(s.clearness_min, s.clearness_max);
    const int n_dips = poisson_draw(rng, s.cloud_dips_per_day);
    for (int e = 0; e < n_dips; ++e) {
      const double start_h = rng.uniform(s.sunrise_hour, s.sunset_hour);
      const int start = d * period + static_cast<int>(start_h / dt_hours);
      const int len = rng.uniform_int(s.dip_len_min, s.dip_len_max);
      const double depth = rng.uniform(s.dip_depth_min, s.dip_depth_max);
      for (int k = start; k < std::min(start + len, total_steps); ++k)
        dip[k] = std::min(dip[k], 1.0 - depth);
    }
  }
  double noise = 0.0;
  for (int k = 0; k < total_steps; ++k) {
    const int day = k / period;
    const double hour = (k % period) * dt_hours;
    double insol = 0.0;
    if (hour >= s.sunrise_hour && hour <= s.sunset_hour) {
      const double phase = (hour - s.sunrise_hour) / (s.sunset_hour - s.sunrise_hour);
      insol = std::pow(std::max(0.0, std::sin(M_PI * phase)), 1.3);
    }
    noise = 0.95 * noise + rng.normal(0.0, s.noise_frac);
    const double value = s.peak_kw * insol * clearness[static_cast<std::size_t>(day)] *
                         std::max(0.0, 1.0 + noise) * dip[k];
    out[k] = -value;  // generation is negative
  }
  return out;
}

Vec generate_load(const SyntheticLoadSpec& s, int total_steps, int period, double dt_hours,
                  Rng rng) {
  Vec out(total_steps);
  double noise = 0.0;
  for (int k = 0; k < total_steps; ++k) {
    const double hour = (k % period) * dt_hours;
    const double g1 = std::exp(-std::pow((hour - s.morning_hour) / s.morning_width_hours, 2));
    const double g2 = std::exp(-std::pow((hour - s.afternoon_hour) / s.afternoon_width_hours, 2));
    const double shape = std::min(1.0, g1 + g2);
    noise = 0.9 * noise + rng.normal(0.0, s.noise_frac);
    out[k] =
        std::max(0.0, (s.base_kw + (s.peak_kw - s.base_kw) * shape) * std::max(0.0, 1.0 + noise));
  }
  return out;
}

Vec generate_price(const SyntheticPriceSpec& s, int total_steps, int period, double dt_hours,
                   Rng rng) {
  Vec out(total_steps);
  const int days = (total_steps + period - 1) / period;
  std::vector<double> jitter(static_cast<std::size_t>(days));
  for (int d = 0; d < days; ++d)
    jitter[static_cast<std::size_t>(d)] = 1.0 + rng.uniform(-s.day_jitter_frac, s.day_jitter_frac);

  auto hourly = [&](double hour) {
    if (hour < 6.0) return s.off_peak;
    if (hour < 9.0) return s.off_peak + (s.shoulder - s.off_peak) * (hour - 6.0) / 3.0;
    if (hour < 16.0) return s.shoulder;
    if (hour < s.peak_hour)
      return s.shoulder + (s.peak - s.shoulder) * (hour - 16.0) / std::max(0.5, s.peak_hour - 16.0);
    if (hour < 21.0)
      return s.peak + (s.shoulder - s.peak) * (hour - s.peak_hour) / std::max(0.5, 21.0 - s.peak_hour);
    return s.off_peak + (s.shoulder - s.off_peak) * (24.0 - hour) / 3.0;
  };

  for (int k = 0; k < total_steps; ++k) {
    const int day = k / period;
    const double hour = std::floor((k % period) * dt_hours);  // hourly step-hold
    out[k] = hourly(hour) * jitter[static_cast<std::size_t>(day)];
  }
  return out;
}

Vec ingest_csv(const std::string& path, const TimeGrid& grid, int total_steps, bool nonpositive,
               bool nonnegative) {
  TimeSeries ts = read_series_csv(path);
  if (ts.step_minutes != grid.step_minutes)
    throw std::invalid_argument(path + ": step spacing " + std::to_string(ts.step_minutes) +
                                " min does not match the scenario grid");
  if (ts.values.size() < total_steps)
    throw std::invalid_argument(path + ": need at least " + std::to_string(total_steps) +
                                " samples, found " + std::to_string(ts.values.size()));
  Vec out = ts.values.head(total_steps);
  for (int k = 0; k < total_steps; ++k) {
    if (nonpositive && out[k] > 0.0)
      throw std::invalid_argument(path + ": generation values must be <= 0");
    if (nonnegative && out[k] < 0.0)
      throw std::invalid_argument(path + ": values must be >= 0");
  }
  return out;
}

}  // namespace

FleetSample sample_fleet(const EVFleetConfig& spec, int days, int period_steps, double dt_hours,
                         std::uint64_t seed) {
  FleetSample out;
  Rng root(seed);
  const double steps_per_hour = 1.0 / dt_hours;
  for (int i = 0; i < spec.count; ++i) {
    Rng rng = root.fork(static_cast<std::uint64_t>(i) + 1000);
    const double miles = spec.trip_miles.empty()
                             ? rng.uniform(spec.trip_miles_min, spec.trip_miles_max)
                             : spec.trip_miles[static_cast<std::size_t>(i)];
    StorageParams params;
    params.c_max = spec.charger_kw;
    params.d_max = spec.charger_kw;
    params.eta_c = spec.eta_c;
    params.eta_d = spec.eta_d;
    params.eta_q = spec.eta_q;
    params.q_min_frac = spec.q_min_frac;
    params.q_max_frac = spec.q_max_frac;
    params.q_cap = size_ev_battery(miles);
    params.alpha_cyc = spec.alpha_cyc;
    out.batteries.push_back(params);

    char name[16];
    std::snprintf(name, sizeof(name), "ev%02d", i);
    out.names.emplace_back(name);

    std::vector<EvObservation> vehicle_days;
    vehicle_days.reserve(static_cast<std::size_t>(days));
    for (int d = 0; d < days; ++d) {
      EvObservation o;
      const double arr_h =
          std::clamp(rng.normal(spec.arrival_mean_hour, spec.arrival_std_hours), 0.5, 23.0);
      const double min_dep = arr_h + spec.min_window_hours;
      const double dep_h = std::clamp(
          rng.normal(spec.departure_mean_hour, spec.departure_std_hours), min_dep, 23.5);
      o.t_arr = static_cast<int>(std::lround(arr_h * steps_per_hour));
      o.t_dep = static_cast<int>(std::lround(dep_h * steps_per_hour));
      o.t_dep = std::min(o.t_dep, period_steps - 1);
      o.t_arr = std::max(0, std::min(o.t_arr, o.t_dep - 1));
      o.q_init = std::clamp(rng.uniform(spec.init_frac_min, spec.init_frac_max) * params.q_cap,
                            spec.q_min_frac * params.q_cap, spec.q_max_frac * params.q_cap);
      o.q_des = std::clamp(rng.uniform(spec.des_frac_min, spec.des_frac_max) * params.q_cap,
                           spec.q_min_frac * params.q_cap, spec.q_max_frac * params.q_cap);
      vehicle_days.push_back(o);
    }
    out.days.push_back(std::move(vehicle_days));
  }
  return out;
}

Scenario materialize(const ScenarioConfig& config) {
  Scenario s;
  s.config = config;
  s.period = config.grid.period_steps();
  s.hist_steps = config.history_days * s.period;
  s.sim_steps = config.grid.sim_steps;
  const int total = s.hist_steps + s.sim_steps;
  const double dt = config.grid.dt_hours();

  Rng root(config.seed);
  if (config.pv.use_csv)
    s.pv_actual = ingest_csv(config.pv.csv, config.grid, total, true, false);
  else
    s.pv_actual = generate_pv(config.pv.synthetic, total, s.period, dt, root.fork(1));

  if (config.load.use_csv)
    s.load_actual = ingest_csv(config.load.csv, config.grid, total, false, true);
  else
    s.load_actual = generate_load(config.load.synthetic, total, s.period, dt, root.fork(2));

  if (config.price.use_csv) {
    TimeSeries ts = read_series_csv(config.price.csv);
    if (ts.step_minutes != config.grid.step_minutes)
      throw std::invalid_argument(config.price.csv + ": step spacing does not match the grid");
    if (ts.values.size() < total)
      throw std::invalid_argument(config.price.csv + ": too few samples");
    s.price = ts.values.head(total);
  } else {
    s.price = generate_price(config.price.synthetic, total, s.period, dt, root.fork(3));
  }

  s.fleet = sample_fleet(config.ev, config.history_days + config.sim_days, s.period, dt,
                         config.seed);
  return s;
}

}  // namespace microgrid
