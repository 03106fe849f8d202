#include "microgrid/mpc.hpp"

#include "microgrid/exchange.hpp"
#include "microgrid/forecast.hpp"
#include "microgrid/reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace microgrid {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PowerSchedule shift_forward(const PowerSchedule& p, int new_len) {
  PowerSchedule out(new_len);
  const int n = static_cast<int>(p.size());
  for (int k = 0; k < new_len; ++k) {
    const int src = k + 1;
    out[k] = src < n ? p[src] : (n > 0 ? p[n - 1] : 0.0);
  }
  return out;
}

struct EvSession {
  bool active = false;            // has a window overlapping the remaining day
  bool arrived = false;           // actual arrival already happened today
  StorageWindow window;           // relative to the current MPC window
  double required = 0.0;          // alpha_des * q_des target used in the plan
};

class Engine {
 public:
  Engine(const Scenario& sc, RunMode mode)
      : sc_(sc),
        mode_(mode),
        dt_(sc.config.grid.dt_hours()),
        period_(sc.period),
        n_ev_(static_cast<int>(sc.fleet.batteries.size())),
        pv_hist_(sc.hist_steps),
        load_hist_(sc.hist_steps),
        load_agent_("load", sc.config.beta, sc.config.weights.alpha_load),
        pv_agent_("pv", sc.config.weights.alpha_pv),
        bes_agent_("bes", sc.config.bes.params, sc.config.qp_settings),
        grid_agent_("grid", sc.config.pcc_limit_kw, sc.config.weights.alpha_range,
                    sc.config.weights.alpha_diff, sc.config.weights.alpha_curv,
                    sc.config.qp_settings) {
    estimate_cache_.assign(static_cast<std::size_t>(n_ev_), {});
    for (int i = 0; i < n_ev_; ++i) {
      ev_agents_.push_back(std::make_unique<StorageAgent>(
          sc.fleet.names[static_cast<std::size_t>(i)],
          sc.fleet.batteries[static_cast<std::size_t>(i)], sc.config.qp_settings));
    }
    for (int k = 0; k < sc.hist_steps; ++k) {
      pv_hist_.append(k, -sc.pv_actual[k]);  // magnitudes
      load_hist_.append(k, sc.load_actual[k]);
    }
  }

  SimulationResult run() {
    const int steps = sc_.sim_steps;
    SimulationResult res;
    res.mode = mode_;
    res.sim_steps = steps;
    res.dt_hours = dt_;
    res.load.resize(steps);
    res.pv.resize(steps);
    res.bes.resize(steps);
    res.grid.resize(steps);
    res.ev.assign(static_cast<std::size_t>(n_ev_), PowerSchedule::Zero(steps));
    res.q_bes.resize(steps + 1);
    res.q_ev.assign(static_cast<std::size_t>(n_ev_), ChargeTrajectory::Zero(steps + 1));
    res.ev_present.assign(static_cast<std::size_t>(n_ev_),
                          std::vector<bool>(static_cast<std::size_t>(steps), false));
    res.load_desired = sc_.load_actual.segment(sc_.hist_steps, steps);
    res.pv_available = sc_.pv_actual.segment(sc_.hist_steps, steps);
    res.price = sc_.price.segment(sc_.hist_steps, steps);

    q_bes_ = sc_.config.bes.q_init_frac * sc_.config.bes.params.q_cap;
    res.q_bes[0] = q_bes_;
    q_ev_.assign(static_cast<std::size_t>(n_ev_), 0.0);
    for (int i = 0; i < n_ev_; ++i)
      res.q_ev[static_cast<std::size_t>(i)][0] = 0.0;

    for (int t = 0; t < steps; ++t) step(t, res);
    return res;
  }

 private:
  // -------------------------------------------------------------------- //

  void step(int t, SimulationResult& res) {
    const auto t0 = std::chrono::steady_clock::now();
    const int abs_t = sc_.hist_steps + t;
    const int h = std::min(sc_.config.grid.horizon_steps, sc_.sim_steps - t);
    const int day = abs_t / period_;
    const int day_rel = abs_t % period_;
    const int sim_day = t / period_;

    // (1) forecasts from histories through t-1 (prescient: actual futures)
    PowerSchedule load_fc(h), pv_fc(h);
    if (mode_ == RunMode::Prescient) {
      load_fc = sc_.load_actual.segment(abs_t, h);
      pv_fc = sc_.pv_actual.segment(abs_t, h);
    } else {
      const auto& fc = sc_.config.forecast;
      auto pv_model = fit_model(pv_hist_, fc.gamma_asym_pv, fc.gamma_curv, period_, fc.ar_order,
                                fc.decay);
      auto load_model = fit_model(load_hist_, fc.gamma_asym_load, fc.gamma_curv, period_,
                                  fc.ar_order, fc.decay);
      pv_fc = -predict(pv_model, pv_hist_, h);  // sign restored, clamped <= 0
      load_fc = predict(load_model, load_hist_, h);
    }

    // (2) EV parameter estimates (cached per day; observed once arrived)
    std::vector<EvSession> sessions(static_cast<std::size_t>(n_ev_));
    for (int i = 0; i < n_ev_; ++i)
      sessions[static_cast<std::size_t>(i)] = ev_session(i, day, day_rel, abs_t, h, t);

    // (3) assemble agents over [t, t+h)
    load_agent_.begin_step(load_fc, damping_for("load", h));
    pv_agent_.begin_step(pv_fc, damping_for("pv", h));

    StorageWindow bes_window;
    bes_window.horizon = h;
    bes_window.dt_hours = dt_;
    bes_window.q_init = q_bes_;
    bes_window.avail_start = 0;
    bes_window.avail_end = h;
    bes_window.q_final = sc_.config.bes.q_final_frac * sc_.config.bes.params.q_cap;
    bes_agent_.begin_step(bes_window, damping_for("bes", h));

    grid_agent_.begin_step(sc_.price.segment(abs_t, h), dt_, damping_for("grid", h));

    std::vector<Agent*> agents = {&load_agent_, &pv_agent_, &bes_agent_};
    for (int i = 0; i < n_ev_; ++i) {
      auto& s = sessions[static_cast<std::size_t>(i)];
      if (!s.active) continue;
      auto* agent = ev_agents_[static_cast<std::size_t>(i)].get();
      agent->begin_step(s.window, damping_for(agent->name(), h));
      if (agent->requirement_relaxed()) {
        res.events.push_back({t, "ev_requirement_relaxed", agent->name(),
                              agent->planned_shortfall()});
      }
      agents.push_back(agent);
    }
    agents.push_back(&grid_agent_);

    // (4) solve
    StepStats stats;
    stats.step = t;
    std::map<std::string, AgentPlan> plans;
    if (mode_ == RunMode::Admm) {
      ExchangeSettings settings = sc_.config.admm;
      std::optional<ExchangeState> init = warm_start_state(agents, h);
      auto out = run_exchange(agents, std::move(init), settings);
      if (out.status == ExchangeStatus::MaxIterations)
        res.events.push_back({t, "exchange_max_iterations", "", 0.0});
      stats.iterations = out.state.k;
      if (!out.state.residual_history.empty()) {
        stats.r_norm = out.state.residual_history.back().first;
        stats.s_norm = out.state.residual_history.back().second;
      }
      for (std::size_t i = 0; i < agents.size(); ++i) {
        AgentPlan plan = agents[i]->last_plan();
        plan.p = out.state.p[i];  // authoritative final iterate
        plans[agents[i]->name()] = std::move(plan);
      }
      u_prev_ = out.state.u;
      have_u_ = true;
    } else {
      auto sol = solve_centralized_step(agents);
      stats.iterations = sol.raw.iterations;
      for (std::size_t i = 0; i < agents.size(); ++i)
        plans[agents[i]->name()] = std::move(sol.plans[i]);
    }

    double plan_cost = 0.0;
    for (Agent* a : agents) plan_cost += a->local_cost(plans[a->name()].p);
    stats.plan_cost = plan_cost;

    // (5) execute the first step against actuals
    execute_first_step(t, abs_t, day, day_rel, sim_day, h, load_fc, pv_fc, sessions, plans, res);

    // (7) histories absorb the realized availability
    pv_hist_.append(abs_t, -sc_.pv_actual[abs_t]);
    load_hist_.append(abs_t, sc_.load_actual[abs_t]);

    // stash plans for damping and warm starts
    prev_plans_.clear();
    for (Agent* a : agents) prev_plans_[a->name()] = plans[a->name()].p;
    prev_h_ = h;

    stats.solve_seconds = seconds_since(t0);
    res.stats.push_back(stats);
  }

  // -------------------------------------------------------------------- //

  EvSession ev_session(int i, int day, int day_rel, int abs_t, int h, int t) {
    EvSession s;
    const auto& days = sc_.fleet.days[static_cast<std::size_t>(i)];
    const auto& actual = days[static_cast<std::size_t>(day)];
    const auto& params = sc_.fleet.batteries[static_cast<std::size_t>(i)];
    const double alpha_des = sc_.config.ev.alpha_des;

    if (day_rel >= actual.t_dep) return s;  // departed for the day

    s.arrived = day_rel >= actual.t_arr;
    EVParamEstimate est;
    if (mode_ == RunMode::Prescient || s.arrived) {
      est = estimate_ev_params({}, params, actual);
    } else {
      est = daily_estimate(i, day);
    }

    const int arr_abs = day * period_ + std::max(est.t_arr, 0);
    const int dep_abs = day * period_ + est.t_dep;
    if (dep_abs <= abs_t) return s;  // prediction says the session is over

    s.window.horizon = h;
    s.window.dt_hours = dt_;
    s.window.avail_start = std::max(0, arr_abs - abs_t);
    s.window.avail_end = std::clamp(dep_abs - abs_t, 0, h);
    if (s.window.avail_end <= s.window.avail_start && !s.arrived) return s;

    s.window.q_init = s.arrived ? q_ev_[static_cast<std::size_t>(i)] : est.q_init;
    s.required = alpha_des * est.q_des;
    s.window.departure = StorageWindow::DepartureReq{s.window.avail_end, s.required};
    s.active = true;
    (void)t;
    return s;
  }

  EVParamEstimate daily_estimate(int i, int day) {
    auto& slot = estimate_cache_[static_cast<std::size_t>(i)];
    if (!slot || slot->first != day) {
      const auto& days = sc_.fleet.days[static_cast<std::size_t>(i)];
      std::vector<EvObservation> history(days.begin(),
                                         days.begin() + static_cast<std::ptrdiff_t>(day));
      auto est = estimate_ev_params(history, sc_.fleet.batteries[static_cast<std::size_t>(i)]);
      slot = {day, est};
    }
    return slot->second;
  }

  std::optional<DampingTarget> damping_for(const std::string& name, int h) {
    const double alpha = sc_.config.weights.alpha_prev;
    auto it = prev_plans_.find(name);
    if (alpha <= 0.0 || it == prev_plans_.end()) return {};
    const PowerSchedule& prev = it->second;
    DampingTarget d;
    d.target = PowerSchedule::Zero(h);
    d.weight = Vec::Zero(h);
    const int n = static_cast<int>(prev.size());
    for (int k = 0; k < h; ++k) {
      const int src = k + 1;  // previous plan is one step older
      if (src < n) {
        d.target[k] = prev[src];
        d.weight[k] = alpha;
      }
    }
    return d;
  }

  std::optional<ExchangeState> warm_start_state(const std::vector<Agent*>& agents, int h) {
    if (!have_u_) return {};
    ExchangeState init;
    init.p.reserve(agents.size());
    for (Agent* a : agents) {
      auto it = prev_plans_.find(a->name());
      init.p.push_back(it != prev_plans_.end() ? shift_forward(it->second, h)
                                               : PowerSchedule::Zero(h));
    }
    init.u = shift_forward(u_prev_, h);
    return init;
  }

  CentralizedSolution solve_centralized_step(const std::vector<Agent*>& agents) {
    auto stacked = assemble_stacked(agents);
    qp::SolverSettings settings = sc_.config.qp_settings;
    central_solver_.refresh(stacked.qp, settings);
    auto raw = central_solver_.solve();
    if (raw.status == qp::SolveStatus::Infeasible)
      throw std::runtime_error("centralized solve infeasible");
    CentralizedSolution out;
    out.raw = std::move(raw);
    out.plans.reserve(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
      out.plans.push_back(agents[i]->plan_from(
          out.raw.x.segment(stacked.offsets[i], stacked.sizes[i])));
    }
    return out;
  }

  // -------------------------------------------------------------------- //

  void execute_first_step(int t, int abs_t, int day, int day_rel, int sim_day, int h,
                          const PowerSchedule& load_fc, const PowerSchedule& pv_fc,
                          const std::vector<EvSession>& sessions,
                          std::map<std::string, AgentPlan>& plans, SimulationResult& res) {
    const double limit = sc_.config.pcc_limit_kw;
    const double actual_load = sc_.load_actual[abs_t];
    const double actual_pv = sc_.pv_actual[abs_t];

    // load: the planned curtailment fraction applies to the actual demand
    const AgentPlan& lp = plans["load"];
    double frac = 1.0;
    if (load_fc[0] > 1e-9) frac = std::clamp(lp.p[0] / load_fc[0], 0.0, 1.0);
    double load_exec = frac * actual_load;

    // pv: the planned output caps the actual availability
    const AgentPlan& pp = plans["pv"];
    double pv_exec = std::max(actual_pv, std::min(0.0, pp.p[0]));
    (void)pv_fc;

    // storage executes its planned split verbatim (guarded by the dynamics)
    const AgentPlan& bp = plans["bes"];
    double bes_exec = 0.0;
    {
      PowerSchedule one(1);
      one[0] = (bp.charge_power.size() ? bp.charge_power[0] - bp.discharge_power[0] : bp.p[0]);
      auto q = simulate_charge(sc_.config.bes.params, q_bes_, one, dt_, 0, 1);
      bes_exec = one[0];
      q_bes_ = q[1];
    }

    std::vector<double> ev_exec(static_cast<std::size_t>(n_ev_), 0.0);
    for (int i = 0; i < n_ev_; ++i) {
      const auto& actual = sc_.fleet.days[static_cast<std::size_t>(i)][static_cast<std::size_t>(day)];
      const bool present = day_rel >= actual.t_arr && day_rel < actual.t_dep;
      auto& q_state = q_ev_[static_cast<std::size_t>(i)];
      if (day_rel == actual.t_arr) q_state = actual.q_init;  // fresh session
      if (present) {
        const auto it = plans.find(sc_.fleet.names[static_cast<std::size_t>(i)]);
        double request = 0.0;
        if (it != plans.end() && it->second.p.size() > 0)
          request = it->second.charge_power.size()
                        ? it->second.charge_power[0] - it->second.discharge_power[0]
                        : it->second.p[0];
        PowerSchedule one(1);
        one[0] = request;
        auto q = simulate_charge(sc_.fleet.batteries[static_cast<std::size_t>(i)], q_state, one,
                                 dt_, 0, 1);
        ev_exec[static_cast<std::size_t>(i)] = one[0];
        q_state = q[1];
        res.ev_present[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = true;
      }
      // departure bookkeeping once per vehicle-day
      if (day_rel + 1 == actual.t_dep || (day_rel < actual.t_dep && t + 1 == sc_.sim_steps)) {
        EvDayRecord rec;
        rec.vehicle = i;
        rec.day = sim_day;
        rec.q_at_departure = q_state;
        rec.required = sc_.config.ev.alpha_des * actual.q_des;
        const double gap = rec.required - q_state;
        rec.shortfall = gap > 1e-6 ? gap : 0.0;
        if (day_rel >= actual.t_arr) res.ev_days.push_back(rec);
      }
    }

    double ev_total = 0.0;
    for (double v : ev_exec) ev_total += v;

    // the PCC is the physical slack
    double grid_exec = -(load_exec + pv_exec + bes_exec + ev_total);
    if (grid_exec > limit + 1e-9) {
      // import overflow: emergency load curtailment, below beta if unavoidable
      const double overflow = grid_exec - limit;
      const double cut = std::min(overflow, load_exec);
      load_exec -= cut;
      res.events.push_back({t, "pcc_clamp", "import overflow", overflow});
      if (cut > 0.0)
        res.events.push_back({t, "emergency_load_curtailment", "", cut});
      grid_exec = -(load_exec + pv_exec + bes_exec + ev_total);
      if (grid_exec > limit + 1e-6)
        res.events.push_back({t, "import_overflow", "slack exhausted", grid_exec - limit});
    } else if (grid_exec < -limit - 1e-9) {
      // export overflow: curtail PV beyond its plan
      const double overflow = -limit - grid_exec;
      const double cut = std::min(overflow, -pv_exec);
      pv_exec += cut;
      res.events.push_back({t, "pcc_clamp", "export overflow", overflow});
      if (cut > 0.0)
        res.events.push_back({t, "emergency_pv_curtailment", "", cut});
      grid_exec = -(load_exec + pv_exec + bes_exec + ev_total);
      if (grid_exec < -limit - 1e-6)
        res.events.push_back({t, "export_overflow", "slack exhausted", -limit - grid_exec});
    }

    res.load[t] = load_exec;
    res.pv[t] = pv_exec;
    res.bes[t] = bes_exec;
    res.grid[t] = grid_exec;
    res.q_bes[t + 1] = q_bes_;
    for (int i = 0; i < n_ev_; ++i) {
      res.ev[static_cast<std::size_t>(i)][t] = ev_exec[static_cast<std::size_t>(i)];
      res.q_ev[static_cast<std::size_t>(i)][t + 1] = q_ev_[static_cast<std::size_t>(i)];
    }
    (void)h;
  }

  // -------------------------------------------------------------------- //

  const Scenario& sc_;
  RunMode mode_;
  double dt_;
  int period_;
  int n_ev_;

  HistoryBuffer pv_hist_;
  HistoryBuffer load_hist_;

  LoadAgent load_agent_;
  PVAgent pv_agent_;
  StorageAgent bes_agent_;
  std::vector<std::unique_ptr<StorageAgent>> ev_agents_;
  GridAgent grid_agent_;

  double q_bes_ = 0.0;
  std::vector<double> q_ev_;
  std::vector<std::optional<std::pair<int, EVParamEstimate>>> estimate_cache_;

  std::map<std::string, PowerSchedule> prev_plans_;
  PowerSchedule u_prev_;
  bool have_u_ = false;
  int prev_h_ = 0;

  qp::QpSolver central_solver_;
};

}  // namespace

SimulationResult run_mpc(const Scenario& scenario, RunMode mode) {
  Engine engine(scenario, mode);
  return engine.run();
}

std::vector<std::pair<double, int>> tune_rho(const Scenario& scenario,
                                             const std::vector<double>& candidates) {
  std::vector<std::pair<double, int>> out;
  for (double rho : candidates) {
    Scenario sc = scenario;
    sc.config.admm.rho = rho;
    sc.config.weights.rho = rho;
    sc.sim_steps = std::min(sc.sim_steps, 1);
    sc.config.grid.sim_steps = sc.sim_steps;
    Engine engine(sc, RunMode::Admm);
    auto res = engine.run();
    out.emplace_back(rho, res.stats.empty() ? -1 : res.stats.front().iterations);
  }
  return out;
}

}  // namespace microgrid
