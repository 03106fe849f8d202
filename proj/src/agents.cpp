#include "microgrid/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace microgrid {

namespace {

using qp::CanonicalQP;
using qp::QpBuilder;
using qp::SpMat;
using Trip = Eigen::Triplet<double>;

SpMat identity_map(int t) {
  SpMat s(t, t);
  s.setIdentity();
  return s;
}

/// Per-entry minimizer of a(target-p)^2 + w(prev-p)^2 + (rho/2)(p-v)^2 on a box.
PowerSchedule box_prox(const PowerSchedule& target, double a, const PowerSchedule& v,
                       double rho, const Vec& w, const PowerSchedule& prev,
                       const PowerSchedule& lo, const PowerSchedule& hi) {
  const Eigen::Index t = target.size();
  PowerSchedule out(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const double num = 2.0 * a * target[i] + 2.0 * w[i] * prev[i] + rho * v[i];
    const double den = 2.0 * a + 2.0 * w[i] + rho;
    out[i] = std::clamp(num / den, lo[i], hi[i]);
  }
  return out;
}

struct DampingView {
  Vec weight;
  PowerSchedule prev;
};

DampingView damping_view(const std::optional<DampingTarget>& d, int t) {
  if (d) {
    if (d->target.size() != t || d->weight.size() != t)
      throw std::invalid_argument("DampingTarget size mismatch");
    return {d->weight, d->target};
  }
  return {Vec::Zero(t), PowerSchedule::Zero(t)};
}

std::optional<DampingTarget> uniform_damping(const std::optional<PowerSchedule>& prev,
                                             double alpha_prev, int t) {
  if (!prev || alpha_prev <= 0.0) return {};
  if (prev->size() != t) throw std::invalid_argument("prev size mismatch");
  return DampingTarget{*prev, Vec::Constant(t, alpha_prev)};
}

// ---------------------------------------------------------------------------
// Storage QP assembly.  Variable layout before the L1 extension:
//   [p_c(0..T), p_d(0..T), q(0..T+1)]
// Dynamics rows run over the whole horizon; outside the availability window
// they degenerate to q(t+1) = q(t) (with structural zeros on the power
// columns) so the sparsity pattern is independent of the window.

struct StorageAssembly {
  CanonicalQP prob;
  Vec q_base;
  SpMat schedule_map;  // T x n
  int pc0 = 0, pd0 = 0, q0 = 0;
};

StorageAssembly assemble_storage(const StorageParams& ps, const StorageWindow& w,
                                 const std::optional<DampingTarget>& damping, double rho,
                                 double required_eff) {
  const int t = w.horizon;
  if (t <= 0) throw std::invalid_argument("storage: horizon must be positive");
  const auto dv = damping_view(damping, t);
  const double dt = w.dt_hours;

  QpBuilder b;
  const int pc0 = b.add_vars(t, 0.0, 0.0);
  const int pd0 = b.add_vars(t, 0.0, 0.0);
  const int q0 = b.add_vars(t + 1, 0.0, ps.q_cap);

  const int ws = std::clamp(w.avail_start, 0, t);
  const int we = std::clamp(w.avail_end, ws, t);

  for (int i = 0; i < t; ++i) {
    const bool in = i >= ws && i < we;
    b.set_bounds(pc0 + i, 0.0, in ? ps.c_max : 0.0);
    b.set_bounds(pd0 + i, 0.0, in ? ps.d_max : 0.0);

    const double wq = rho + 2.0 * dv.weight[i];
    b.add_quad(pc0 + i, pc0 + i, wq);
    b.add_quad(pd0 + i, pd0 + i, wq);
    b.add_quad(pc0 + i, pd0 + i, -wq);
    b.add_lin(pc0 + i, -2.0 * dv.weight[i] * dv.prev[i]);
    b.add_lin(pd0 + i, 2.0 * dv.weight[i] * dv.prev[i]);

    const int row = b.add_eq_row(0.0);
    b.eq_coeff(row, q0 + i + 1, 1.0);
    b.eq_coeff(row, q0 + i, in ? -ps.eta_q : -1.0);
    b.eq_coeff(row, pc0 + i, in ? -ps.eta_c * dt : 0.0);
    b.eq_coeff(row, pd0 + i, in ? dt / ps.eta_d : 0.0);
  }

  // state-of-charge boxes: capacity limits while connected, loose otherwise
  b.set_bounds(q0, w.q_init, w.q_init);
  for (int j = 1; j <= t; ++j) {
    if (j > ws && j <= we)
      b.set_bounds(q0 + j, ps.q_min_frac * ps.q_cap, ps.q_max_frac * ps.q_cap);
    else
      b.set_bounds(q0 + j, 0.0, ps.q_cap);
  }
  if (w.q_final) b.set_bounds(q0 + t, *w.q_final, *w.q_final);
  if (w.departure) {
    const int j = std::clamp(w.departure->step, 0, t);
    const double lo = std::max(required_eff, j > ws && j <= we ? ps.q_min_frac * ps.q_cap : 0.0);
    const double hi = (j > ws && j <= we) ? ps.q_max_frac * ps.q_cap : ps.q_cap;
    b.set_bounds(q0 + j, lo, hi);
  }

  CanonicalQP base = b.build();

  // cycling |delta (p_c - p_d)| via L1 auxiliaries (kept when the weight is
  // zero so the pattern never changes)
  StorageAssembly out;
  if (t >= 2) {
    SpMat d(t - 1, base.num_vars());
    std::vector<Trip> dt_trips;
    for (int i = 0; i + 1 < t; ++i) {
      dt_trips.emplace_back(i, pc0 + i + 1, 1.0);
      dt_trips.emplace_back(i, pd0 + i + 1, -1.0);
      dt_trips.emplace_back(i, pc0 + i, -1.0);
      dt_trips.emplace_back(i, pd0 + i, 1.0);
    }
    d.setFromTriplets(dt_trips.begin(), dt_trips.end());
    out.prob = qp::l1_to_qp(Vec::Constant(t - 1, ps.alpha_cyc), d, base);
  } else {
    out.prob = std::move(base);
  }

  out.q_base = out.prob.q;
  out.pc0 = pc0;
  out.pd0 = pd0;
  out.q0 = q0;
  std::vector<Trip> st;
  for (int i = 0; i < t; ++i) {
    st.emplace_back(i, pc0 + i, 1.0);
    st.emplace_back(i, pd0 + i, -1.0);
  }
  out.schedule_map.resize(t, out.prob.num_vars());
  out.schedule_map.setFromTriplets(st.begin(), st.end());
  return out;
}

// ---------------------------------------------------------------------------
// Grid QP assembly.  Base layout: [p(0..T)], then the L1 (total variation)
// and range extensions append their auxiliaries.

struct GridAssembly {
  CanonicalQP prob;
  Vec q_base;
  SpMat schedule_map;
};

GridAssembly assemble_grid(double limit, double a_range, double a_diff, double a_curv,
                           const PriceSchedule& price, double dt_hours,
                           const std::optional<DampingTarget>& damping, double rho) {
  const int t = static_cast<int>(price.size());
  if (t <= 0) throw std::invalid_argument("grid: empty price schedule");
  const auto dv = damping_view(damping, t);

  QpBuilder b;
  const int p0 = b.add_vars(t, -limit, limit);
  for (int i = 0; i < t; ++i) {
    b.add_lin(p0 + i, price[i] * dt_hours - 2.0 * dv.weight[i] * dv.prev[i]);
    b.add_quad(p0 + i, p0 + i, rho + 2.0 * dv.weight[i]);
  }
  // curvature quadratic (1,-2,1 stencil)
  static const double sten[3] = {1.0, -2.0, 1.0};
  for (int r = 0; r + 2 < t; ++r) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        b.add_quad(p0 + r + i, p0 + r + j, 2.0 * a_curv * sten[i] * sten[j]);
      }
    }
  }

  CanonicalQP base = b.build();

  GridAssembly out;
  CanonicalQP stage = std::move(base);
  if (t >= 2) {
    SpMat d(t - 1, stage.num_vars());
    std::vector<Trip> trips;
    for (int i = 0; i + 1 < t; ++i) {
      trips.emplace_back(i, p0 + i + 1, 1.0);
      trips.emplace_back(i, p0 + i, -1.0);
    }
    d.setFromTriplets(trips.begin(), trips.end());
    stage = qp::l1_to_qp(Vec::Constant(t - 1, a_diff), d, stage);
  }
  std::vector<int> sel(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) sel[static_cast<std::size_t>(i)] = p0 + i;
  out.prob = qp::range_to_qp(a_range, sel, stage);

  out.q_base = out.prob.q;
  std::vector<Trip> st;
  for (int i = 0; i < t; ++i) st.emplace_back(i, p0 + i, 1.0);
  out.schedule_map.resize(t, out.prob.num_vars());
  out.schedule_map.setFromTriplets(st.begin(), st.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// LoadAgent

LoadAgent::LoadAgent(std::string name, double beta, double alpha_load)
    : Agent(std::move(name)), beta_(beta), alpha_(alpha_load) {
  if (beta_ < 0.0 || beta_ > 1.0) throw std::invalid_argument("LoadAgent: beta must be in [0,1]");
  if (alpha_ < 0.0) throw std::invalid_argument("LoadAgent: alpha_load must be >= 0");
}

void LoadAgent::begin_step(PowerSchedule demand_forecast, std::optional<DampingTarget> damping) {
  if ((demand_forecast.array() < 0.0).any())
    throw std::invalid_argument("LoadAgent: demand forecast must be nonnegative");
  forecast_ = std::move(demand_forecast);
  damping_ = std::move(damping);
}

PowerSchedule LoadAgent::prox(const PowerSchedule& v, double rho) {
  const int t = horizon();
  if (v.size() != t) throw std::invalid_argument(name() + ": prox target size mismatch");
  const auto dv = damping_view(damping_, t);
  last_prox_ = box_prox(forecast_, alpha_, v, rho, dv.weight, dv.prev, beta_ * forecast_,
                        forecast_);
  return last_prox_;
}

AgentEncoding LoadAgent::encoding() const {
  const int t = horizon();
  const auto dv = damping_view(damping_, t);
  QpBuilder b;
  const int p0 = b.add_vars(t, 0.0, 0.0);
  for (int i = 0; i < t; ++i) {
    b.set_bounds(p0 + i, beta_ * forecast_[i], forecast_[i]);
    b.add_quad(p0 + i, p0 + i, 2.0 * alpha_ + 2.0 * dv.weight[i]);
    b.add_lin(p0 + i, -2.0 * alpha_ * forecast_[i] - 2.0 * dv.weight[i] * dv.prev[i]);
  }
  return {b.build(), identity_map(t)};
}

double LoadAgent::local_cost(const PowerSchedule& p) const {
  return alpha_ * (forecast_ - p).squaredNorm();
}

AgentPlan LoadAgent::plan_from(const Vec& x_local) const { return {x_local, {}, {}, {}}; }

// ---------------------------------------------------------------------------
// PVAgent

PVAgent::PVAgent(std::string name, double alpha_pv) : Agent(std::move(name)), alpha_(alpha_pv) {
  if (alpha_ < 0.0) throw std::invalid_argument("PVAgent: alpha_pv must be >= 0");
}

void PVAgent::begin_step(PowerSchedule generation_forecast, std::optional<DampingTarget> damping) {
  if ((generation_forecast.array() > 0.0).any())
    throw std::invalid_argument("PVAgent: generation forecast must be nonpositive");
  forecast_ = std::move(generation_forecast);
  damping_ = std::move(damping);
}

PowerSchedule PVAgent::prox(const PowerSchedule& v, double rho) {
  const int t = horizon();
  if (v.size() != t) throw std::invalid_argument(name() + ": prox target size mismatch");
  const auto dv = damping_view(damping_, t);
  last_prox_ = box_prox(forecast_, alpha_, v, rho, dv.weight, dv.prev, forecast_,
                        PowerSchedule::Zero(t));
  return last_prox_;
}

AgentEncoding PVAgent::encoding() const {
  const int t = horizon();
  const auto dv = damping_view(damping_, t);
  QpBuilder b;
  const int p0 = b.add_vars(t, 0.0, 0.0);
  for (int i = 0; i < t; ++i) {
    b.set_bounds(p0 + i, forecast_[i], 0.0);
    b.add_quad(p0 + i, p0 + i, 2.0 * alpha_ + 2.0 * dv.weight[i]);
    b.add_lin(p0 + i, -2.0 * alpha_ * forecast_[i] - 2.0 * dv.weight[i] * dv.prev[i]);
  }
  return {b.build(), identity_map(t)};
}

double PVAgent::local_cost(const PowerSchedule& p) const {
  return alpha_ * (forecast_ - p).squaredNorm();
}

AgentPlan PVAgent::plan_from(const Vec& x_local) const { return {x_local, {}, {}, {}}; }

// ---------------------------------------------------------------------------
// StorageAgent

void StorageParams::validate() const {
  if (c_max < 0.0 || d_max < 0.0) throw std::invalid_argument("storage: rates must be >= 0");
  if (eta_c <= 0.0 || eta_c > 1.0 || eta_d <= 0.0 || eta_d > 1.0 || eta_q <= 0.0 || eta_q > 1.0)
    throw std::invalid_argument("storage: efficiencies must lie in (0,1]");
  if (q_min_frac < 0.0 || q_max_frac > 1.0 || q_min_frac > q_max_frac)
    throw std::invalid_argument("storage: charge fraction bounds invalid");
  if (q_cap <= 0.0) throw std::invalid_argument("storage: q_cap must be positive");
  if (alpha_cyc < 0.0) throw std::invalid_argument("storage: alpha_cyc must be >= 0");
}

ReachabilityReport check_reachability(const StorageParams& params, double q_init, int steps,
                                      double dt_hours, double required_kwh) {
  double q = q_init;
  if (steps <= 0) {
    q = params.eta_q * q_init;
  } else {
    const double cap = params.q_max_frac * params.q_cap;
    for (int i = 0; i < steps; ++i)
      q = std::min(params.eta_q * q + params.eta_c * dt_hours * params.c_max, cap);
  }
  return {q + 1e-9 >= required_kwh, q};
}

StorageAgent::StorageAgent(std::string name, StorageParams params,
                           qp::SolverSettings solver_settings)
    : Agent(std::move(name)), params_(params), solver_settings_(solver_settings) {
  params_.validate();
}

void StorageAgent::begin_step(const StorageWindow& window, std::optional<DampingTarget> damping) {
  window_ = window;
  damping_ = std::move(damping);
  relaxed_ = false;
  planned_shortfall_ = 0.0;
  required_eff_ = 0.0;

  const int steps = std::max(0, std::min(window_.avail_end, window_.horizon) -
                                    std::max(window_.avail_start, 0));
  if (window_.departure) {
    reach_ = check_reachability(params_, window_.q_init, steps, window_.dt_hours,
                                window_.departure->required_kwh);
    required_eff_ = window_.departure->required_kwh;
    if (!reach_.feasible) {
      relaxed_ = true;
      planned_shortfall_ = window_.departure->required_kwh - reach_.max_attainable;
      required_eff_ = reach_.max_attainable;
    }
  } else {
    reach_ = check_reachability(params_, window_.q_init, steps, window_.dt_hours, 0.0);
  }
  needs_assemble_ = true;
}

void StorageAgent::assemble(double rho) {
  auto built = assemble_storage(params_, window_, damping_, rho, required_eff_);
  prob_ = std::move(built.prob);
  q_base_ = built.q_base;
  built_rho_ = rho;
  needs_assemble_ = false;
  solver_.refresh(prob_, solver_settings_);
}

PowerSchedule StorageAgent::prox(const PowerSchedule& v, double rho) {
  const int t = window_.horizon;
  if (v.size() != t) throw std::invalid_argument(name() + ": prox target size mismatch");

  // departed or absent over the whole horizon: schedule is identically zero
  const int ws = std::clamp(window_.avail_start, 0, t);
  const int we = std::clamp(window_.avail_end, ws, t);
  if (we <= ws && !window_.q_final) {
    last_prox_ = PowerSchedule::Zero(t);
    last_q_ = ChargeTrajectory::Constant(t + 1, window_.q_init);
    if (t > 0) {
      last_q_[0] = window_.q_init;
      for (int i = 0; i < t; ++i) last_q_[i + 1] = last_q_[i];
    }
    last_plan_ = {last_prox_, Vec::Zero(t), Vec::Zero(t), last_q_};
    return last_prox_;
  }

  if (needs_assemble_ || rho != built_rho_) assemble(rho);

  Vec q_eff = q_base_;
  q_eff.segment(0, t) -= rho * v;       // p_c block
  q_eff.segment(t, t) += rho * v;       // p_d block
  solver_.set_linear_cost(q_eff);
  auto sol = solver_.solve();
  if (sol.status == qp::SolveStatus::Infeasible)
    throw std::runtime_error(name() + ": storage subproblem infeasible");

  Vec pc = sol.x.segment(0, t);
  Vec pd = sol.x.segment(t, t);
  // pinned-to-zero entries are known exactly
  for (int i = 0; i < t; ++i) {
    if (i < ws || i >= we) {
      pc[i] = 0.0;
      pd[i] = 0.0;
    }
  }
  last_prox_ = pc - pd;
  last_q_ = sol.x.segment(2 * t, t + 1);
  last_plan_ = {last_prox_, std::move(pc), std::move(pd), last_q_};
  return last_prox_;
}

AgentEncoding StorageAgent::encoding() const {
  auto a = assemble_storage(params_, window_, damping_, 0.0, required_eff_);
  return {std::move(a.prob), std::move(a.schedule_map)};
}

double StorageAgent::local_cost(const PowerSchedule& p) const {
  double tv = 0.0;
  for (Eigen::Index i = 0; i + 1 < p.size(); ++i) tv += std::abs(p[i + 1] - p[i]);
  return params_.alpha_cyc * tv;
}

AgentPlan StorageAgent::plan_from(const Vec& x_local) const {
  const int t = window_.horizon;
  AgentPlan plan;
  plan.charge_power = x_local.segment(0, t);
  plan.discharge_power = x_local.segment(t, t);
  plan.p = plan.charge_power - plan.discharge_power;
  plan.q = x_local.segment(2 * t, t + 1);
  return plan;
}

// ---------------------------------------------------------------------------
// GridAgent

GridAgent::GridAgent(std::string name, double pcc_limit_kw, double alpha_range,
                     double alpha_diff, double alpha_curv, qp::SolverSettings solver_settings)
    : Agent(std::move(name)),
      limit_(pcc_limit_kw),
      alpha_range_(alpha_range),
      alpha_diff_(alpha_diff),
      alpha_curv_(alpha_curv),
      solver_settings_(solver_settings) {
  if (limit_ <= 0.0) throw std::invalid_argument("GridAgent: pcc limit must be positive");
  if (alpha_range_ < 0.0 || alpha_diff_ < 0.0 || alpha_curv_ < 0.0)
    throw std::invalid_argument("GridAgent: smoothing weights must be >= 0");
}

void GridAgent::begin_step(PriceSchedule price_per_kwh, double dt_hours,
                           std::optional<DampingTarget> damping) {
  price_ = std::move(price_per_kwh);
  dt_hours_ = dt_hours;
  damping_ = std::move(damping);
  needs_assemble_ = true;
}

void GridAgent::assemble(double rho) {
  auto a = assemble_grid(limit_, alpha_range_, alpha_diff_, alpha_curv_, price_, dt_hours_,
                         damping_, rho);
  prob_ = std::move(a.prob);
  q_base_ = a.q_base;
  built_rho_ = rho;
  needs_assemble_ = false;
  solver_.refresh(prob_, solver_settings_);
}

PowerSchedule GridAgent::prox(const PowerSchedule& v, double rho) {
  const int t = horizon();
  if (v.size() != t) throw std::invalid_argument(name() + ": prox target size mismatch");
  if (needs_assemble_ || rho != built_rho_) assemble(rho);

  Vec q_eff = q_base_;
  q_eff.segment(0, t) -= rho * v;
  solver_.set_linear_cost(q_eff);
  auto sol = solver_.solve();
  if (sol.status == qp::SolveStatus::Infeasible)
    throw std::runtime_error(name() + ": grid subproblem infeasible");
  last_prox_ = sol.x.segment(0, t);
  return last_prox_;
}

AgentEncoding GridAgent::encoding() const {
  auto a = assemble_grid(limit_, alpha_range_, alpha_diff_, alpha_curv_, price_, dt_hours_,
                         damping_, 0.0);
  return {std::move(a.prob), std::move(a.schedule_map)};
}

double GridAgent::local_cost(const PowerSchedule& p) const {
  double cost = (price_.cwiseProduct(p)).sum() * dt_hours_;
  if (p.size() >= 3) cost += smoothing_cost(p, alpha_range_, alpha_diff_, alpha_curv_);
  return cost;
}

AgentPlan GridAgent::plan_from(const Vec& x_local) const {
  return {x_local.head(horizon()), {}, {}, {}};
}

// ---------------------------------------------------------------------------
// Free-function prox operators

PowerSchedule prox_load(const LoadAgent& agent, const PowerSchedule& v, double rho,
                        const std::optional<PowerSchedule>& prev, double alpha_prev) {
  const int t = static_cast<int>(agent.forecast().size());
  const auto d = uniform_damping(prev, alpha_prev, t);
  const auto dv = damping_view(d, t);
  return box_prox(agent.forecast(), agent.alpha(), v, rho, dv.weight, dv.prev,
                  agent.beta() * agent.forecast(), agent.forecast());
}

PowerSchedule prox_pv(const PVAgent& agent, const PowerSchedule& v, double rho,
                      const std::optional<PowerSchedule>& prev, double alpha_prev) {
  const int t = static_cast<int>(agent.forecast().size());
  const auto d = uniform_damping(prev, alpha_prev, t);
  const auto dv = damping_view(d, t);
  return box_prox(agent.forecast(), agent.alpha(), v, rho, dv.weight, dv.prev, agent.forecast(),
                  PowerSchedule::Zero(t));
}

StorageProxResult prox_storage(const StorageAgent& agent, const PowerSchedule& v, double rho,
                               const std::optional<PowerSchedule>& prev, double alpha_prev) {
  const auto& w = agent.window();
  const int t = w.horizon;
  StorageProxResult out;
  if (w.departure) {
    const int steps = std::max(0, std::min(w.avail_end, t) - std::max(w.avail_start, 0));
    const auto reach = check_reachability(agent.params(), w.q_init, steps, w.dt_hours,
                                          w.departure->required_kwh);
    if (!reach.feasible) {
      out.status = qp::SolveStatus::Infeasible;
      return out;
    }
  }
  const auto damping = uniform_damping(prev, alpha_prev, t);
  const double req = w.departure ? w.departure->required_kwh : 0.0;
  auto a = assemble_storage(agent.params(), w, damping, rho, req);
  Vec q_eff = a.q_base;
  q_eff.segment(0, t) -= rho * v;
  q_eff.segment(t, t) += rho * v;
  a.prob.q = q_eff;
  auto sol = qp::solve_qp(a.prob);
  out.status = sol.status;
  if (sol.status != qp::SolveStatus::Infeasible) {
    out.p = sol.x.segment(0, t) - sol.x.segment(t, t);
    out.q = sol.x.segment(2 * t, t + 1);
  }
  return out;
}

PowerSchedule prox_grid(const GridAgent& agent, const PowerSchedule& v, double rho,
                        const std::optional<PowerSchedule>& prev, double alpha_prev) {
  const int t = static_cast<int>(agent.price().size());
  const auto damping = uniform_damping(prev, alpha_prev, t);
  auto g = assemble_grid(agent.pcc_limit(), agent.alpha_range(), agent.alpha_diff(),
                         agent.alpha_curv(), agent.price(), agent.dt_hours(), damping, rho);
  Vec q_eff = g.q_base;
  q_eff.segment(0, t) -= rho * v;
  g.prob.q = q_eff;
  auto sol = qp::solve_qp(g.prob);
  return sol.x.segment(0, t);
}

ReachabilityReport reachability_check(const StorageAgent& agent) {
  const auto& w = agent.window();
  const int steps = std::max(0, std::min(w.avail_end, w.horizon) - std::max(w.avail_start, 0));
  const double req = w.departure ? w.departure->required_kwh : 0.0;
  return check_reachability(agent.params(), w.q_init, steps, w.dt_hours, req);
}

ChargeTrajectory simulate_charge(const StorageParams& params, double q_init, PowerSchedule& p,
                                 double dt_hours, int avail_start, int avail_end) {
  const Eigen::Index t = p.size();
  ChargeTrajectory q(t + 1);
  q[0] = q_init;
  const double qmin = params.q_min_frac * params.q_cap;
  const double qmax = params.q_max_frac * params.q_cap;
  for (Eigen::Index i = 0; i < t; ++i) {
    if (i < avail_start || i >= avail_end) {
      p[i] = 0.0;
      q[i + 1] = q[i];
      continue;
    }
    double pc = std::clamp(p[i], 0.0, params.c_max);
    double pd = std::clamp(-p[i], 0.0, params.d_max);
    double next = params.eta_q * q[i] + params.eta_c * dt_hours * pc - dt_hours / params.eta_d * pd;
    if (next > qmax) {
      pc = std::max(0.0, (qmax - params.eta_q * q[i] + dt_hours / params.eta_d * pd) /
                             (params.eta_c * dt_hours));
      next = params.eta_q * q[i] + params.eta_c * dt_hours * pc - dt_hours / params.eta_d * pd;
    } else if (next < qmin && pd > 0.0) {
      pd = std::max(0.0, (params.eta_q * q[i] + params.eta_c * dt_hours * pc - qmin) *
                             params.eta_d / dt_hours);
      next = params.eta_q * q[i] + params.eta_c * dt_hours * pc - dt_hours / params.eta_d * pd;
    }
    next = std::clamp(next, 0.0, params.q_cap);
    p[i] = pc - pd;
    q[i + 1] = next;
  }
  return q;
}

}  // namespace microgrid
