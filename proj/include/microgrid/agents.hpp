#pragma once

#include "microgrid/core.hpp"
#include "microgrid/qp.hpp"

#include <memory>
#include <optional>
#include <string>

namespace microgrid {

/// Anti-oscillation pull toward the previous MPC plan with a per-entry
/// weight (zero where the previous plan has no overlapping entry).
struct DampingTarget {
  PowerSchedule target;
  Vec weight;
};

/// An agent's objective encoded in canonical QP pieces.  `qp` covers the
/// agent-local variables; `schedule_map` S extracts the power schedule,
/// p = S x.  The encoding includes the damping term when one is active but
/// never the exchange proximal term.
struct AgentEncoding {
  qp::CanonicalQP qp;
  qp::SpMat schedule_map;
};

/// A solved schedule plus storage internals where they exist.
struct AgentPlan {
  PowerSchedule p;
  Vec charge_power;     // p_c (storage only)
  Vec discharge_power;  // p_d (storage only)
  ChargeTrajectory q;   // storage only
};

/// One DER controller in the exchange iteration.
class Agent {
 public:
  explicit Agent(std::string name) : name_(std::move(name)) {}
  virtual ~Agent() = default;

  const std::string& name() const { return name_; }
  virtual int horizon() const = 0;

  /// argmin_p f_i(p) + damping + (rho/2) ||p - v||^2 over the feasible set.
  virtual PowerSchedule prox(const PowerSchedule& v, double rho) = 0;

  virtual AgentEncoding encoding() const = 0;

  /// f_i(p): the agent's true cost, excluding damping and prox terms.
  virtual double local_cost(const PowerSchedule& p) const = 0;

  /// Unpacks a solution over this agent's encoding variables.
  virtual AgentPlan plan_from(const Vec& x_local) const = 0;

  /// Plan produced by the most recent prox call.
  virtual AgentPlan last_plan() const { return {last_prox_, {}, {}, {}}; }

 protected:
  PowerSchedule last_prox_;

 private:
  std::string name_;
};

// ---------------------------------------------------------------------------

/// Curtailable load: beta * forecast <= p <= forecast, quadratic curtailment
/// penalty alpha_load ||forecast - p||^2.  Prox is solved in closed form.
class LoadAgent : public Agent {
 public:
  LoadAgent(std::string name, double beta, double alpha_load);

  void begin_step(PowerSchedule demand_forecast, std::optional<DampingTarget> damping = {});

  int horizon() const override { return static_cast<int>(forecast_.size()); }
  PowerSchedule prox(const PowerSchedule& v, double rho) override;
  AgentEncoding encoding() const override;
  double local_cost(const PowerSchedule& p) const override;
  AgentPlan plan_from(const Vec& x_local) const override;

  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  const PowerSchedule& forecast() const { return forecast_; }
  const std::optional<DampingTarget>& damping() const { return damping_; }

 private:
  double beta_, alpha_;
  PowerSchedule forecast_;
  std::optional<DampingTarget> damping_;
};

/// PV array: forecast <= p <= 0 (generation negative), quadratic curtailment
/// penalty alpha_pv ||forecast - p||^2.  Prox is solved in closed form.
class PVAgent : public Agent {
 public:
  PVAgent(std::string name, double alpha_pv);

  void begin_step(PowerSchedule generation_forecast, std::optional<DampingTarget> damping = {});

  int horizon() const override { return static_cast<int>(forecast_.size()); }
  PowerSchedule prox(const PowerSchedule& v, double rho) override;
  AgentEncoding encoding() const override;
  double local_cost(const PowerSchedule& p) const override;
  AgentPlan plan_from(const Vec& x_local) const override;

  double alpha() const { return alpha_; }
  const PowerSchedule& forecast() const { return forecast_; }
  const std::optional<DampingTarget>& damping() const { return damping_; }

 private:
  double alpha_;
  PowerSchedule forecast_;
  std::optional<DampingTarget> damping_;
};

// ---------------------------------------------------------------------------

/// Battery parameters shared by the stationary unit and each EV battery.
struct StorageParams {
  double c_max = 0.0, d_max = 0.0;  // charge/discharge rate limits, kW
  double eta_c = 1.0, eta_d = 1.0;  // charge/discharge efficiencies
  double eta_q = 1.0;               // per-step storage efficiency
  double q_min_frac = 0.0, q_max_frac = 1.0;
  double q_cap = 0.0;  // kWh
  double alpha_cyc = 0.0;

  void validate() const;
};

/// Per-solve window for a storage agent.  Charging may occur on steps
/// [avail_start, avail_end); the state of charge is frozen outside that
/// range so that q(avail_start) equals q_init exactly.
struct StorageWindow {
  int horizon = 0;
  double dt_hours = 0.25;
  double q_init = 0.0;
  int avail_start = 0;
  int avail_end = 0;
  std::optional<double> q_final;  // terminal equality q(horizon) = q_final
  struct DepartureReq {
    int step = 0;            // index into the charge trajectory
    double required_kwh = 0.0;  // q(step) >= required
  };
  std::optional<DepartureReq> departure;
};

struct ReachabilityReport {
  bool feasible = true;
  double max_attainable = 0.0;  // kWh at the end of the charging window
};

/// Max-rate charging simulation from q_init over `steps` charging steps.
ReachabilityReport check_reachability(const StorageParams& params, double q_init,
                                      int steps, double dt_hours, double required_kwh);

/// Storage agent (BES or one EV battery).  The prox subproblem is a QP over
/// split charge/discharge power, the charge trajectory and L1 auxiliaries;
/// the KKT factorization is cached across prox calls and, where the window
/// allows, across MPC steps.
class StorageAgent : public Agent {
 public:
  StorageAgent(std::string name, StorageParams params,
               qp::SolverSettings solver_settings = {});

  /// Configures the agent for one MPC solve.  An unreachable departure
  /// requirement is relaxed to the attainable charge and recorded.
  void begin_step(const StorageWindow& window, std::optional<DampingTarget> damping = {});

  int horizon() const override { return window_.horizon; }
  PowerSchedule prox(const PowerSchedule& v, double rho) override;
  AgentEncoding encoding() const override;
  double local_cost(const PowerSchedule& p) const override;

  const StorageParams& params() const { return params_; }
  const StorageWindow& window() const { return window_; }
  const std::optional<DampingTarget>& damping() const { return damping_; }

  /// Charge trajectory from the most recent prox solve.
  const ChargeTrajectory& last_charge() const { return last_q_; }
  bool requirement_relaxed() const { return relaxed_; }
  double planned_shortfall() const { return planned_shortfall_; }
  double max_attainable() const { return reach_.max_attainable; }

  AgentPlan plan_from(const Vec& x_local) const override;
  AgentPlan last_plan() const override { return last_plan_; }

 private:
  void assemble(double rho);

  StorageParams params_;
  qp::SolverSettings solver_settings_;
  StorageWindow window_;
  std::optional<DampingTarget> damping_;
  ReachabilityReport reach_;
  bool relaxed_ = false;
  double planned_shortfall_ = 0.0;
  double required_eff_ = 0.0;

  qp::QpSolver solver_;
  qp::CanonicalQP prob_;
  Vec q_base_;  // linear cost without the prox pull
  double built_rho_ = -1.0;
  bool needs_assemble_ = true;
  ChargeTrajectory last_q_;
  AgentPlan last_plan_;
};

// ---------------------------------------------------------------------------

/// Grid interconnect at the PCC: linear energy cost plus range, total
/// variation and curvature smoothing, with |p| <= pcc_limit.
class GridAgent : public Agent {
 public:
  GridAgent(std::string name, double pcc_limit_kw, double alpha_range, double alpha_diff,
            double alpha_curv, qp::SolverSettings solver_settings = {});

  void begin_step(PriceSchedule price_per_kwh, double dt_hours,
                  std::optional<DampingTarget> damping = {});

  int horizon() const override { return static_cast<int>(price_.size()); }
  PowerSchedule prox(const PowerSchedule& v, double rho) override;
  AgentEncoding encoding() const override;
  double local_cost(const PowerSchedule& p) const override;
  AgentPlan plan_from(const Vec& x_local) const override;

  double pcc_limit() const { return limit_; }
  double alpha_range() const { return alpha_range_; }
  double alpha_diff() const { return alpha_diff_; }
  double alpha_curv() const { return alpha_curv_; }
  const PriceSchedule& price() const { return price_; }
  double dt_hours() const { return dt_hours_; }
  const std::optional<DampingTarget>& damping() const { return damping_; }

 private:
  void assemble(double rho);

  double limit_, alpha_range_, alpha_diff_, alpha_curv_;
  qp::SolverSettings solver_settings_;
  PriceSchedule price_;
  double dt_hours_ = 0.25;
  std::optional<DampingTarget> damping_;

  qp::QpSolver solver_;
  qp::CanonicalQP prob_;
  Vec q_base_;
  double built_rho_ = -1.0;
  bool needs_assemble_ = true;
};

// ---------------------------------------------------------------------------
// Free-function prox operators (one-shot; the agent classes wrap these with
// cached solvers for the exchange hot path).

PowerSchedule prox_load(const LoadAgent& agent, const PowerSchedule& v, double rho,
                        const std::optional<PowerSchedule>& prev = {}, double alpha_prev = 0.0);

PowerSchedule prox_pv(const PVAgent& agent, const PowerSchedule& v, double rho,
                      const std::optional<PowerSchedule>& prev = {}, double alpha_prev = 0.0);

struct StorageProxResult {
  PowerSchedule p;
  ChargeTrajectory q;
  qp::SolveStatus status = qp::SolveStatus::Solved;
};

/// Exact storage prox without requirement relaxation; status is Infeasible
/// when the departure requirement is unreachable.
StorageProxResult prox_storage(const StorageAgent& agent, const PowerSchedule& v, double rho,
                               const std::optional<PowerSchedule>& prev = {},
                               double alpha_prev = 0.0);

PowerSchedule prox_grid(const GridAgent& agent, const PowerSchedule& v, double rho,
                        const std::optional<PowerSchedule>& prev = {}, double alpha_prev = 0.0);

/// reachability_check per the storage contract: uses the agent's current
/// window and its (possibly relaxed) departure requirement.
ReachabilityReport reachability_check(const StorageAgent& agent);

/// Executed-dynamics helper: applies schedule p from q_init, clamping each
/// step's power so rates and state-of-charge bounds hold.  Returns the
/// realized trajectory; `p` is adjusted in place where clamping occurred.
ChargeTrajectory simulate_charge(const StorageParams& params, double q_init, PowerSchedule& p,
                                 double dt_hours, int avail_start, int avail_end);

}  // namespace microgrid
