#pragma once

#include "microgrid/agents.hpp"
#include "microgrid/core.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace microgrid {

/// Append-only, capacity-bounded buffer of uniformly spaced samples.
/// Steps are absolute indices on the scenario grid; appends must be
/// consecutive.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int capacity);

  void append(std::int64_t step, double value);
  int size() const { return static_cast<int>(values_.size()); }
  int capacity() const { return capacity_; }

  /// Absolute step of the oldest stored sample.
  std::int64_t start_step() const { return start_; }
  /// Absolute step the next append (and the first prediction) refers to.
  std::int64_t next_step() const { return start_ + size(); }

  /// Value at absolute step (must be in range).
  double at_step(std::int64_t step) const;
  const std::vector<double>& data() const { return values_; }

 private:
  int capacity_;
  std::int64_t start_ = 0;
  bool empty_ = true;
  std::vector<double> values_;
};

/// Periodic baseline plus AR residual correction for one signal.
struct ForecastModel {
  Vec baseline;     // one period
  Vec ar_weights;   // lag weights, most recent lag first
  double decay = 0.7;
  double gamma_asym = 1.0;
  double gamma_curv = 0.0;
  int period_steps = 96;
};

/// Periodic asymmetric-least-squares baseline fit via iteratively reweighted
/// least squares: above-data deviations weigh 1, below-data deviations weigh
/// gamma_asym, with circular second-difference smoothing.  The history must
/// span at least two periods.
Vec fit_baseline(const HistoryBuffer& hist, double gamma_asym, double gamma_curv,
                 int period_steps);

/// Least-squares lag weights through the Moore-Penrose pseudoinverse of the
/// lagged residual matrix (minimum-norm under rank deficiency).
Vec fit_residual_ar(const Vec& residuals, int ar_order);

/// Baseline fit plus AR fit on the baseline residuals.
ForecastModel fit_model(const HistoryBuffer& hist, double gamma_asym, double gamma_curv,
                        int period_steps, int ar_order, double decay);

/// Tiled baseline over [hist.next_step(), +horizon) plus the geometrically
/// decayed residual correction
///   r_hat(tau) = decay^(tau-t) * a' [r(tau-1) ... r(tau-n)],
/// with predicted residuals feeding the recursion where actuals are not yet
/// available.  Output is clamped to >= 0 (signals are forecast as
/// magnitudes; callers restore the sign convention).
PowerSchedule predict(const ForecastModel& model, const HistoryBuffer& hist, int horizon);

/// One vehicle-day observation; steps are day-relative indices.
struct EvObservation {
  int t_arr = 0;
  int t_dep = 0;
  double q_init = 0.0;
  double q_des = 0.0;
};

struct EVParamEstimate {
  int t_arr = 0;
  int t_dep = 0;
  double q_init = 0.0;
  double q_des = 0.0;
  enum class Source { Observed, Predicted } source = Source::Predicted;
};

/// Empirical-mode estimates for arrival/departure/initial charge (1-step and
/// 1-kWh bins, ties to the earliest/lowest bin) and the conservative maximum
/// for the desired charge.  When `observed` is present (the vehicle already
/// arrived) it is returned verbatim as Observed.
EVParamEstimate estimate_ev_params(const std::vector<EvObservation>& history,
                                   const StorageParams& battery,
                                   const std::optional<EvObservation>& observed = {});

}  // namespace microgrid
