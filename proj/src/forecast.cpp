#include "microgrid/forecast.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace microgrid {

HistoryBuffer::HistoryBuffer(int capacity) : capacity_(capacity) {
  if (capacity <= 0) throw std::invalid_argument("HistoryBuffer: capacity must be positive");
  values_.reserve(static_cast<std::size_t>(capacity));
}

void HistoryBuffer::append(std::int64_t step, double value) {
  if (!empty_ && step != next_step())
    throw std::invalid_argument("HistoryBuffer: steps must be consecutive");
  if (empty_) {
    start_ = step;
    empty_ = false;
  }
  values_.push_back(value);
  if (static_cast<int>(values_.size()) > capacity_) {
    values_.erase(values_.begin());
    ++start_;
  }
}

double HistoryBuffer::at_step(std::int64_t step) const {
  if (step < start_ || step >= next_step())
    throw std::out_of_range("HistoryBuffer: step outside buffer");
  return values_[static_cast<std::size_t>(step - start_)];
}

Vec fit_baseline(const HistoryBuffer& hist, double gamma_asym, double gamma_curv,
                 int period_steps) {
  if (period_steps <= 2) throw std::invalid_argument("fit_baseline: period too short");
  const int n = hist.size();
  if (n < 2 * period_steps)
    throw std::invalid_argument("fit_baseline: history must span at least two periods");
  if (gamma_asym < 0.0 || gamma_curv < 0.0)
    throw std::invalid_argument("fit_baseline: weights must be nonnegative");

  const auto& h = hist.data();
  std::vector<int> slot(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    slot[static_cast<std::size_t>(i)] =
        static_cast<int>(((hist.start_step() + i) % period_steps + period_steps) % period_steps);
  }

  // circular second-difference quadratic, scaled by the number of periods the
  // data covers so gamma_curv keeps its per-sample meaning
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(period_steps, period_steps);
  for (int s = 0; s < period_steps; ++s) {
    const int sm = (s - 1 + period_steps) % period_steps;
    const int sp = (s + 1) % period_steps;
    lap(s, sm) += 1.0;
    lap(s, s) += -2.0;
    lap(s, sp) += 1.0;
  }
  const double spans = static_cast<double>(n) / period_steps;
  const Eigen::MatrixXd smooth = spans * gamma_curv * (lap.transpose() * lap);

  // start from per-slot means
  Vec x = Vec::Zero(period_steps);
  Vec count = Vec::Zero(period_steps);
  for (int i = 0; i < n; ++i) {
    x[slot[static_cast<std::size_t>(i)]] += h[static_cast<std::size_t>(i)];
    count[slot[static_cast<std::size_t>(i)]] += 1.0;
  }
  for (int s = 0; s < period_steps; ++s) x[s] /= std::max(1.0, count[s]);

  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  for (int round = 0; round < 100; ++round) {
    bool changed = round == 0;
    for (int i = 0; i < n; ++i) {
      const double wi = x[slot[static_cast<std::size_t>(i)]] >= h[static_cast<std::size_t>(i)]
                            ? 1.0
                            : gamma_asym;
      if (wi != w[static_cast<std::size_t>(i)]) {
        w[static_cast<std::size_t>(i)] = wi;
        changed = true;
      }
    }
    if (!changed) break;

    Eigen::MatrixXd normal = smooth;
    Vec rhs = Vec::Zero(period_steps);
    for (int i = 0; i < n; ++i) {
      const int s = slot[static_cast<std::size_t>(i)];
      normal(s, s) += w[static_cast<std::size_t>(i)];
      rhs[s] += w[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
    }
    x = normal.ldlt().solve(rhs);
  }
  return x;
}

Vec fit_residual_ar(const Vec& residuals, int ar_order) {
  const int len = static_cast<int>(residuals.size());
  if (ar_order <= 0) throw std::invalid_argument("fit_residual_ar: order must be positive");
  if (len <= ar_order)
    throw std::invalid_argument("fit_residual_ar: need more residuals than lags");

  const int rows = len - ar_order;
  Eigen::MatrixXd m(rows, ar_order);
  Vec b(rows);
  for (int i = 0; i < rows; ++i) {
    b[i] = residuals[ar_order + i];
    for (int j = 0; j < ar_order; ++j) m(i, j) = residuals[ar_order + i - 1 - j];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  return cod.solve(b);
}

ForecastModel fit_model(const HistoryBuffer& hist, double gamma_asym, double gamma_curv,
                        int period_steps, int ar_order, double decay) {
  ForecastModel model;
  model.gamma_asym = gamma_asym;
  model.gamma_curv = gamma_curv;
  model.period_steps = period_steps;
  model.decay = decay;
  model.baseline = fit_baseline(hist, gamma_asym, gamma_curv, period_steps);

  const int n = hist.size();
  Vec resid(n);
  for (int i = 0; i < n; ++i) {
    const int s =
        static_cast<int>(((hist.start_step() + i) % period_steps + period_steps) % period_steps);
    resid[i] = hist.data()[static_cast<std::size_t>(i)] - model.baseline[s];
  }
  model.ar_weights = fit_residual_ar(resid, ar_order);
  return model;
}

PowerSchedule predict(const ForecastModel& model, const HistoryBuffer& hist, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("predict: horizon must be positive");
  const int n = static_cast<int>(model.ar_weights.size());
  const std::int64_t t0 = hist.next_step();
  const int period = model.period_steps;
  auto slot_of = [&](std::int64_t step) {
    return static_cast<int>((step % period + period) % period);
  };

  // residual lag window: actual residuals where history exists, predicted
  // (already decayed) residuals past the data edge
  std::vector<double> lag(static_cast<std::size_t>(n + horizon), 0.0);  // lag[i] = r(t0 - n + i)
  for (int i = 0; i < n; ++i) {
    const std::int64_t step = t0 - n + i;
    if (step >= hist.start_step() && step < hist.next_step())
      lag[static_cast<std::size_t>(i)] = hist.at_step(step) - model.baseline[slot_of(step)];
  }

  PowerSchedule out(horizon);
  double decay_pow = 1.0;
  for (int k = 0; k < horizon; ++k) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += model.ar_weights[j] * lag[static_cast<std::size_t>(n + k - 1 - j)];
    // the recursion propagates the raw AR prediction; the geometric decay
    // only damps the applied correction
    lag[static_cast<std::size_t>(n + k)] = acc;
    out[k] = std::max(0.0, model.baseline[slot_of(t0 + k)] + decay_pow * acc);
    decay_pow *= model.decay;
  }
  return out;
}

EVParamEstimate estimate_ev_params(const std::vector<EvObservation>& history,
                                   const StorageParams& battery,
                                   const std::optional<EvObservation>& observed) {
  if (observed) {
    EVParamEstimate est;
    est.t_arr = observed->t_arr;
    est.t_dep = observed->t_dep;
    est.q_init = observed->q_init;
    est.q_des = observed->q_des;
    est.source = EVParamEstimate::Source::Observed;
    return est;
  }
  if (history.empty())
    throw std::invalid_argument("estimate_ev_params: no history and no observation");

  auto mode_int = [](const std::vector<int>& xs) {
    std::map<int, int> counts;
    for (int x : xs) ++counts[x];
    int best = xs.front(), best_count = 0;
    for (const auto& [value, count] : counts) {  // ascending keys: ties go to the earliest
      if (count > best_count) {
        best = value;
        best_count = count;
      }
    }
    return best;
  };

  std::vector<int> arr, dep;
  arr.reserve(history.size());
  dep.reserve(history.size());
  for (const auto& o : history) {
    arr.push_back(o.t_arr);
    dep.push_back(o.t_dep);
  }

  // 1-kWh bins for the initial charge; the estimate is the mean of the
  // samples in the winning (lowest on ties) bin
  std::map<int, std::pair<double, int>> bins;
  for (const auto& o : history) {
    auto& [sum, count] = bins[static_cast<int>(std::floor(o.q_init))];
    sum += o.q_init;
    ++count;
  }
  int best_count = 0;
  double q_init_est = history.front().q_init;
  for (const auto& [bin, sc] : bins) {
    if (sc.second > best_count) {
      best_count = sc.second;
      q_init_est = sc.first / sc.second;
    }
  }

  double q_des_est = 0.0;
  for (const auto& o : history) q_des_est = std::max(q_des_est, o.q_des);

  EVParamEstimate est;
  est.t_arr = mode_int(arr);
  est.t_dep = std::max(mode_int(dep), est.t_arr + 1);
  const double lo = battery.q_min_frac * battery.q_cap;
  const double hi = battery.q_max_frac * battery.q_cap;
  est.q_init = std::clamp(q_init_est, lo, hi);
  est.q_des = std::clamp(q_des_est, lo, hi);
  est.source = EVParamEstimate::Source::Predicted;
  return est;
}

}  // namespace microgrid
