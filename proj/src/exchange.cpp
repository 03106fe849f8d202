#include "microgrid/exchange.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace microgrid {

namespace {

/// Mean of the agent schedules in fixed index order.
PowerSchedule fixed_order_mean(const std::vector<PowerSchedule>& p, int t) {
  PowerSchedule acc = PowerSchedule::Zero(t);
  for (const auto& pi : p) acc += pi;
  return acc / static_cast<double>(p.size());
}

}  // namespace

std::pair<double, double> residuals(const ExchangeState& cur, const ExchangeState& prev) {
  if (cur.p.size() != prev.p.size())
    throw std::invalid_argument("residuals: agent count mismatch");
  const double r = cur.p_bar.norm();
  double s2 = 0.0;
  for (std::size_t i = 0; i < cur.p.size(); ++i) {
    s2 += ((cur.p[i] - cur.p_bar) - (prev.p[i] - prev.p_bar)).squaredNorm();
  }
  return {r, cur.rho * std::sqrt(s2)};
}

ExchangeState rescale_rho(ExchangeState state, double new_rho) {
  if (!(new_rho > 0.0)) throw std::invalid_argument("rescale_rho: rho must be positive");
  state.u *= state.rho / new_rho;
  state.rho = new_rho;
  return state;
}

ExchangeResult run_exchange(std::span<Agent* const> agents, std::optional<ExchangeState> init,
                            const ExchangeSettings& settings) {
  const int n = static_cast<int>(agents.size());
  if (n < 2) throw std::invalid_argument("run_exchange: need at least 2 agents");
  const int t = agents.front()->horizon();
  for (const Agent* a : agents) {
    if (a->horizon() != t)
      throw std::invalid_argument("run_exchange: agents disagree on the horizon");
  }

  ExchangeState st;
  if (init) {
    st = std::move(*init);
    if (static_cast<int>(st.p.size()) != n || st.u.size() != t)
      throw std::invalid_argument("run_exchange: init state shape mismatch");
  } else {
    st.p.assign(static_cast<std::size_t>(n), PowerSchedule::Zero(t));
    st.u = PowerSchedule::Zero(t);
  }
  st.rho = settings.rho;
  st.p_bar = fixed_order_mean(st.p, t);
  st.residual_history.clear();

  const double scale = std::sqrt(static_cast<double>(n) * t);
  const double eps_pri = settings.eps_pri > 0.0 ? settings.eps_pri : 1e-3 * scale;
  const double eps_dual = settings.eps_dual > 0.0 ? settings.eps_dual : 1e-3 * scale;

#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
  int threads = settings.parallelism <= 0 ? max_threads : settings.parallelism;
  threads = std::min(threads, n);
#else
  const int threads = 1;
#endif

  std::vector<PowerSchedule> p_next(static_cast<std::size_t>(n));
  std::vector<PowerSchedule> dev_prev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dev_prev[static_cast<std::size_t>(i)] = st.p[static_cast<std::size_t>(i)] - st.p_bar;

  ExchangeStatus status = ExchangeStatus::MaxIterations;

  for (int k = 0; k < settings.max_iter; ++k) {
    std::string failure;

    if (threads > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
      for (int i = 0; i < n; ++i) {
        try {
          const PowerSchedule v = st.p[static_cast<std::size_t>(i)] - st.p_bar - st.u;
          p_next[static_cast<std::size_t>(i)] = agents[static_cast<std::size_t>(i)]->prox(v, st.rho);
        } catch (const std::exception& e) {
#pragma omp critical
          if (failure.empty())
            failure = std::string("agent '") + agents[static_cast<std::size_t>(i)]->name() +
                      "' failed: " + e.what();
        }
      }
#endif
    } else {
      for (int i = 0; i < n; ++i) {
        try {
          const PowerSchedule v = st.p[static_cast<std::size_t>(i)] - st.p_bar - st.u;
          p_next[static_cast<std::size_t>(i)] = agents[static_cast<std::size_t>(i)]->prox(v, st.rho);
        } catch (const std::exception& e) {
          failure = std::string("agent '") + agents[static_cast<std::size_t>(i)]->name() +
                    "' failed: " + e.what();
          break;
        }
      }
    }
    if (!failure.empty()) throw std::runtime_error("run_exchange: " + failure);

    st.p.swap(p_next);
    st.p_bar = fixed_order_mean(st.p, t);
    st.u += st.p_bar;
    st.k += 1;

    const double r_norm = st.p_bar.norm();
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const PowerSchedule dev = st.p[static_cast<std::size_t>(i)] - st.p_bar;
      s2 += (dev - dev_prev[static_cast<std::size_t>(i)]).squaredNorm();
      dev_prev[static_cast<std::size_t>(i)] = dev;
    }
    const double s_norm = st.rho * std::sqrt(s2);
    st.residual_history.emplace_back(r_norm, s_norm);

    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      status = ExchangeStatus::Converged;
      break;
    }

    if (settings.rho_adapt.enabled && k > 0) {
      const double f = settings.rho_adapt.factor;
      if (r_norm > settings.rho_adapt.ratio * s_norm) {
        st = rescale_rho(std::move(st), st.rho * f);
      } else if (s_norm > settings.rho_adapt.ratio * r_norm) {
        st = rescale_rho(std::move(st), st.rho / f);
      }
    }
  }

  return {std::move(st), status};
}

}  // namespace microgrid
