#include "doctest.h"

#include "microgrid/exchange.hpp"
#include "microgrid/qp.hpp"
#include "microgrid/rng.hpp"
#include "toy_agents.hpp"

#include <cstring>

using namespace microgrid;
using toys::QuadraticAgent;

namespace {

ExchangeSettings tight_settings(double eps = 1e-7) {
  ExchangeSettings s;
  s.eps_pri = eps;
  s.eps_dual = eps;
  s.max_iter = 5000;
  s.rho = 1.0;
  return s;
}

}  // namespace

TEST_CASE("two quadratic agents balance at the analytic optimum") {
  // f1 = (p-4)^2, f2 = (p+2)^2 subject to p1 + p2 = 0.
  // KKT: 2(p1-4) = -2(p2+2) = y*, balance gives p1 = 3, p2 = -3.
  QuadraticAgent a1("a", 4.0, 1.0, 1);
  QuadraticAgent a2("b", -2.0, 1.0, 1);
  std::vector<Agent*> agents = {&a1, &a2};
  auto res = run_exchange(agents, {}, tight_settings());
  REQUIRE(res.status == ExchangeStatus::Converged);
  const double p1 = res.state.p[0][0], p2 = res.state.p[1][0];
  CHECK(p1 == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(p2 == doctest::Approx(-3.0).epsilon(1e-4));
  CHECK(std::abs(p1 + p2) <= 2e-7);
  // stationarity: both gradients equal the (negated) balance multiplier
  CHECK(2 * (p1 - 4) == doctest::Approx(2 * (p2 + 2)).epsilon(1e-3));
  // the unscaled price approximates the balance multiplier y* = -2(p1*-4) = 2
  CHECK(res.state.rho * res.state.u[0] == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("pre-balanced targets converge immediately from a warm start") {
  const int t = 2;
  QuadraticAgent a1("a", 1.0, 1.0, t);
  QuadraticAgent a2("b", 2.0, 1.0, t);
  QuadraticAgent a3("c", -3.0, 1.0, t);
  std::vector<Agent*> agents = {&a1, &a2, &a3};

  ExchangeState init;
  init.p = {PowerSchedule::Constant(t, 1.0), PowerSchedule::Constant(t, 2.0),
            PowerSchedule::Constant(t, -3.0)};
  init.u = PowerSchedule::Zero(t);

  auto res = run_exchange(agents, init, tight_settings());
  REQUIRE(res.status == ExchangeStatus::Converged);
  CHECK(res.state.k <= 2);
  CHECK(res.state.p[0][0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.state.p[1][0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.state.p[2][0] == doctest::Approx(-3.0).epsilon(1e-6));

  // cold start also reaches the same fixed point
  QuadraticAgent b1("a", 1.0, 1.0, t), b2("b", 2.0, 1.0, t), b3("c", -3.0, 1.0, t);
  std::vector<Agent*> cold = {&b1, &b2, &b3};
  auto res2 = run_exchange(cold, {}, tight_settings());
  REQUIRE(res2.status == ExchangeStatus::Converged);
  CHECK(res2.state.p[0][0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("residuals") {
  ExchangeState prev, cur;
  const int t = 1;
  prev.p = {PowerSchedule::Constant(t, 1.0), PowerSchedule::Constant(t, 1.0)};
  prev.p_bar = PowerSchedule::Constant(t, 1.0);
  prev.rho = 2.0;
  cur = prev;

  SUBCASE("fixed point has zero residuals") {
    cur.p_bar = PowerSchedule::Zero(t);
    prev.p_bar = PowerSchedule::Zero(t);
    auto [r, s] = residuals(cur, prev);
    CHECK(r == doctest::Approx(0.0));
    CHECK(s == doctest::Approx(0.0));
  }

  SUBCASE("mean of ones has unit primal residual") {
    auto [r, s] = residuals(cur, prev);
    CHECK(r == doctest::Approx(1.0));
    CHECK(s == doctest::Approx(0.0));
  }

  SUBCASE("deviation change scales with rho") {
    // deviations change by (0.5, -0.5): s = rho * sqrt(0.5)
    cur.p = {PowerSchedule::Constant(t, 1.5), PowerSchedule::Constant(t, 0.5)};
    cur.p_bar = PowerSchedule::Constant(t, 1.0);
    auto [r, s] = residuals(cur, prev);
    CHECK(s == doctest::Approx(2.0 * std::sqrt(0.5)));
  }
}

TEST_CASE("rho rescaling preserves the unscaled price") {
  ExchangeState st;
  st.p = {PowerSchedule::Constant(1, 1.0), PowerSchedule::Constant(1, -1.0)};
  st.p_bar = PowerSchedule::Zero(1);
  st.rho = 1.0;
  st.u = PowerSchedule::Constant(1, 8.0);

  SUBCASE("halving rho doubles u") {
    auto out = rescale_rho(st, 0.5);
    CHECK(out.u[0] == doctest::Approx(16.0));
    CHECK(out.rho == doctest::Approx(0.5));
  }
  SUBCASE("identity") {
    auto out = rescale_rho(st, 1.0);
    CHECK(out.u[0] == doctest::Approx(8.0));
  }
  SUBCASE("rho 1 -> 4 quarters u") {
    auto out = rescale_rho(st, 4.0);
    CHECK(out.u[0] == doctest::Approx(2.0));
  }
  SUBCASE("y = rho * u is invariant elementwise") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
      ExchangeState s2 = st;
      s2.u = PowerSchedule::Constant(1, rng.uniform(-5, 5));
      s2.rho = rng.uniform(0.1, 4.0);
      const double y = s2.rho * s2.u[0];
      const double nr = rng.uniform(0.1, 4.0);
      auto out = rescale_rho(s2, nr);
      CHECK(out.rho * out.u[0] == doctest::Approx(y).epsilon(1e-12));
    }
  }
}

TEST_CASE("a fixed point survives rho rescaling") {
  QuadraticAgent a1("a", 4.0, 1.0, 1);
  QuadraticAgent a2("b", -2.0, 1.0, 1);
  std::vector<Agent*> agents = {&a1, &a2};
  auto res = run_exchange(agents, {}, tight_settings(1e-9));
  REQUIRE(res.status == ExchangeStatus::Converged);

  auto rescaled = rescale_rho(res.state, res.state.rho * 0.5);
  ExchangeSettings s = tight_settings(1e-7);
  s.rho = rescaled.rho;
  s.max_iter = 1;
  auto res2 = run_exchange(agents, rescaled, s);
  auto [r, ssn] = res2.state.residual_history.back();
  CHECK(r <= 1e-7);
  CHECK(ssn <= 1e-6);
}

TEST_CASE("random convex toys match a stacked QP oracle") {
  Rng rng(2718);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = rng.uniform_int(2, 5);
    const int t = rng.uniform_int(1, 4);
    std::vector<QuadraticAgent> storage;
    storage.reserve(static_cast<std::size_t>(n));
    double offset = rng.uniform(2.0, 6.0) * (rng.uniform() < 0.5 ? 1.0 : -1.0);
    for (int i = 0; i < n; ++i) {
      PowerSchedule target(t);
      Vec weight(t);
      PowerSchedule lo(t), hi(t);
      for (int j = 0; j < t; ++j) {
        target[j] = rng.uniform(-3, 3) + offset / n;
        weight[j] = rng.uniform(0.5, 4.0);
        lo[j] = -12.0;
        hi[j] = 12.0;
      }
      storage.emplace_back("agent" + std::to_string(i), target, weight, lo, hi);
    }
    std::vector<Agent*> agents;
    for (auto& a : storage) agents.push_back(&a);

    ExchangeSettings s;
    s.eps_pri = 1e-5;
    s.eps_dual = 1e-5;
    s.max_iter = 2000;
    s.rho = 2.0;
    auto res = run_exchange(agents, {}, s);
    REQUIRE(res.status == ExchangeStatus::Converged);

    // balance at termination
    PowerSchedule total = PowerSchedule::Zero(t);
    for (const auto& p : res.state.p) total += p;
    CHECK(total.norm() <=
          static_cast<double>(n) * res.state.residual_history.back().first + 1e-12);

    // independent stacked QP oracle
    qp::QpBuilder b;
    for (int i = 0; i < n; ++i) {
      const auto& ag = storage[static_cast<std::size_t>(i)];
      const int p0 = b.add_vars(t, -12.0, 12.0);
      for (int j = 0; j < t; ++j) {
        b.add_quad(p0 + j, p0 + j, 2.0 * ag.weight()[j]);
        b.add_lin(p0 + j, -2.0 * ag.weight()[j] * ag.target()[j]);
      }
    }
    for (int j = 0; j < t; ++j) {
      const int row = b.add_eq_row(0.0);
      for (int i = 0; i < n; ++i) b.eq_coeff(row, i * t + j, 1.0);
    }
    qp::SolverSettings qs;
    qs.eps_abs = 1e-9;
    auto oracle = qp::solve_qp(b.build(), qs);
    REQUIRE(oracle.status == qp::SolveStatus::Solved);

    double obj_exchange = 0.0, const_term = 0.0;
    for (int i = 0; i < n; ++i) {
      obj_exchange += storage[static_cast<std::size_t>(i)].local_cost(
          res.state.p[static_cast<std::size_t>(i)]);
      const auto& ag = storage[static_cast<std::size_t>(i)];
      const_term += (ag.weight().array() * ag.target().array().square()).sum();
    }
    const double obj_oracle = oracle.objective + const_term;
    CHECK(std::abs(obj_exchange - obj_oracle) <= 1e-4 * std::max(1.0, std::abs(obj_oracle)));
  }
}

TEST_CASE("serial and parallel runs produce bit-identical iterates") {
  auto build_agents = [](std::vector<QuadraticAgent>& store) {
    store.clear();
    store.reserve(4);
    store.emplace_back("a", 3.0, 1.0, 3);
    store.emplace_back("b", -1.0, 2.0, 3);
    store.emplace_back("c", -2.5, 0.7, 3);
    store.emplace_back("d", 1.5, 1.4, 3);
    std::vector<Agent*> out;
    for (auto& a : store) out.push_back(&a);
    return out;
  };

  std::vector<QuadraticAgent> s1, s2;
  auto a1 = build_agents(s1);
  auto a2 = build_agents(s2);

  ExchangeSettings serial = tight_settings();
  serial.parallelism = 1;
  ExchangeSettings parallel = tight_settings();
  parallel.parallelism = 0;

  auto r1 = run_exchange(a1, {}, serial);
  auto r2 = run_exchange(a2, {}, parallel);
  REQUIRE(r1.state.k == r2.state.k);
  for (std::size_t i = 0; i < r1.state.p.size(); ++i) {
    REQUIRE(r1.state.p[i].size() == r2.state.p[i].size());
    CHECK(std::memcmp(r1.state.p[i].data(), r2.state.p[i].data(),
                      sizeof(double) * static_cast<std::size_t>(r1.state.p[i].size())) == 0);
  }
  CHECK(std::memcmp(r1.state.u.data(), r2.state.u.data(),
                    sizeof(double) * static_cast<std::size_t>(r1.state.u.size())) == 0);
}

TEST_CASE("agent failures abort with the agent named") {
  class FailingAgent : public Agent {
   public:
    FailingAgent() : Agent("doomed") {}
    int horizon() const override { return 1; }
    PowerSchedule prox(const PowerSchedule&, double) override {
      throw std::runtime_error("boom");
    }
    AgentEncoding encoding() const override { return {}; }
    double local_cost(const PowerSchedule&) const override { return 0; }
    AgentPlan plan_from(const Vec& x) const override { return {x, {}, {}, {}}; }
  };

  QuadraticAgent ok("ok", 1.0, 1.0, 1);
  FailingAgent bad;
  std::vector<Agent*> agents = {&ok, &bad};
  ExchangeSettings s = tight_settings();
  s.parallelism = 1;
  CHECK_THROWS_WITH_AS(run_exchange(agents, {}, s),
                       doctest::Contains("doomed"), std::runtime_error);
}
