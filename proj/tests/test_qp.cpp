#include "doctest.h"

#include "microgrid/qp.hpp"
#include "microgrid/rng.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

using namespace microgrid;
using qp::CanonicalQP;
using qp::SolveStatus;

namespace {

CanonicalQP dense_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                     const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& lo, const Eigen::VectorXd& up) {
  CanonicalQP out;
  out.P = p.sparseView();
  out.q = q;
  out.A = a.sparseView();
  out.b = b;
  out.lower = lo;
  out.upper = up;
  return out;
}

CanonicalQP unconstrained(const Eigen::MatrixXd& p, const Eigen::VectorXd& q) {
  const auto n = q.size();
  return dense_qp(p, q, Eigen::MatrixXd(0, n), Eigen::VectorXd(0),
                  Eigen::VectorXd::Constant(n, -qp::kInf), Eigen::VectorXd::Constant(n, qp::kInf));
}

double kkt_stationarity(const CanonicalQP& prob, const qp::QPSolution& sol) {
  Eigen::VectorXd r = prob.P * sol.x + prob.q + sol.z;
  if (prob.A.rows() > 0) r += prob.A.transpose() * sol.y;
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("scalar quadratic: minimize (x-3)^2") {
  Eigen::MatrixXd p(1, 1);
  p << 2.0;
  Eigen::VectorXd q(1);
  q << -6.0;
  auto sol = qp::solve_qp(unconstrained(p, q));
  REQUIRE(sol.status == SolveStatus::Solved);
  CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("active bound: minimize x^2 subject to x >= 2") {
  Eigen::MatrixXd p(1, 1);
  p << 2.0;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  auto prob = dense_qp(p, q, Eigen::MatrixXd(0, 1), Eigen::VectorXd(0),
                       Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, qp::kInf));
  auto sol = qp::solve_qp(prob);
  REQUIRE(sol.status == SolveStatus::Solved);
  CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("equality-constrained 2x2 against a dense KKT solve") {
  // minimize (x1-1)^2 + (x2-2)^2 subject to x1 + x2 = 0
  Eigen::MatrixXd p = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q(2);
  q << -2.0, -4.0;
  Eigen::MatrixXd a(1, 2);
  a << 1.0, 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(1);

  // oracle: solve the 3x3 KKT system directly
  Eigen::MatrixXd kkt(3, 3);
  kkt << 2, 0, 1, 0, 2, 1, 1, 1, 0;
  Eigen::Vector3d rhs(2, 4, 0);
  Eigen::Vector3d expect = kkt.fullPivLu().solve(rhs);
  CHECK(expect[0] == doctest::Approx(-0.5));
  CHECK(expect[1] == doctest::Approx(0.5));

  auto prob = dense_qp(p, q, a, b, Eigen::VectorXd::Constant(2, -qp::kInf),
                       Eigen::VectorXd::Constant(2, qp::kInf));
  auto sol = qp::solve_qp(prob);
  REQUIRE(sol.status == SolveStatus::Solved);
  CHECK(sol.x[0] == doctest::Approx(expect[0]).epsilon(1e-5));
  CHECK(sol.x[1] == doctest::Approx(expect[1]).epsilon(1e-5));
}

TEST_CASE("infeasible bounds are flagged in presolve") {
  Eigen::MatrixXd p(1, 1);
  p << 2.0;
  auto prob = dense_qp(p, Eigen::VectorXd::Zero(1), Eigen::MatrixXd(0, 1), Eigen::VectorXd(0),
                       Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0));
  CHECK(qp::solve_qp(prob).status == SolveStatus::Infeasible);
}

TEST_CASE("equality/bound conflict is detected") {
  // x = 3 with box [0, 1]
  Eigen::MatrixXd p(1, 1);
  p << 2.0;
  Eigen::MatrixXd a(1, 1);
  a << 1.0;
  Eigen::VectorXd b(1);
  b << 3.0;
  auto prob = dense_qp(p, Eigen::VectorXd::Zero(1), a, b, Eigen::VectorXd::Zero(1),
                       Eigen::VectorXd::Ones(1));
  auto sol = qp::solve_qp(prob);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("l1_to_qp") {
  SUBCASE("zero weight leaves the optimum unchanged") {
    Eigen::MatrixXd p(1, 1);
    p << 2.0;
    Eigen::VectorXd q(1);
    q << -2.0;  // (x-1)^2
    auto base = dense_qp(p, q, Eigen::MatrixXd(0, 1), Eigen::VectorXd(0),
                         Eigen::VectorXd::Constant(1, -5.0), Eigen::VectorXd::Constant(1, 5.0));
    qp::SpMat d(1, 1);
    d.insert(0, 0) = 1.0;
    auto ext = qp::l1_to_qp(Eigen::VectorXd::Zero(1), d, base);
    auto sol_base = qp::solve_qp(base);
    auto sol_ext = qp::solve_qp(ext);
    CHECK(sol_ext.objective == doctest::Approx(sol_base.objective).epsilon(1e-6));
    CHECK(sol_ext.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  }

  SUBCASE("|x| + (x-1)^2 soft-thresholds to 0.5") {
    const double expect = oracles::soft_threshold(1.0, 0.5);
    REQUIRE(expect == doctest::Approx(0.5));
    Eigen::MatrixXd p(1, 1);
    p << 2.0;
    Eigen::VectorXd q(1);
    q << -2.0;
    auto base = unconstrained(p, q);
    qp::SpMat d(1, 1);
    d.insert(0, 0) = 1.0;
    auto ext = qp::l1_to_qp(Eigen::VectorXd::Ones(1), d, base);
    auto sol = qp::solve_qp(ext);
    REQUIRE(sol.status == SolveStatus::Solved);
    CHECK(sol.x[0] == doctest::Approx(expect).epsilon(1e-5));
  }

  SUBCASE("2|x| pinned at x = 3 costs 6") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 1);
    Eigen::MatrixXd a(1, 1);
    a << 1.0;
    Eigen::VectorXd b(1);
    b << 3.0;
    auto base = dense_qp(p, Eigen::VectorXd::Zero(1), a, b,
                         Eigen::VectorXd::Constant(1, -qp::kInf),
                         Eigen::VectorXd::Constant(1, qp::kInf));
    qp::SpMat d(1, 1);
    d.insert(0, 0) = 1.0;
    auto ext = qp::l1_to_qp(Eigen::VectorXd::Constant(1, 2.0), d, base);
    auto sol = qp::solve_qp(ext);
    REQUIRE(sol.status == SolveStatus::Solved);
    CHECK(sol.objective == doctest::Approx(6.0).epsilon(1e-5));
  }
}

TEST_CASE("range_to_qp") {
  SUBCASE("zero weight leaves the optimum unchanged") {
    Eigen::MatrixXd p = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd q(2);
    q << -2.0, 4.0;  // (x1-1)^2 + (x2+2)^2
    auto base = unconstrained(p, q);
    auto ext = qp::range_to_qp(0.0, {0, 1}, base);
    auto sol = qp::solve_qp(ext);
    REQUIRE(sol.status == SolveStatus::Solved);
    CHECK(sol.objective == doctest::Approx(qp::solve_qp(base).objective).epsilon(1e-6));
  }

  SUBCASE("pinned vector pays its range") {
    Eigen::VectorXd vals(3);
    vals << 1.0, 4.0, 2.0;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
    auto base = dense_qp(p, Eigen::VectorXd::Zero(3), Eigen::MatrixXd(0, 3), Eigen::VectorXd(0),
                         vals, vals);
    auto ext = qp::range_to_qp(1.0, {0, 1, 2}, base);
    auto sol = qp::solve_qp(ext);
    REQUIRE(sol.status == SolveStatus::Solved);
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-5));
  }

  SUBCASE("heavy range weight collapses toward a constant") {
    // minimize 10*range(p) + sum (p_t - t)^2, targets (0, 1, 2)
    Eigen::MatrixXd p = 2.0 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd q(3);
    q << 0.0, -2.0, -4.0;
    auto base = unconstrained(p, q);
    auto ext = qp::range_to_qp(10.0, {0, 1, 2}, base);
    auto sol = qp::solve_qp(ext);
    REQUIRE(sol.status == SolveStatus::Solved);

    // oracle: line search over the common constant value
    double best = qp::kInf;
    for (double c = -1.0; c <= 3.0; c += 1e-4) {
      const double obj = (c - 0.0) * (c - 0.0) + (c - 1.0) * (c - 1.0) + (c - 2.0) * (c - 2.0);
      best = std::min(best, obj);
    }
    const double obj_with_const = sol.objective + 0.0 + 1.0 + 4.0;  // add sum t^2 constant
    CHECK(obj_with_const == doctest::Approx(best).epsilon(1e-3));
    CHECK(std::abs(sol.x[0] - sol.x[2]) < 1e-3);
    CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("oracle equivalence on 200 random box QPs") {
  Rng rng(77);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 6);
    Eigen::MatrixXd bmat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) bmat(i, j) = rng.normal();
    Eigen::MatrixXd p = bmat.transpose() * bmat;
    if (rng.uniform() < 0.6) p += rng.uniform(0.1, 2.0) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd q(n), lo(n), up(n);
    for (int i = 0; i < n; ++i) {
      q[i] = rng.normal(0, 2);
      const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
      lo[i] = std::min(a, b);
      up[i] = std::max(a, b);
    }

    const double oracle = oracles::enumerate_box_qp(p, q, lo, up);
    auto prob = dense_qp(p, q, Eigen::MatrixXd(0, n), Eigen::VectorXd(0), lo, up);
    auto sol = qp::solve_qp(prob);
    REQUIRE(sol.status == SolveStatus::Solved);
    ++solved;
    CHECK(sol.objective == doctest::Approx(oracle).epsilon(1e-5).scale(1.0));

    // KKT checks on every solved instance
    CHECK(sol.primal_residual <= 1e-5);
    CHECK(kkt_stationarity(prob, sol) <= 1e-5);
  }
  CHECK(solved == 200);
}

TEST_CASE("KKT residuals on equality-constrained random instances") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(2, 8);
    const int m = rng.uniform_int(1, n - 1);
    Eigen::MatrixXd bmat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) bmat(i, j) = rng.normal();
    Eigen::MatrixXd p = bmat.transpose() * bmat + Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd a(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    Eigen::VectorXd x_feas(n);
    for (int i = 0; i < n; ++i) x_feas[i] = rng.uniform(-1, 1);
    Eigen::VectorXd b = a * x_feas;  // guarantees feasibility
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i) q[i] = rng.normal();
    Eigen::VectorXd lo = x_feas.array() - rng.uniform(0.5, 3.0);
    Eigen::VectorXd up = x_feas.array() + rng.uniform(0.5, 3.0);

    auto prob = dense_qp(p, q, a, b, lo, up);
    auto sol = qp::solve_qp(prob);
    REQUIRE(sol.status == SolveStatus::Solved);
    CHECK((prob.A * sol.x - prob.b).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(kkt_stationarity(prob, sol) <= 1e-5);
  }
}

TEST_CASE("warm start preserves the fixed point") {
  Rng rng(1234);
  const int n = 5;
  Eigen::MatrixXd bmat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) bmat(i, j) = rng.normal();
  Eigen::MatrixXd p = bmat.transpose() * bmat + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q(n), lo(n), up(n);
  for (int i = 0; i < n; ++i) {
    q[i] = rng.normal();
    lo[i] = -1.0;
    up[i] = 1.0;
  }
  auto prob = dense_qp(p, q, Eigen::MatrixXd(0, n), Eigen::VectorXd(0), lo, up);

  qp::QpSolver solver(prob);
  auto first = solver.solve();
  REQUIRE(first.status == SolveStatus::Solved);
  auto second = solver.solve();  // warm-started from its own solution
  REQUIRE(second.status == SolveStatus::Solved);
  CHECK(second.iterations <= 5);
  CHECK((second.x - first.x).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("refresh reuses factorizations for cost/bound updates") {
  Eigen::MatrixXd p = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q(2);
  q << -2.0, -4.0;
  auto prob = dense_qp(p, q, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0),
                       Eigen::VectorXd::Constant(2, -10.0), Eigen::VectorXd::Constant(2, 10.0));
  qp::QpSolver solver(prob);
  auto s1 = solver.solve();
  CHECK(s1.x[0] == doctest::Approx(1.0).epsilon(1e-5));

  auto prob2 = prob;
  prob2.q << -6.0, -4.0;
  CHECK(solver.refresh(prob2) == qp::QpSolver::Refresh::VectorsOnly);
  auto s2 = solver.solve();
  CHECK(s2.x[0] == doctest::Approx(3.0).epsilon(1e-5));

  auto prob3 = prob2;
  prob3.P.coeffRef(0, 0) = 4.0;
  CHECK(solver.refresh(prob3) == qp::QpSolver::Refresh::Refactor);
  auto s3 = solver.solve();
  CHECK(s3.x[0] == doctest::Approx(1.5).epsilon(1e-5));
}
