#pragma once

// Independent brute-force oracles used to freeze expected values in tests.
// Nothing here touches the solver implementation paths it checks.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>

namespace oracles {

/// Global minimum of 1/2 x'Px + q'x over a finite box by enumerating all 3^n
/// bound-activity patterns (0 free, 1 at lower, 2 at upper) and keeping the
/// best box-feasible stationary candidate.
inline double enumerate_box_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& up,
                               Eigen::VectorXd* arg_best = nullptr) {
  const int n = static_cast<int>(q.size());
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x(n), best_x(n);

  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;

  for (int code = 0; code < patterns; ++code) {
    int c = code;
    std::vector<int> digit(static_cast<std::size_t>(n));
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      digit[static_cast<std::size_t>(i)] = c % 3;
      c /= 3;
      if (digit[static_cast<std::size_t>(i)] == 0) free_idx.push_back(i);
    }
    for (int i = 0; i < n; ++i)
      x[i] = digit[static_cast<std::size_t>(i)] == 1 ? lo[i]
             : digit[static_cast<std::size_t>(i)] == 2 ? up[i]
                                                       : 0.0;

    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd pff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        const int ia = free_idx[static_cast<std::size_t>(a)];
        double dot = q[ia];
        for (int j = 0; j < n; ++j) {
          if (digit[static_cast<std::size_t>(j)] != 0) dot += p(ia, j) * x[j];
        }
        rhs[a] = -dot;
        for (int bcol = 0; bcol < nf; ++bcol)
          pff(a, bcol) = p(ia, free_idx[static_cast<std::size_t>(bcol)]);
      }
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(pff);
      Eigen::VectorXd xf = cod.solve(rhs);
      // stationarity must actually hold on this face
      if ((pff * xf - rhs).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()))
        continue;
      bool ok = true;
      for (int a = 0; a < nf; ++a) {
        const int ia = free_idx[static_cast<std::size_t>(a)];
        if (xf[a] < lo[ia] - 1e-9 || xf[a] > up[ia] + 1e-9) {
          ok = false;
          break;
        }
        x[ia] = xf[a];
      }
      if (!ok) continue;
    }

    const double obj = 0.5 * x.dot(p * x) + q.dot(x);
    if (obj < best) {
      best = obj;
      best_x = x;
    }
  }
  if (arg_best) *arg_best = best_x;
  return best;
}

/// Scalar soft threshold: argmin_x  w|x| + (x - v)^2.
inline double soft_threshold(double v, double half_w) {
  if (v > half_w) return v - half_w;
  if (v < -half_w) return v + half_w;
  return 0.0;
}

}  // namespace oracles
