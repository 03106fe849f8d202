#include "microgrid/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace microgrid::qp {

namespace {

using Trip = Eigen::Triplet<double>;

void append_triplets(const SpMat& M, int row_off, int col_off, std::vector<Trip>& out) {
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      out.emplace_back(static_cast<int>(it.row()) + row_off,
                       static_cast<int>(it.col()) + col_off, it.value());
    }
  }
}

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

void CanonicalQP::validate() const {
  const Eigen::Index n = q.size();
  if (P.rows() != n || P.cols() != n)
    throw std::invalid_argument("CanonicalQP: P must be n x n");
  if (lower.size() != n || upper.size() != n)
    throw std::invalid_argument("CanonicalQP: bounds must have length n");
  if (A.cols() != n && A.rows() != 0)
    throw std::invalid_argument("CanonicalQP: A must have n columns");
  if (b.size() != A.rows())
    throw std::invalid_argument("CanonicalQP: b must match A rows");
  SpMat Pt = SpMat(P.transpose());
  SpMat diff = P - Pt;
  double asym = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
  double pmax = 0.0;
  for (int k = 0; k < P.outerSize(); ++k)
    for (SpMat::InnerIterator it(P, k); it; ++it) pmax = std::max(pmax, std::abs(it.value()));
  if (asym > 1e-9 * (1.0 + pmax)) throw std::invalid_argument("CanonicalQP: P must be symmetric");
}

// ---------------------------------------------------------------------------
// QpSolver

void QpSolver::setup(const CanonicalQP& prob, const SolverSettings& s) {
  prob.validate();
  cfg_ = s;
  n_ = prob.num_vars();
  m_ = prob.num_eq();
  rho_bar_ = cfg_.rho;

  P_orig_ = prob.P;
  A_orig_ = prob.A;
  q_orig_ = prob.q;
  b_orig_ = prob.b;
  lo_orig_ = prob.lower;
  up_orig_ = prob.upper;

  P_ = prob.P;
  A_ = prob.A;
  q_ = prob.q;
  l_.resize(m_ + n_);
  u_.resize(m_ + n_);
  l_.head(m_) = prob.b;
  u_.head(m_) = prob.b;
  l_.tail(n_) = prob.lower;
  u_.tail(n_) = prob.upper;

  compute_scaling();
  assign_row_steps();

  // KKT pattern: upper triangle of [P + sigma*I, C'; C, -1/rho] with
  // C = [A; I].  The full diagonal is always structurally present.
  std::vector<Trip> trips;
  trips.reserve(P_.nonZeros() + A_.nonZeros() + 2 * (n_ + m_));
  for (int k = 0; k < P_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(P_, k); it; ++it) {
      if (it.row() <= it.col()) trips.emplace_back(it.row(), it.col(), 0.0);
    }
  }
  for (Eigen::Index j = 0; j < n_; ++j) trips.emplace_back(j, j, 0.0);
  for (int k = 0; k < A_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A_, k); it; ++it)
      trips.emplace_back(it.col(), n_ + it.row(), 0.0);
  }
  for (Eigen::Index i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, 0.0);
  for (Eigen::Index j = 0; j < n_; ++j) trips.emplace_back(j, n_ + m_ + j, 0.0);
  for (Eigen::Index j = 0; j < n_; ++j) trips.emplace_back(n_ + m_ + j, n_ + m_ + j, 0.0);
  kkt_.resize(n_ + m_ + n_, n_ + m_ + n_);
  kkt_.setFromTriplets(trips.begin(), trips.end());
  kkt_.makeCompressed();

  build_kkt_values();
  ldlt_.analyzePattern(kkt_);
  ldlt_.factorize(kkt_);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error("QpSolver: KKT factorization failed");
  pattern_ready_ = true;
  have_iterate_ = false;
}

bool QpSolver::try_update(const CanonicalQP& prob) {
  if (!pattern_ready_) return false;
  if (prob.num_vars() != n_ || prob.num_eq() != m_) return false;
  auto same_pattern = [](const SpMat& a, const SpMat& b) {
    if (a.nonZeros() != b.nonZeros()) return false;
    if (!std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, b.outerIndexPtr()))
      return false;
    return std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr());
  };
  if (!same_pattern(prob.P, P_orig_) || !same_pattern(prob.A, A_orig_)) return false;

  P_orig_ = prob.P;
  A_orig_ = prob.A;
  q_orig_ = prob.q;
  b_orig_ = prob.b;
  lo_orig_ = prob.lower;
  up_orig_ = prob.upper;

  P_ = prob.P;
  A_ = prob.A;
  q_ = prob.q;
  l_.head(m_) = prob.b;
  u_.head(m_) = prob.b;
  l_.tail(n_) = prob.lower;
  u_.tail(n_) = prob.upper;

  compute_scaling();
  assign_row_steps();
  build_kkt_values();
  ldlt_.factorize(kkt_);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error("QpSolver: KKT refactorization failed");
  return true;
}

QpSolver::Refresh QpSolver::refresh(const CanonicalQP& prob, const SolverSettings& s) {
  if (!pattern_ready_) {
    setup(prob, s);
    return Refresh::Setup;
  }
  auto same_matrix = [](const SpMat& a, const SpMat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
    if (!std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, b.outerIndexPtr()))
      return false;
    if (!std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr()))
      return false;
    return std::equal(a.valuePtr(), a.valuePtr() + a.nonZeros(), b.valuePtr());
  };
  const bool sizes_ok = prob.num_vars() == n_ && prob.num_eq() == m_;
  if (sizes_ok && same_matrix(prob.P, P_orig_) && same_matrix(prob.A, A_orig_)) {
    set_linear_cost(prob.q);
    set_bounds(prob.b, prob.lower, prob.upper);
    return Refresh::VectorsOnly;
  }
  if (try_update(prob)) return Refresh::Refactor;
  setup(prob, s);
  return Refresh::Setup;
}

void QpSolver::compute_scaling() {
  d_ = Vec::Ones(n_);
  e_ = Vec::Ones(m_ + n_);
  c_ = 1.0;
  if (!cfg_.scaling) {
    // still apply stored-data copies unscaled
    return;
  }

  // cost normalization from the unscaled data
  Vec colnorm = Vec::Zero(n_);
  for (int k = 0; k < P_.outerSize(); ++k)
    for (SpMat::InnerIterator it(P_, k); it; ++it)
      colnorm[it.col()] = std::max(colnorm[it.col()], std::abs(it.value()));
  double qn = inf_norm(q_);
  double cm = colnorm.size() ? colnorm.mean() : 0.0;
  c_ = 1.0 / std::max({1e-6, cm, qn});

  Vec gx(n_), ge(m_ + n_);
  for (int pass = 0; pass < 10; ++pass) {
    gx.setZero();
    ge.setZero();
    for (int k = 0; k < P_.outerSize(); ++k) {
      for (SpMat::InnerIterator it(P_, k); it; ++it) {
        const double v = std::abs(c_ * d_[it.row()] * d_[it.col()] * it.value());
        gx[it.col()] = std::max(gx[it.col()], v);
      }
    }
    for (int k = 0; k < A_.outerSize(); ++k) {
      for (SpMat::InnerIterator it(A_, k); it; ++it) {
        const double v = std::abs(e_[it.row()] * d_[it.col()] * it.value());
        gx[it.col()] = std::max(gx[it.col()], v);
        ge[it.row()] = std::max(ge[it.row()], v);
      }
    }
    // identity block rows of C
    for (Eigen::Index j = 0; j < n_; ++j) {
      const double v = std::abs(e_[m_ + j] * d_[j]);
      gx[j] = std::max(gx[j], v);
      ge[m_ + j] = v;
    }
    double dev = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (gx[j] == 0.0) gx[j] = 1.0;
      dev = std::max(dev, std::abs(gx[j] - 1.0));
      d_[j] /= std::sqrt(std::max(gx[j], 1e-8));
    }
    for (Eigen::Index i = 0; i < m_ + n_; ++i) {
      if (ge[i] == 0.0) ge[i] = 1.0;
      dev = std::max(dev, std::abs(ge[i] - 1.0));
      e_[i] /= std::sqrt(std::max(ge[i], 1e-8));
    }
    if (dev < 0.1) break;
  }
}

void QpSolver::assign_row_steps() {
  rho_vec_.resize(m_ + n_);
  for (Eigen::Index i = 0; i < m_ + n_; ++i) {
    const double lo = l_[i], up = u_[i];
    const double sc = (i < m_) ? e_[i] : e_[i];
    const double slo = sc * lo, sup = sc * up;
    if (!std::isfinite(slo) && !std::isfinite(sup)) {
      rho_vec_[i] = 1e-6;
    } else if (std::isfinite(slo) && std::isfinite(sup) && sup - slo < 1e-10) {
      rho_vec_[i] = 1e3 * rho_bar_;
    } else {
      rho_vec_[i] = rho_bar_;
    }
  }
}

void QpSolver::build_kkt_values() {
  // zero all stored entries, then accumulate scaled values
  for (Eigen::Index k = 0; k < kkt_.nonZeros(); ++k) kkt_.valuePtr()[k] = 0.0;
  for (int k = 0; k < P_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(P_, k); it; ++it) {
      if (it.row() <= it.col())
        kkt_.coeffRef(it.row(), it.col()) += c_ * d_[it.row()] * d_[it.col()] * it.value();
    }
  }
  for (Eigen::Index j = 0; j < n_; ++j) kkt_.coeffRef(j, j) += cfg_.sigma;
  for (int k = 0; k < A_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A_, k); it; ++it)
      kkt_.coeffRef(it.col(), n_ + it.row()) += e_[it.row()] * d_[it.col()] * it.value();
  }
  for (Eigen::Index i = 0; i < m_; ++i)
    kkt_.coeffRef(n_ + i, n_ + i) = -1.0 / rho_vec_[i];
  for (Eigen::Index j = 0; j < n_; ++j)
    kkt_.coeffRef(j, n_ + m_ + j) += e_[m_ + j] * d_[j];
  for (Eigen::Index j = 0; j < n_; ++j)
    kkt_.coeffRef(n_ + m_ + j, n_ + m_ + j) = -1.0 / rho_vec_[m_ + j];
}

void QpSolver::set_linear_cost(const Vec& q) {
  if (q.size() != n_) throw std::invalid_argument("set_linear_cost: size mismatch");
  q_orig_ = q;
  q_ = q;
}

void QpSolver::set_bounds(const Vec& b, const Vec& lower, const Vec& upper) {
  if (b.size() != m_ || lower.size() != n_ || upper.size() != n_)
    throw std::invalid_argument("set_bounds: size mismatch");
  b_orig_ = b;
  lo_orig_ = lower;
  up_orig_ = upper;
  l_.head(m_) = b;
  u_.head(m_) = b;
  l_.tail(n_) = lower;
  u_.tail(n_) = upper;
}

void QpSolver::warm_start(const Vec& x, const Vec& y_eq, const Vec& z_bounds) {
  x_ = x.cwiseQuotient(d_);
  y_.resize(m_ + n_);
  y_.head(m_) = y_eq;
  y_.tail(n_) = z_bounds;
  y_ = c_ * y_.cwiseQuotient(e_);
  // constraint-space copy C x in scaled coordinates
  zc_.resize(m_ + n_);
  zc_.head(m_) = A_orig_ * x;
  zc_.tail(n_) = x;
  zc_ = e_.cwiseProduct(zc_);
  have_iterate_ = true;
}

void QpSolver::cold_start() { have_iterate_ = false; }

bool QpSolver::primal_infeasibility_certificate(const Vec& dy) const {
  // dy in unscaled coordinates, over [equality rows; bound rows]
  const double dy_norm = inf_norm(dy);
  if (dy_norm < 1e-12) return false;
  constexpr double eps_pinf = 1e-5;

  Vec cT_dy = A_orig_.transpose() * dy.head(m_);
  cT_dy += dy.tail(n_);
  if (inf_norm(cT_dy) > eps_pinf * dy_norm) return false;

  double support = 0.0;
  for (Eigen::Index i = 0; i < m_ + n_; ++i) {
    const double up = (i < m_) ? b_orig_[i] : up_orig_[i - m_];
    const double lo = (i < m_) ? b_orig_[i] : lo_orig_[i - m_];
    if (dy[i] > 0.0) {
      if (!std::isfinite(up)) {
        if (dy[i] > eps_pinf * dy_norm) return false;
      } else {
        support += up * dy[i];
      }
    } else if (dy[i] < 0.0) {
      if (!std::isfinite(lo)) {
        if (dy[i] < -eps_pinf * dy_norm) return false;
      } else {
        support += lo * dy[i];
      }
    }
  }
  return support < -eps_pinf * dy_norm;
}

QPSolution QpSolver::solve() {
  if (!pattern_ready_) throw std::logic_error("QpSolver::solve before setup");

  QPSolution out;
  out.x = Vec::Zero(n_);
  out.y = Vec::Zero(m_);
  out.z = Vec::Zero(n_);

  // presolve: conflicting box bounds
  for (Eigen::Index j = 0; j < n_; ++j) {
    if (lo_orig_[j] > up_orig_[j] + 1e-12) {
      out.status = SolveStatus::Infeasible;
      return out;
    }
  }

  if (cfg_.warm_start && !have_iterate_) {
    warm_start(*cfg_.warm_start, Vec::Zero(m_), Vec::Zero(n_));
  }
  if (!have_iterate_) {
    x_ = Vec::Zero(n_);
    zc_ = Vec::Zero(m_ + n_);
    y_ = Vec::Zero(m_ + n_);
  }

  // scaled copies of cost and bounds
  Vec qs = c_ * d_.cwiseProduct(q_);
  Vec ls = e_.cwiseProduct(l_);
  Vec us = e_.cwiseProduct(u_);

  const double alpha = cfg_.alpha;
  const double sigma = cfg_.sigma;
  const Eigen::Index nm = n_ + m_ + n_;
  Vec rhs(nm), sol(nm), ztil(m_ + n_), znew(m_ + n_), y_before(m_ + n_);
  Vec x_us(n_), y_us(m_ + n_), z_us(m_ + n_);

  int iter = 0;
  bool solved = false, infeasible = false;
  int certificate_strikes = 0;

  for (iter = 1; iter <= cfg_.max_iter; ++iter) {
    y_before = y_;
    rhs.head(n_) = sigma * x_ - qs;
    rhs.segment(n_, m_ + n_) = zc_ - y_.cwiseQuotient(rho_vec_);
    sol = ldlt_.solve(rhs);

    ztil = zc_ + (sol.segment(n_, m_ + n_) - y_).cwiseQuotient(rho_vec_);
    x_ = alpha * sol.head(n_) + (1.0 - alpha) * x_;
    znew = (alpha * ztil + (1.0 - alpha) * zc_ + y_.cwiseQuotient(rho_vec_))
               .cwiseMax(ls)
               .cwiseMin(us);
    y_ += rho_vec_.cwiseProduct(alpha * ztil + (1.0 - alpha) * zc_ - znew);
    zc_.swap(znew);

    // early checks let warm-started resolves report convergence immediately
    if (iter <= 5 || iter % cfg_.check_interval == 0 || iter == cfg_.max_iter) {
      // unscale
      x_us = d_.cwiseProduct(x_);
      y_us = e_.cwiseProduct(y_) / c_;
      z_us = zc_.cwiseQuotient(e_);

      Vec Cx(m_ + n_);
      Cx.head(m_) = A_orig_ * x_us;
      Cx.tail(n_) = x_us;
      const double pri = inf_norm(Cx - z_us);
      const double pri_scale = std::max(inf_norm(Cx), inf_norm(z_us));

      Vec Px = P_orig_ * x_us;
      Vec CTy = A_orig_.transpose() * y_us.head(m_);
      CTy += y_us.tail(n_);
      Vec station = Px + q_orig_ + CTy;
      const double dual_scale = std::max({1.0, inf_norm(Px), inf_norm(q_orig_), inf_norm(CTy)});
      const double dua = inf_norm(station) / dual_scale;

      out.primal_residual = pri;
      out.dual_residual = dua;
      if (pri <= cfg_.eps_abs + cfg_.eps_rel * pri_scale &&
          dua <= cfg_.eps_abs + cfg_.eps_rel) {
        solved = true;
      } else {
        // consecutive-iterate dual step; two confirming checks required
        Vec dy = e_.cwiseProduct(y_ - y_before) / c_;
        if (primal_infeasibility_certificate(dy)) {
          if (++certificate_strikes >= 2) infeasible = true;
        } else {
          certificate_strikes = 0;
        }
      }

      // residual balancing on the base step size
      if (!solved && !infeasible && cfg_.adaptive_rho && iter % 100 == 0) {
        const double pri_rel = pri / std::max({1.0, inf_norm(Cx), inf_norm(z_us)});
        if (dua > 1e-14 && pri_rel > 1e-14) {
          const double ratio = std::sqrt(pri_rel / dua);
          if (ratio > 5.0 || ratio < 0.2) {
            rho_bar_ = std::clamp(rho_bar_ * ratio, 1e-6, 1e6);
            assign_row_steps();
            build_kkt_values();
            ldlt_.factorize(kkt_);
            if (ldlt_.info() != Eigen::Success)
              throw std::runtime_error("QpSolver: refactorization failed");
          }
        }
      }
      if (solved || infeasible) break;
    }
  }

  have_iterate_ = true;
  x_us = d_.cwiseProduct(x_);
  y_us = e_.cwiseProduct(y_) / c_;

  out.x = x_us;
  out.y = y_us.head(m_);
  out.z = y_us.tail(n_);
  out.iterations = std::min(iter, cfg_.max_iter);
  out.objective = 0.5 * x_us.dot(P_orig_ * x_us) + q_orig_.dot(x_us);
  if (infeasible) {
    out.status = SolveStatus::Infeasible;
  } else if (solved) {
    out.status = SolveStatus::Solved;
  } else {
    out.status = SolveStatus::MaxIterations;
  }
  return out;
}

QPSolution solve_qp(const CanonicalQP& prob, const SolverSettings& settings) {
  QpSolver solver(prob, settings);
  return solver.solve();
}

// ---------------------------------------------------------------------------
// QpBuilder

int QpBuilder::add_var(double lower, double upper, double lin_cost) {
  lower_.push_back(lower);
  upper_.push_back(upper);
  q_.push_back(lin_cost);
  return static_cast<int>(lower_.size()) - 1;
}

int QpBuilder::add_vars(int count, double lower, double upper, double lin_cost) {
  const int first = num_vars();
  for (int i = 0; i < count; ++i) add_var(lower, upper, lin_cost);
  return first;
}

void QpBuilder::add_quad(int i, int j, double coeff) {
  if (coeff == 0.0) {
    // keep the entry structural so updated instances share a sparsity pattern
  }
  p_trip_.emplace_back(i, j, coeff);
  if (i != j) p_trip_.emplace_back(j, i, coeff);
}

void QpBuilder::add_lin(int i, double coeff) { q_[static_cast<std::size_t>(i)] += coeff; }

void QpBuilder::set_bounds(int i, double lower, double upper) {
  lower_[static_cast<std::size_t>(i)] = lower;
  upper_[static_cast<std::size_t>(i)] = upper;
}

int QpBuilder::add_eq_row(double rhs) {
  b_.push_back(rhs);
  return static_cast<int>(b_.size()) - 1;
}

void QpBuilder::eq_coeff(int row, int var, double coeff) {
  a_trip_.emplace_back(row, var, coeff);
}

CanonicalQP QpBuilder::build() const {
  CanonicalQP qp;
  const int n = num_vars();
  const int m = static_cast<int>(b_.size());
  qp.P.resize(n, n);
  qp.P.setFromTriplets(p_trip_.begin(), p_trip_.end());
  qp.P.makeCompressed();
  qp.A.resize(m, n);
  qp.A.setFromTriplets(a_trip_.begin(), a_trip_.end());
  qp.A.makeCompressed();
  qp.q = Eigen::Map<const Vec>(q_.data(), n);
  qp.b = Eigen::Map<const Vec>(b_.data(), m);
  qp.lower = Eigen::Map<const Vec>(lower_.data(), n);
  qp.upper = Eigen::Map<const Vec>(upper_.data(), n);
  return qp;
}

// ---------------------------------------------------------------------------
// Epigraph transforms

CanonicalQP l1_to_qp(const Vec& weights, const SpMat& D, const CanonicalQP& base) {
  const Eigen::Index k = D.rows();
  if (weights.size() != k) throw std::invalid_argument("l1_to_qp: weight/row mismatch");
  if (D.cols() != base.num_vars()) throw std::invalid_argument("l1_to_qp: D column mismatch");
  for (Eigen::Index i = 0; i < k; ++i)
    if (weights[i] < 0.0) throw std::invalid_argument("l1_to_qp: weights must be nonnegative");

  const Eigen::Index n0 = base.num_vars();
  const Eigen::Index m0 = base.num_eq();
  CanonicalQP out;
  const Eigen::Index n = n0 + 2 * k;

  std::vector<Trip> pt, at;
  append_triplets(base.P, 0, 0, pt);
  out.P.resize(n, n);
  out.P.setFromTriplets(pt.begin(), pt.end());

  append_triplets(base.A, 0, 0, at);
  append_triplets(D, static_cast<int>(m0), 0, at);
  for (Eigen::Index i = 0; i < k; ++i) {
    at.emplace_back(static_cast<int>(m0 + i), static_cast<int>(n0 + i), -1.0);
    at.emplace_back(static_cast<int>(m0 + i), static_cast<int>(n0 + k + i), 1.0);
  }
  out.A.resize(m0 + k, n);
  out.A.setFromTriplets(at.begin(), at.end());

  out.q = Vec::Zero(n);
  out.q.head(n0) = base.q;
  out.q.segment(n0, k) = weights;
  out.q.segment(n0 + k, k) = weights;

  out.b = Vec::Zero(m0 + k);
  out.b.head(m0) = base.b;

  out.lower = Vec::Constant(n, 0.0);
  out.upper = Vec::Constant(n, kInf);
  out.lower.head(n0) = base.lower;
  out.upper.head(n0) = base.upper;
  return out;
}

CanonicalQP range_to_qp(double alpha_range, const std::vector<int>& selected,
                        const CanonicalQP& base) {
  if (alpha_range < 0.0) throw std::invalid_argument("range_to_qp: alpha_range must be >= 0");
  const Eigen::Index n0 = base.num_vars();
  const Eigen::Index m0 = base.num_eq();
  const Eigen::Index k = static_cast<Eigen::Index>(selected.size());
  const Eigen::Index n = n0 + 2 + 2 * k;
  // layout: [x, s_hi, s_lo, slack_hi(k), slack_lo(k)]
  const Eigen::Index i_hi = n0, i_lo = n0 + 1, off_shi = n0 + 2, off_slo = n0 + 2 + k;

  CanonicalQP out;
  std::vector<Trip> pt, at;
  append_triplets(base.P, 0, 0, pt);
  out.P.resize(n, n);
  out.P.setFromTriplets(pt.begin(), pt.end());

  append_triplets(base.A, 0, 0, at);
  for (Eigen::Index i = 0; i < k; ++i) {
    const int r1 = static_cast<int>(m0 + 2 * i);
    const int r2 = static_cast<int>(m0 + 2 * i + 1);
    at.emplace_back(r1, selected[static_cast<std::size_t>(i)], 1.0);
    at.emplace_back(r1, static_cast<int>(i_hi), -1.0);
    at.emplace_back(r1, static_cast<int>(off_shi + i), -1.0);
    at.emplace_back(r2, selected[static_cast<std::size_t>(i)], 1.0);
    at.emplace_back(r2, static_cast<int>(i_lo), -1.0);
    at.emplace_back(r2, static_cast<int>(off_slo + i), -1.0);
  }
  out.A.resize(m0 + 2 * k, n);
  out.A.setFromTriplets(at.begin(), at.end());

  out.q = Vec::Zero(n);
  out.q.head(n0) = base.q;
  out.q[i_hi] = alpha_range;
  out.q[i_lo] = -alpha_range;

  out.b = Vec::Zero(m0 + 2 * k);
  out.b.head(m0) = base.b;

  out.lower = Vec::Constant(n, -kInf);
  out.upper = Vec::Constant(n, kInf);
  out.lower.head(n0) = base.lower;
  out.upper.head(n0) = base.upper;
  for (Eigen::Index i = 0; i < k; ++i) {
    out.upper[off_shi + i] = 0.0;  // x_j - s_hi <= 0
    out.lower[off_slo + i] = 0.0;  // x_j - s_lo >= 0
  }
  return out;
}

}  // namespace microgrid::qp
