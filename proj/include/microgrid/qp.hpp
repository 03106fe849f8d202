#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <limits>
#include <optional>
#include <vector>

namespace microgrid::qp {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Canonical quadratic program:
///   minimize    1/2 x'Px + q'x
///   subject to  Ax = b,   lower <= x <= upper
/// P symmetric positive semidefinite; bound entries may be +-infinity.
struct CanonicalQP {
  SpMat P;  // n x n
  Vec q;    // n
  SpMat A;  // m x n (m may be 0)
  Vec b;    // m
  Vec lower, upper;  // n

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_eq() const { return b.size(); }

  /// Shape/symmetry sanity checks; throws std::invalid_argument.
  void validate() const;
};

enum class SolveStatus { Solved, MaxIterations, Infeasible };

struct QPSolution {
  Vec x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  double primal_residual = 0.0;  // max violation of Ax=b and bounds
  double dual_residual = 0.0;    // ||Px + q + A'y + z||_inf
  int iterations = 0;
  Vec y;  // equality multipliers (m)
  Vec z;  // bound multipliers (n)
};

struct SolverSettings {
  double eps_abs = 1e-6;
  double eps_rel = 0.0;  // optional relative term on top of eps_abs
  int max_iter = 20000;
  double sigma = 1e-6;       // proximal regularization of the splitting
  double alpha = 1.6;        // over-relaxation
  double rho = 0.1;          // base step for the constraint blocks
  bool adaptive_rho = true;  // residual-balancing step updates
  bool scaling = true;       // diagonal Ruiz-style equilibration
  int check_interval = 10;   // iterations between convergence checks
  std::optional<Vec> warm_start;  // initial primal iterate
};

/// Operator-splitting QP solver with a cached KKT factorization so that many
/// related instances (same sparsity, updated costs/bounds) resolve cheaply.
class QpSolver {
 public:
  QpSolver() = default;
  explicit QpSolver(const CanonicalQP& prob, const SolverSettings& s = {}) { setup(prob, s); }

  /// Full setup: symbolic analysis + scaling + numeric factorization.
  void setup(const CanonicalQP& prob, const SolverSettings& s = {});

  /// Re-use the symbolic factorization when `prob` has the same pattern as
  /// the problem this solver was set up with; returns false (and leaves the
  /// solver untouched) when the pattern differs and a setup() is required.
  bool try_update(const CanonicalQP& prob);

  /// Cheapest sufficient refresh: setup on pattern change, numeric
  /// refactorization on matrix-value change, and a bounds/cost copy when
  /// only vectors moved.  Returns the action taken.
  enum class Refresh { Setup, Refactor, VectorsOnly };
  Refresh refresh(const CanonicalQP& prob, const SolverSettings& s = {});

  /// Cheap updates that keep the factorization.
  void set_linear_cost(const Vec& q);
  void set_bounds(const Vec& b, const Vec& lower, const Vec& upper);

  /// Seed the next solve; x of size n, y_eq of size m, z_bounds of size n.
  void warm_start(const Vec& x, const Vec& y_eq, const Vec& z_bounds);
  /// Forget the previous iterate; the next solve starts from zero.
  void cold_start();

  QPSolution solve();

  bool is_setup() const { return n_ > 0; }
  Eigen::Index num_vars() const { return n_; }
  Eigen::Index num_eq() const { return m_; }

 private:
  void build_kkt_values();
  void compute_scaling();
  void assign_row_steps();
  bool check_termination(QPSolution& out);
  bool primal_infeasibility_certificate(const Vec& dy) const;

  // problem data (scaled)
  Eigen::Index n_ = 0, m_ = 0;  // vars, equality rows; constraint rows = m_ + n_
  SpMat P_, A_;                  // scaled copies
  Vec q_, l_, u_;                // scaled cost and stacked constraint bounds (m_+n_)
  SolverSettings cfg_;

  // scaling
  Vec d_;       // variable scaling (n)
  Vec e_;       // constraint-row scaling (m_+n_)
  double c_ = 1.0;  // cost scaling

  // per-row step sizes
  Vec rho_vec_;  // m_+n_
  double rho_bar_ = 0.1;

  // KKT system and factorization
  SpMat kkt_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt_;
  bool pattern_ready_ = false;

  // iterates (scaled space)
  Vec x_, zc_, y_;  // primal, constraint-space copy (m_+n_), constraint dual
  bool have_iterate_ = false;

  // unscaled problem copies for residual checks
  SpMat P_orig_, A_orig_;
  Vec q_orig_, b_orig_, lo_orig_, up_orig_;
};

/// One-shot convenience wrapper around QpSolver.
QPSolution solve_qp(const CanonicalQP& prob, const SolverSettings& settings = {});

/// Incremental builder for CanonicalQP instances (triplet-based).
class QpBuilder {
 public:
  /// Adds one variable, returns its index.
  int add_var(double lower, double upper, double lin_cost = 0.0);
  int add_vars(int count, double lower, double upper, double lin_cost = 0.0);

  /// Adds `coeff` to P(i,j) (and P(j,i) when i != j) in the 1/2 x'Px sense.
  void add_quad(int i, int j, double coeff);
  void add_lin(int i, double coeff);
  void set_bounds(int i, double lower, double upper);

  /// Opens a new equality row with right-hand side `rhs`, returns row index.
  int add_eq_row(double rhs);
  void eq_coeff(int row, int var, double coeff);

  int num_vars() const { return static_cast<int>(lower_.size()); }
  CanonicalQP build() const;

 private:
  std::vector<Eigen::Triplet<double>> p_trip_, a_trip_;
  std::vector<double> q_, lower_, upper_, b_;
};

/// Epigraph rewrite of weighted L1 terms: extends `base` with d+, d- >= 0,
/// equality rows D x = d+ - d- and linear cost w'(d+ + d-), so the extended
/// optimum equals base plus sum_j w_j |(Dx)_j|.
CanonicalQP l1_to_qp(const Vec& weights, const SpMat& D, const CanonicalQP& base);

/// Epigraph rewrite of alpha_range * (max_i x_sel - min_i x_sel) over the
/// selected variables: adds scalars s_hi, s_lo (plus slacks) with
/// s_lo <= x_j <= s_hi and cost alpha_range * (s_hi - s_lo).
CanonicalQP range_to_qp(double alpha_range, const std::vector<int>& selected,
                        const CanonicalQP& base);

}  // namespace microgrid::qp
