#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "scqp/errors.hpp"

namespace scqp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Strictly convex quadratic program
//
//   minimize    c'w + (1/2) w'Hw
//   subject to  Aw = b,  l <= w <= u
//
// H must be symmetric positive definite. Unbounded directions are expressed
// with +/-infinity in l/u, never with large finite values.
struct QpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd H;
  Eigen::MatrixXd A;  // m x n, rows linearly independent (m may be 0)
  Eigen::VectorXd b;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  int dim() const { return static_cast<int>(c.size()); }
  int eq_count() const { return static_cast<int>(A.rows()); }

  // Accessors shared with other problem representations so the working-set
  // strategy can run without materializing an n x n Hessian.
  const Eigen::VectorXd& cost() const { return c; }
  const Eigen::MatrixXd& eq_matrix() const { return A; }
  const Eigen::VectorXd& eq_rhs() const { return b; }
  const Eigen::VectorXd& lower() const { return l; }
  const Eigen::VectorXd& upper() const { return u; }
  Eigen::MatrixXd hessian_block(const std::vector<int>& rows,
                                const std::vector<int>& cols) const;
  // Returns H[:, cols] * v where v holds coefficients for `cols` only.
  Eigen::VectorXd hessian_times(const std::vector<int>& cols,
                                const Eigen::VectorXd& v) const;

  // Throws InvalidProblem / DimensionMismatch when the fields are
  // inconsistent (size mismatches, H asymmetric beyond 1e-10, l > u).
  void validate() const;
};

template <class P>
concept QuadraticProgram = requires(const P& p, const std::vector<int>& idx,
                                    const Eigen::VectorXd& v) {
  { p.dim() } -> std::convertible_to<int>;
  { p.eq_count() } -> std::convertible_to<int>;
  { p.cost() } -> std::convertible_to<const Eigen::VectorXd&>;
  { p.eq_matrix() } -> std::convertible_to<const Eigen::MatrixXd&>;
  { p.eq_rhs() } -> std::convertible_to<const Eigen::VectorXd&>;
  { p.lower() } -> std::convertible_to<const Eigen::VectorXd&>;
  { p.upper() } -> std::convertible_to<const Eigen::VectorXd&>;
  { p.hessian_block(idx, idx) } -> std::convertible_to<Eigen::MatrixXd>;
  { p.hessian_times(idx, v) } -> std::convertible_to<Eigen::VectorXd>;
};

struct QpSolution {
  Eigen::VectorXd w;
  Eigen::VectorXd nu;      // equality multipliers, stationarity uses -A'nu
  Eigen::VectorXd beta_l;  // lower bound multipliers, >= 0
  Eigen::VectorXd beta_u;  // upper bound multipliers, >= 0
  double objective = 0.0;
  int iterations = 0;  // active-set changes performed by the dual method
};

struct QpSettings {
  double feasibility_tol = 1e-8;    // KKT feasibility budget
  double stationarity_tol = 1e-8;   // KKT stationarity budget
  double pd_pivot_scale = 1e-12;    // Cholesky pivot threshold: scale * max diag(H)
  double dependence_tol = 1e-12;    // relative threshold for dependent normals
  double violation_tol = 1e-11;     // slack below -tol counts as violated
  int max_iteration_factor = 50;    // hard cap: factor * (n + m + 1) steps
};

// Dual active-set method: starts from the unconstrained minimizer, adds the
// equality rows, then pulls in violated bounds one at a time, keeping the
// iterate optimal for the constraints activated so far. Needs no feasible
// starting point. Bounds are handled natively; their constraint normals are
// +/- unit vectors, so no inequality matrix is ever formed.
//
// Throws NotPositiveDefinite, DegenerateEqualities, Infeasible,
// InvalidProblem. Ties between equally violated bounds go to the lowest
// variable index (lower bound before upper), which makes runs deterministic.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

// Worst violation across stationarity, primal feasibility, complementary
// slackness and multiplier nonnegativity. Throws DimensionMismatch.
double kkt_residual(const QpProblem& problem, const QpSolution& solution);

}  // namespace scqp
