#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "scqp/objectives.hpp"
#include "scqp/qp.hpp"

namespace scqp {

// Per-moment weights of the surrogate QP: lambda comes from the objective
// gradients, eta from the dual ascent on the mean-variance constraints.
struct Weights {
  Eigen::VectorXd lambda_x;
  Eigen::VectorXd lambda_y;
  Eigen::VectorXd eta_x;
  Eigen::VectorXd eta_y;
};

enum class StepRule {
  UnitStep,     // w^{k+1} = w-hat^k; exact for the convex special cases
  Diminishing,  // gamma_k = 2/(k+2)
};

struct ArmijoSettings {
  double alpha_init = 1.0;
  double sigma = 0.1;
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct ScqpSettings {
  StepRule step_rule = StepRule::UnitStep;
  ArmijoSettings armijo;
  double outer_tol = 1e-6;       // fixed-point residual |w-hat - w|_inf
  double step_tol = 1e-6;        // iterate-change termination
  double inner_eta_tol = 1e-9;   // dual step size at inner convergence
  double inner_feas_tol = 1e-9;  // allowed constraint violation
  double inner_comp_tol = 1e-9;  // allowed complementarity slack
  int max_outer = 500;
  int max_inner = 5000;
  // Surrogate regularization, relative to the average covariance trace per
  // asset. The larger fallback kicks in when no risk term carries weight at
  // all and the QP would otherwise degenerate into an LP.
  double ridge_scale = 1e-10;
  double lp_ridge_scale = 1e-7;
  double eta_cap = 1e8;  // dual blow-up => the floors/caps are unattainable
  Eigen::VectorXd eta0_x;  // empty => all ones on constrained entries
  Eigen::VectorXd eta0_y;
  bool warm_start = true;
  // Initial working set for the very first surrogate QP of a solve: pin all
  // but the top-k assets by surrogate cost. -1 picks k automatically for
  // large problems, 0 disables the heuristic.
  int first_qp_top_k = -1;
};

struct TraceRecord {
  int k = 0;
  double t = 0.0;      // seconds since solve start
  double f = 0.0;      // true objective at w^k
  double step = 0.0;   // |w^{k+1} - w^k|_inf
  double gamma = 1.0;
  double residual = 0.0;  // |w-hat^k - w^k|_inf
  Eigen::VectorXd lambda_x, lambda_y, eta_x, eta_y;
  int inner_iterations = 0;
  int qp_iterations = 0;
  int reduced_solves = 0;
};

struct SolveTrace {
  std::vector<TraceRecord> records;
};

enum class SolveStatus { Converged, MaxIterations, Infeasible, AssumptionViolated };

struct SolveResult {
  Eigen::VectorXd w;
  Weights weights;
  SolveTrace trace;
  SolveStatus status = SolveStatus::MaxIterations;
  int outer_iterations = 0;
  double objective = 0.0;
  double residual = 0.0;
};

// The surrogate quadratic program over the budget simplex, kept lazy: the
// Hessian sum(2 v_j Sigma_j) + ridge I (+ optional rank-one terms) is never
// materialized; blocks and column combinations are assembled on demand so
// reduced solves touch only the rows they need.
class SurrogateProblem {
 public:
  SurrogateProblem(const MarketModel& market, const Eigen::VectorXd& x_weights,
                   const Eigen::VectorXd& y_weights, double ridge)
      : market_(&market), wy_(y_weights), ridge_(ridge) {
    const int n = market.dim();
    c_ = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < x_weights.size(); ++i) {
      if (x_weights(i) != 0.0) c_ -= x_weights(i) * market.mus[i];
    }
    A_ = Eigen::MatrixXd::Ones(1, n);
    b_ = Eigen::VectorXd::Ones(1);
    l_ = Eigen::VectorXd::Zero(n);
    u_ = Eigen::VectorXd::Constant(n, kInf);
  }

  // Adds coef * v v' to the Hessian (used by baselines that majorize a
  // log or ratio term around the current iterate).
  void add_rank_one(Eigen::VectorXd v, double coef) {
    rank1_.emplace_back(std::move(v), coef);
  }

  // Replaces the linear term (baselines with bespoke cost vectors).
  void set_cost(Eigen::VectorXd c) { c_ = std::move(c); }

  int dim() const { return static_cast<int>(c_.size()); }
  int eq_count() const { return 1; }
  const Eigen::VectorXd& cost() const { return c_; }
  const Eigen::MatrixXd& eq_matrix() const { return A_; }
  const Eigen::VectorXd& eq_rhs() const { return b_; }
  const Eigen::VectorXd& lower() const { return l_; }
  const Eigen::VectorXd& upper() const { return u_; }

  Eigen::MatrixXd hessian_block(const std::vector<int>& rows,
                                const std::vector<int>& cols) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows.size(), cols.size());
    for (int j = 0; j < wy_.size(); ++j) {
      const double v = 2.0 * wy_(j);
      if (v == 0.0) continue;
      const Eigen::MatrixXd& sig = market_->sigmas[j];
      for (size_t r = 0; r < rows.size(); ++r)
        for (size_t s = 0; s < cols.size(); ++s) out(r, s) += v * sig(rows[r], cols[s]);
    }
    for (const auto& [vec, coef] : rank1_) {
      for (size_t r = 0; r < rows.size(); ++r)
        for (size_t s = 0; s < cols.size(); ++s) out(r, s) += coef * vec(rows[r]) * vec(cols[s]);
    }
    if (ridge_ != 0.0) {
      for (size_t r = 0; r < rows.size(); ++r)
        for (size_t s = 0; s < cols.size(); ++s)
          if (rows[r] == cols[s]) out(r, s) += ridge_;
    }
    return out;
  }

  Eigen::VectorXd hessian_times(const std::vector<int>& cols,
                                const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    for (int j = 0; j < wy_.size(); ++j) {
      const double s = 2.0 * wy_(j);
      if (s == 0.0) continue;
      const Eigen::MatrixXd& sig = market_->sigmas[j];
      for (size_t k = 0; k < cols.size(); ++k) out += (s * v(k)) * sig.col(cols[k]);
    }
    for (const auto& [vec, coef] : rank1_) {
      double dot = 0.0;
      for (size_t k = 0; k < cols.size(); ++k) dot += vec(cols[k]) * v(k);
      out += (coef * dot) * vec;
    }
    if (ridge_ != 0.0) {
      for (size_t k = 0; k < cols.size(); ++k) out(cols[k]) += ridge_ * v(k);
    }
    return out;
  }

 private:
  const MarketModel* market_;
  Eigen::VectorXd wy_, c_, b_, l_, u_;
  Eigen::MatrixXd A_;
  double ridge_ = 0.0;
  std::vector<std::pair<Eigen::VectorXd, double>> rank1_;
};

static_assert(QuadraticProgram<SurrogateProblem>);

// Last surrogate solution of a QP sequence, reused to seed the next
// working set. One cache per solve; callers own it.
struct SurrogateCache {
  Eigen::VectorXd w;
  bool has = false;
  int pending_top_k = 0;  // pin-all-but-top-k heuristic for the next (first) QP
};

struct InnerResult {
  Eigen::VectorXd w_hat;
  Eigen::VectorXd eta_x, eta_y;
  int iterations = 0;
  int qp_iterations = 0;
  int reduced_solves = 0;
  double dual_value = 0.0;
  double max_violation = 0.0;  // max positive constraint residual at w_hat
};

// Objective-gradient weights: lambda_x = -dF/dx, lambda_y = +dF/dy, zero on
// moments the model does not use. Throws AssumptionViolated when a used
// moment's gradient has the wrong sign.
std::pair<Eigen::VectorXd, Eigen::VectorXd> lambda_update(const ObjectiveModel& model,
                                                          const Moments& m);

// Dense assembly of the surrogate QP (tests and small problems; the solver
// itself uses the lazy view). Throws NotStrictlyConvex when every risk
// weight is zero and no ridge is supplied.
QpProblem build_surrogate(const MarketModel& market, const Weights& weights, double ridge);

// Maximizes the concave dual h(eta) = (surrogate QP optimum) + eta_x'a -
// eta_y'b by projected gradient steps with an Armijo backtracking line
// search along the projection arc. Entries with infinite limits are held at
// zero. Throws InfeasibleSpec when eta escapes past the cap with the
// constraints still violated, MaxInnerIterations on budget exhaustion.
InnerResult inner_dual_ascent(const MarketModel& market, const MvpSpec& spec,
                              const Eigen::VectorXd& lambda_x,
                              const Eigen::VectorXd& lambda_y,
                              const Eigen::VectorXd& eta0_x, const Eigen::VectorXd& eta0_y,
                              const ScqpSettings& settings, SurrogateCache* cache = nullptr);

// Step size for outer iteration k under the configured rule.
double gamma_schedule(int k, const ScqpSettings& settings);

// The double loop: update lambda from the objective gradients at w^k, solve
// the surrogate (running the dual ascent when any floor/cap is finite; eta
// carries over between outer iterations), then blend w^{k+1} = w^k +
// gamma_k (w-hat^k - w^k). Terminates on the fixed-point residual or the
// iterate-change test, whichever fires first.
SolveResult solve(const MvpSpec& spec, const MarketModel& market,
                  const Eigen::VectorXd& w0 = Eigen::VectorXd(),
                  const ScqpSettings& settings = {});

// |w-hat(lambda(w), eta*(w)) - w|_inf: zero exactly at stationary points of
// the portfolio problem.
double stationarity_residual(const Eigen::VectorXd& w, const MvpSpec& spec,
                             const MarketModel& market, const ScqpSettings& settings = {});

}  // namespace scqp
