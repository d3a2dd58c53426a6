#pragma once

#include <Eigen/Dense>

#include "scqp/objectives.hpp"
#include "scqp/solver.hpp"

namespace scqp {

// Settings shared by the fixed-point reference methods. All of them run
// full steps from equal weights and stop when the iterate stops moving,
// so their traces are directly comparable with the double-loop solver's.
struct BaselineSettings {
  double step_tol = 1e-6;  // |w^{k+1} - w^k|_inf at termination
  int max_iterations = 1000;
  double ridge_scale = 1e-10;
  bool warm_start = true;
};

struct BaselineResult {
  Eigen::VectorXd w_star;
  SolveTrace trace;  // same record schema as the double-loop solver
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double objective = 0.0;
};

// Classic parametric iteration for the return-to-variance ratio
// (x - r_f) / y: each step solves min -(x - r_f) + t_k y with
// t_k the current ratio. Throws DomainViolation when x <= r_f.
BaselineResult solve_dinkelbach(const MarketModel& market, double risk_free = 0.0,
                                const BaselineSettings& settings = {});

// Quadratic-transform iteration for the Sharpe ratio (x - r_f) / sqrt(y):
// each step solves min -2 s_k (x - r_f) + s_k^2 y with s_k = (x_k - r_f)/y_k.
BaselineResult solve_quadratic_transform(const MarketModel& market, double risk_free = 0.0,
                                         const BaselineSettings& settings = {});

// Majorize-minimize iteration for the robust objective -x + alpha sqrt(y):
// each step solves min -x + (alpha/2)(y / sqrt(y_k) + sqrt(y_k)).
BaselineResult solve_mm_worstcase(const MarketModel& market, double alpha,
                                  const BaselineSettings& settings = {});

// Auxiliary-variable iteration for the growth objective
// -log(1+x) + y/(2(1+x)^2), with the square root and log terms further
// majorized into quadratics so every step stays a QP. Throws
// DomainViolation when 1 + min_i mu_i <= 0.
BaselineResult solve_mm_kelly(const MarketModel& market,
                              const BaselineSettings& settings = {});

// Brute-force lattice search over the simplex honoring the floors/caps,
// used as an independent oracle in tests. N = 3 runs a staged refinement
// (coarse exhaustive sweep, then shrinking windows around the best cells).
// Throws TooLarge for N > 3, InvalidProblem for resolution > 1e-3,
// NoFeasiblePoint when no lattice point satisfies the constraints.
Eigen::VectorXd grid_oracle(const MvpSpec& spec, const MarketModel& market,
                            double resolution);

}  // namespace scqp
