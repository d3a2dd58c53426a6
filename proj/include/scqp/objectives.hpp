#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "scqp/errors.hpp"

namespace scqp {

// Return and risk estimates the portfolio problem is built from: p mean
// vectors and q covariance matrices over the same N assets. Several
// estimates of each may coexist (different horizons, estimators, or
// stress scenarios); constraints can reference any of them.
struct MarketModel {
  std::vector<Eigen::VectorXd> mus;
  std::vector<Eigen::MatrixXd> sigmas;

  int dim() const { return mus.empty() ? (sigmas.empty() ? 0 : static_cast<int>(sigmas[0].rows())) : static_cast<int>(mus[0].size()); }
  int mean_count() const { return static_cast<int>(mus.size()); }
  int risk_count() const { return static_cast<int>(sigmas.size()); }

  // Requires at least one covariance, consistent dimensions, and every
  // covariance symmetric positive definite.
  void validate() const;
};

// Portfolio moments at a weight vector: x_i = w'mu_i, y_j = w'Sigma_j w.
struct Moments {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

enum class ObjectiveKind {
  Markowitz,          // -x + (alpha/2) y
  SharpeRatio,        // -(x - r_f) / sqrt(y)
  GeneralizedSharpe,  // -(x - r_f) / y^beta
  WorstCase,          // -x + alpha sqrt(y), robust return under an ellipsoidal mean
  ExpectedUtility,    // -(U(x) + U''(x) y / 2), second-order utility approximation
  Kelly,              // -log(1+x) + y / (2 (1+x)^2), growth-optimal approximation
  MinVariance,        // y_1
  MaxReturn,          // -x_1
};

// A scalar objective F(x_1, y_1) over the first return and risk moment.
// All models are written as minimizations.
struct ObjectiveModel {
  ObjectiveKind kind = ObjectiveKind::Markowitz;
  double alpha = 1.0;     // risk-aversion weight (Markowitz, WorstCase)
  double risk_free = 0.0; // r_f for the ratio objectives
  double beta = 1.0;      // risk exponent for the generalized ratio, >= 1/2
  double gamma = 1.0;     // curvature of the exponential utility, > 0

  // Utility and its first three derivatives; set for ExpectedUtility.
  std::function<double(double)> u0, u1, u2, u3;

  static ObjectiveModel markowitz(double alpha);
  static ObjectiveModel sharpe_ratio(double risk_free = 0.0);
  static ObjectiveModel generalized_sharpe(double risk_free, double beta);
  static ObjectiveModel worst_case(double alpha);
  static ObjectiveModel exp_utility(double gamma);
  // Any concave utility given as (U, U', U'', U''').
  static ObjectiveModel expected_utility(std::function<double(double)> u,
                                         std::function<double(double)> du,
                                         std::function<double(double)> d2u,
                                         std::function<double(double)> d3u);
  static ObjectiveModel kelly();
  static ObjectiveModel min_variance();
  static ObjectiveModel max_return();

  bool uses_x() const;  // whether the first return moment appears in F
  bool uses_y() const;  // whether the first risk moment appears in F

  // Parameter-range checks; throws InvalidProblem.
  void validate() const;
};

// The full problem statement: objective plus per-moment return floors
// a_i <= x_i and risk caps y_j <= b_j. Infinite entries switch a
// constraint off.
struct MvpSpec {
  ObjectiveModel objective;
  Eigen::VectorXd return_floors;
  Eigen::VectorXd risk_caps;
};

struct Assumption1Report {
  bool ok = true;
  char moment = 0;        // 'x' or 'y' when violated
  int index = -1;         // offending moment index
  double gradient = 0.0;  // the gradient value with the wrong sign
  std::string message;
};

// x_i = w'mu_i and y_j = w'Sigma_j w for every estimate in the market.
Moments eval_moments(const Eigen::VectorXd& w, const MarketModel& market);

// F at the given moments. Ratio objectives require y > 0 and x > r_f;
// the growth objective requires 1 + x > 0; violations throw
// DomainViolation.
double objective_value(const ObjectiveModel& model, const Moments& m);

// Analytic (dF/dx, dF/dy) as full-length vectors; entries for moments the
// model does not reference are zero. Throws DomainViolation outside the
// model's domain and AssumptionViolated when a computed gradient has the
// wrong sign for a moment the model uses (possible with custom utilities).
std::pair<Eigen::VectorXd, Eigen::VectorXd> objective_gradients(const ObjectiveModel& model,
                                                                const Moments& m);

// Stacked constraint residuals (a_i - x_i, then y_j - b_j); positive means
// violated. Entries with infinite limits are -inf so they never activate.
Eigen::VectorXd constraint_values(const MvpSpec& spec, const Moments& m);

// Verifies the monotonicity the solver relies on: more expected return
// never hurts (dF/dx < 0) and more risk never helps (dF/dy > 0) for every
// moment the model uses. Sign violations are reported, not thrown, so
// callers can probe out-of-domain regions such as x < r_f.
Assumption1Report check_assumption1(const ObjectiveModel& model, const Moments& m);

}  // namespace scqp
