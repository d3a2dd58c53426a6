#include "scqp/working_set.hpp"

#include <cmath>

#include "scqp/errors.hpp"

namespace scqp {

void WorkingSet::validate(const Eigen::VectorXd& l, const Eigen::VectorXd& u) const {
  const int n = static_cast<int>(l.size());
  auto check_list = [&](const std::vector<int>& idx, const Eigen::VectorXd& bound,
                        const char* which) {
    int prev = -1;
    for (int i : idx) {
      if (i < 0 || i >= n) throw InvalidProblem("working-set index out of range");
      if (i <= prev) throw InvalidProblem("working-set indices must be strictly increasing");
      if (!std::isfinite(bound(i))) {
        throw InvalidProblem(std::string("cannot pin variable at an infinite ") + which +
                             " bound");
      }
      prev = i;
    }
  };
  check_list(lower, l, "lower");
  check_list(upper, u, "upper");
  size_t a = 0, b = 0;
  while (a < lower.size() && b < upper.size()) {
    if (lower[a] == upper[b]) {
      throw InvalidProblem("variable pinned at both bounds in the working set");
    }
    if (lower[a] < upper[b]) ++a;
    else ++b;
  }
}

ReducedProblem reduce_problem(const QpProblem& problem, const WorkingSet& ws) {
  problem.validate();
  return detail::reduce_impl(problem, ws);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> recover_multipliers(
    const QpProblem& problem, const WorkingSet& ws, const Eigen::VectorXd& full_w,
    const Eigen::VectorXd& nu, const Eigen::VectorXd& inner_beta_l,
    const Eigen::VectorXd& inner_beta_u) {
  problem.validate();
  ws.validate(problem.l, problem.u);
  const int n = problem.dim();
  if (full_w.size() != n) throw DimensionMismatch("iterate length does not match problem");
  if (nu.size() != problem.eq_count()) {
    throw DimensionMismatch("multiplier length does not match equality count");
  }
  Eigen::VectorXd beta_l =
      inner_beta_l.size() == n ? inner_beta_l : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd beta_u =
      inner_beta_u.size() == n ? inner_beta_u : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = problem.c + problem.H * full_w;
  if (problem.eq_count() > 0) grad -= problem.A.transpose() * nu;
  for (int i : ws.lower) beta_l(i) = grad(i);
  for (int i : ws.upper) beta_u(i) = -grad(i);
  return {beta_l, beta_u};
}

WorkingSetResult solve_with_working_set(const QpProblem& problem, const WorkingSet& ws,
                                        const WorkingSetSettings& settings) {
  problem.validate();
  return detail::solve_ws_impl(problem, ws, settings);
}

WorkingSet warm_start_from(const Eigen::VectorXd& previous_w, const Eigen::VectorXd& l,
                           const Eigen::VectorXd& u, double tol) {
  if (previous_w.size() != l.size() || l.size() != u.size()) {
    throw DimensionMismatch("previous solution and bounds disagree in length");
  }
  WorkingSet ws;
  for (int i = 0; i < previous_w.size(); ++i) {
    if (std::isfinite(l(i)) && std::abs(previous_w(i) - l(i)) <= tol) {
      ws.lower.push_back(i);
    } else if (std::isfinite(u(i)) && std::abs(previous_w(i) - u(i)) <= tol) {
      ws.upper.push_back(i);
    }
  }
  return ws;
}

}  // namespace scqp
