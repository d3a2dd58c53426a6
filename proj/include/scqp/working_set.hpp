#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "scqp/qp.hpp"

namespace scqp {

// A guess of which bounds are active at the solution: variables in `lower`
// are pinned at their lower bound, variables in `upper` at their upper
// bound. Both lists are sorted and disjoint.
struct WorkingSet {
  std::vector<int> lower;
  std::vector<int> upper;

  int size() const { return static_cast<int>(lower.size() + upper.size()); }
  bool empty() const { return lower.empty() && upper.empty(); }

  // Throws InvalidProblem on unsorted/duplicate/overlapping/out-of-range
  // entries or when a pinned side has no finite bound.
  void validate(const Eigen::VectorXd& l, const Eigen::VectorXd& u) const;
};

// The subproblem over the free variables, with the pinned contribution
// folded into the cost, the right-hand side, and a constant offset.
struct ReducedProblem {
  QpProblem inner;                  // dimension = number of free variables
  std::vector<int> free_index;      // ascending original indices
  std::vector<int> pinned_index;    // ascending original indices
  Eigen::VectorXd pinned_values;    // aligned with pinned_index
  double offset = 0.0;              // c_P'w_P + (1/2) w_P'H_PP w_P
};

struct WorkingSetSettings {
  QpSettings qp;
  double drop_tol = 1e-10;   // multiplier below -drop_tol evicts its pin
  double warm_tol = 1e-9;    // bound proximity that counts as active
};

struct WorkingSetResult {
  QpSolution solution;
  WorkingSet final_set;
  int reduced_solves = 0;
  bool fell_back = false;               // initial guess was infeasible
  std::vector<double> objective_path;   // objective after each reduced solve
};

namespace detail {

template <QuadraticProgram P>
ReducedProblem reduce_impl(const P& p, const WorkingSet& ws) {
  const int n = p.dim();
  const int m = p.eq_count();
  ws.validate(p.lower(), p.upper());

  ReducedProblem red;
  std::vector<char> pinned(n, 0);
  for (int i : ws.lower) pinned[i] = 1;
  for (int i : ws.upper) pinned[i] = 2;
  for (int i = 0; i < n; ++i) {
    if (!pinned[i]) red.free_index.push_back(i);
    else red.pinned_index.push_back(i);
  }
  red.pinned_values.resize(red.pinned_index.size());
  for (size_t k = 0; k < red.pinned_index.size(); ++k) {
    const int i = red.pinned_index[k];
    red.pinned_values(k) = pinned[i] == 1 ? p.lower()(i) : p.upper()(i);
  }

  // Pinned contributions only matter where the pinned value is nonzero.
  std::vector<int> nz;
  Eigen::VectorXd nz_vals(red.pinned_index.size());
  int nz_count = 0;
  for (size_t k = 0; k < red.pinned_index.size(); ++k) {
    if (red.pinned_values(k) != 0.0) {
      nz.push_back(red.pinned_index[k]);
      nz_vals(nz_count++) = red.pinned_values(k);
    }
  }
  nz_vals.conservativeResize(nz_count);

  Eigen::VectorXd h_times_pin = Eigen::VectorXd::Zero(n);
  if (nz_count > 0) h_times_pin = p.hessian_times(nz, nz_vals);

  red.offset = 0.0;
  for (int k = 0; k < nz_count; ++k) {
    red.offset += p.cost()(nz[k]) * nz_vals(k) + 0.5 * h_times_pin(nz[k]) * nz_vals(k);
  }

  const int f = static_cast<int>(red.free_index.size());
  if (f == 0) {
    Eigen::VectorXd w_pin = Eigen::VectorXd::Zero(n);
    for (size_t k = 0; k < red.pinned_index.size(); ++k) {
      w_pin(red.pinned_index[k]) = red.pinned_values(k);
    }
    if (m > 0) {
      const double viol = (p.eq_matrix() * w_pin - p.eq_rhs()).cwiseAbs().maxCoeff();
      if (viol > 1e-10) {
        throw EmptyFreeSet("all variables pinned and the pinned point violates Aw = b");
      }
    }
    red.inner = QpProblem{};  // zero-dimensional
    red.inner.A.resize(m, 0);
    red.inner.b = p.eq_rhs();
    return red;
  }

  red.inner.c.resize(f);
  red.inner.l.resize(f);
  red.inner.u.resize(f);
  for (int a = 0; a < f; ++a) {
    const int i = red.free_index[a];
    red.inner.c(a) = p.cost()(i) + h_times_pin(i);
    red.inner.l(a) = p.lower()(i);
    red.inner.u(a) = p.upper()(i);
  }
  red.inner.H = p.hessian_block(red.free_index, red.free_index);
  red.inner.A.resize(m, f);
  red.inner.b.resize(m);
  for (int e = 0; e < m; ++e) {
    for (int a = 0; a < f; ++a) red.inner.A(e, a) = p.eq_matrix()(e, red.free_index[a]);
    double shift = 0.0;
    for (int k = 0; k < nz_count; ++k) shift += p.eq_matrix()(e, nz[k]) * nz_vals(k);
    red.inner.b(e) = p.eq_rhs()(e) - shift;
  }
  return red;
}

// Full-problem multipliers from a reduced solution: free-variable bound
// multipliers carry over, pinned ones come out of the stationarity rows
// beta_l = (c + Hw - A'nu)_i for lower pins and the negative of that for
// upper pins.
template <QuadraticProgram P>
QpSolution recover_impl(const P& p, const ReducedProblem& red, const QpSolution& inner) {
  const int n = p.dim();
  const int m = p.eq_count();
  QpSolution full;
  full.w = Eigen::VectorXd::Zero(n);
  full.nu = inner.nu;
  full.beta_l = Eigen::VectorXd::Zero(n);
  full.beta_u = Eigen::VectorXd::Zero(n);

  std::vector<int> support;
  Eigen::VectorXd support_vals(n);
  int sc = 0;
  for (size_t a = 0; a < red.free_index.size(); ++a) {
    full.w(red.free_index[a]) = inner.w(static_cast<int>(a));
    full.beta_l(red.free_index[a]) = inner.beta_l(static_cast<int>(a));
    full.beta_u(red.free_index[a]) = inner.beta_u(static_cast<int>(a));
  }
  for (size_t k = 0; k < red.pinned_index.size(); ++k) {
    full.w(red.pinned_index[k]) = red.pinned_values(k);
  }
  for (int i = 0; i < n; ++i) {
    if (full.w(i) != 0.0) {
      support.push_back(i);
      support_vals(sc++) = full.w(i);
    }
  }
  Eigen::VectorXd hw = support.empty()
                           ? Eigen::VectorXd::Zero(n)
                           : p.hessian_times(support, support_vals.head(sc));

  std::vector<char> side(n, 0);
  // pinned_index is sorted; classify by looking up the reduced pin value
  for (size_t k = 0; k < red.pinned_index.size(); ++k) {
    const int i = red.pinned_index[k];
    side[i] = (red.pinned_values(k) == p.lower()(i)) ? 1 : 2;
  }
  for (int i = 0; i < n; ++i) {
    if (!side[i]) continue;
    double g = p.cost()(i) + hw(i);
    for (int e = 0; e < m; ++e) g -= p.eq_matrix()(e, i) * full.nu(e);
    if (side[i] == 1) full.beta_l(i) = g;
    else full.beta_u(i) = -g;
  }
  full.objective = inner.objective + red.offset;
  full.iterations = inner.iterations;
  return full;
}

template <QuadraticProgram P>
WorkingSetResult solve_ws_impl(const P& p, WorkingSet ws, const WorkingSetSettings& s) {
  const int m = p.eq_count();
  WorkingSetResult out;
  out.fell_back = false;

  const int initial_size = ws.size();
  double prev_objective = kInf;
  int prev_ws_size = -1;

  for (;;) {
    ReducedProblem red;
    QpSolution inner;
    bool failed = false;
    try {
      red = reduce_impl(p, ws);
      if (red.free_index.empty()) {
        // Fully pinned and feasible: multipliers via least squares on the
        // stationarity system.
        inner.w.resize(0);
        inner.beta_l.resize(0);
        inner.beta_u.resize(0);
        inner.objective = 0.0;
        if (m > 0) {
          Eigen::VectorXd w_pin = Eigen::VectorXd::Zero(p.dim());
          for (size_t k = 0; k < red.pinned_index.size(); ++k) {
            w_pin(red.pinned_index[k]) = red.pinned_values(k);
          }
          std::vector<int> all_idx(p.dim());
          for (int i = 0; i < p.dim(); ++i) all_idx[i] = i;
          Eigen::VectorXd grad = p.cost() + p.hessian_times(all_idx, w_pin);
          inner.nu = p.eq_matrix().transpose().colPivHouseholderQr().solve(grad);
        } else {
          inner.nu.resize(0);
        }
      } else {
        inner = solve_qp(red.inner, s.qp);
      }
    } catch (const EmptyFreeSet&) {
      failed = true;
    } catch (const Infeasible&) {
      failed = true;
    } catch (const DegenerateEqualities&) {
      if (ws.empty()) throw;  // genuinely degenerate problem
      failed = true;
    }

    if (failed) {
      if (ws.empty()) {
        throw InfeasibleWorkingSet("problem infeasible even with the empty working set");
      }
      ws = WorkingSet{};
      out.fell_back = true;
      prev_objective = kInf;
      prev_ws_size = -1;
      continue;
    }

    ++out.reduced_solves;
    QpSolution full = recover_impl(p, red, inner);
    out.objective_path.push_back(full.objective);

    // Each pass must strictly reduce the objective and shrink the guess.
    if (prev_ws_size >= 0) {
      if (ws.size() >= prev_ws_size) {
        throw Error("working-set iteration failed to shrink the pin set");
      }
      if (!(full.objective < prev_objective - 1e-14)) {
        throw Error("working-set iteration failed to decrease the objective");
      }
    }
    prev_objective = full.objective;
    prev_ws_size = ws.size();

    std::vector<int> keep_l, keep_u;
    bool dropped = false;
    for (int i : ws.lower) {
      if (full.beta_l(i) < -s.drop_tol) dropped = true;
      else keep_l.push_back(i);
    }
    for (int i : ws.upper) {
      if (full.beta_u(i) < -s.drop_tol) dropped = true;
      else keep_u.push_back(i);
    }

    if (!dropped) {
      // Tiny negatives within the drop tolerance are rounding, not dual
      // infeasibility; clamp them so reported multipliers stay admissible.
      full.beta_l = full.beta_l.cwiseMax(0.0);
      full.beta_u = full.beta_u.cwiseMax(0.0);
      out.solution = full;
      out.final_set = ws;
      if (!out.fell_back && out.reduced_solves > initial_size + 1) {
        throw Error("working-set iteration exceeded its solve budget");
      }
      return out;
    }
    ws.lower = std::move(keep_l);
    ws.upper = std::move(keep_u);
  }
}

}  // namespace detail

// Projects the problem onto the free variables of `ws`. Throws EmptyFreeSet
// when everything is pinned and the pinned point cannot satisfy Aw = b.
ReducedProblem reduce_problem(const QpProblem& problem, const WorkingSet& ws);

// Bound multipliers for a full-length iterate: pinned entries come from the
// stationarity rows, beta_l_i = (c + Hw - A'nu)_i for lower pins and the
// negative of that for upper pins. Free entries pass through from
// inner_beta_* when given (full-length vectors), else zero.
std::pair<Eigen::VectorXd, Eigen::VectorXd> recover_multipliers(
    const QpProblem& problem, const WorkingSet& ws, const Eigen::VectorXd& full_w,
    const Eigen::VectorXd& nu, const Eigen::VectorXd& inner_beta_l = Eigen::VectorXd(),
    const Eigen::VectorXd& inner_beta_u = Eigen::VectorXd());

// Solves the QP by guessing that the working-set bounds are active: solve
// the reduced problem, recover multipliers, evict every pin whose
// multiplier came out negative, repeat. Terminates within size(ws) + 1
// reduced solves; the objective strictly decreases and the pin set strictly
// shrinks on every pass (both are asserted). An infeasible guess falls back
// to the empty set once.
WorkingSetResult solve_with_working_set(const QpProblem& problem, const WorkingSet& ws,
                                        const WorkingSetSettings& settings = {});

// Pins every variable sitting within `tol` of a finite bound in a previous
// solution. A variable qualifying for both sides lands in `lower`.
WorkingSet warm_start_from(const Eigen::VectorXd& previous_w, const Eigen::VectorXd& l,
                           const Eigen::VectorXd& u, double tol = 1e-9);

}  // namespace scqp
