#include "scqp/qp.hpp"

#include <algorithm>
#include <cmath>

namespace scqp {

namespace {

// Pivot-checked lower Cholesky, H = L L'. Returns false when a pivot falls
// at or below `pivot_floor`.
bool cholesky_lower(const Eigen::MatrixXd& H, double pivot_floor, Eigen::MatrixXd& L) {
  const int n = static_cast<int>(H.rows());
  L.setZero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = H(j, j) - L.row(j).head(j).squaredNorm();
    if (d <= pivot_floor) return false;
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      L(i, j) = (H(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / ljj;
    }
  }
  return true;
}

// Constraint identifiers inside the active set. Equality row e is `e`;
// the lower bound of variable i is m + 2i, its upper bound m + 2i + 1.
struct ActiveId {
  static int lower(int m, int i) { return m + 2 * i; }
  static int upper(int m, int i) { return m + 2 * i + 1; }
};

class DualActiveSet {
 public:
  DualActiveSet(const QpProblem& p, const QpSettings& s) : p_(p), s_(s), n_(p.dim()), m_(p.eq_count()) {}

  QpSolution run() {
    factorize();
    w_ = solve_h(-p_.c);
    active_.clear();
    active_flag_.assign(m_ + 2 * n_, 0);
    u_.setZero(n_ + m_);
    q_ = 0;
    R_.setZero(n_, n_);

    add_equalities();
    const int max_steps = s_.max_iteration_factor * (n_ + m_ + 1);
    int steps = 0;

    for (;;) {
      int idx = -1;
      bool is_lower = true;
      if (!most_violated_bound(idx, is_lower)) break;  // primal feasible -> optimal

      // Resolve one violated bound; may drop blocking constraints on the way.
      Eigen::VectorXd np = Eigen::VectorXd::Zero(n_);
      np(idx) = is_lower ? 1.0 : -1.0;
      const double rhs = is_lower ? p_.l(idx) : -p_.u(idx);
      double slack = np.dot(w_) - rhs;
      double u_plus = 0.0;

      for (;;) {
        if (++steps > max_steps) {
          throw Error("dual active-set method exceeded its iteration cap");
        }
        const Eigen::VectorXd d = J_.transpose() * np;
        const Eigen::VectorXd z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
        Eigen::VectorXd r;
        if (q_ > 0) {
          r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
        }

        // Dual step length: first active inequality whose multiplier hits zero.
        double t1 = kInf;
        int drop = -1;
        for (int k = meq_active_; k < q_; ++k) {
          if (r(k) > 0.0) {
            const double ratio = u_(k) / r(k);
            if (ratio < t1) {
              t1 = ratio;
              drop = k;
            }
          }
        }

        // Primal step length: reach the violated bound along z.
        const double z2 = d.tail(n_ - q_).squaredNorm();
        const bool z_zero = z2 <= s_.dependence_tol * s_.dependence_tol * d.squaredNorm();
        const double t2 = z_zero ? kInf : -slack / z2;

        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          throw Infeasible("constraints admit no feasible point (dual step unbounded)");
        }

        if (z_zero) {
          // Step in the dual only, freeing the blocking constraint.
          u_.head(q_) -= t * r;
          u_plus += t;
          delete_active(drop);
          continue;
        }

        w_ += t * z;
        if (q_ > 0) u_.head(q_) -= t * r;
        u_plus += t;
        slack = np.dot(w_) - rhs;

        if (t == t2) {
          u_(q_) = u_plus;
          append_active(is_lower ? ActiveId::lower(m_, idx) : ActiveId::upper(m_, idx), d);
          break;
        }
        delete_active(drop);
      }
    }

    return extract(steps);
  }

 private:
  void factorize() {
    const double maxdiag = p_.H.diagonal().maxCoeff();
    const double floor = s_.pd_pivot_scale * std::max(maxdiag, 0.0);
    if (maxdiag <= 0.0 || !cholesky_lower(p_.H, floor, L_)) {
      throw NotPositiveDefinite("quadratic term is not positive definite");
    }
    // J = L^{-T}; later constraint additions rotate its columns in place.
    J_ = L_.transpose()
             .triangularView<Eigen::Upper>()
             .solve(Eigen::MatrixXd::Identity(n_, n_));
  }

  Eigen::VectorXd solve_h(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd y = L_.triangularView<Eigen::Lower>().solve(rhs);
    return L_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  void add_equalities() {
    meq_active_ = 0;
    for (int e = 0; e < m_; ++e) {
      const Eigen::VectorXd np = p_.A.row(e).transpose();
      const Eigen::VectorXd d = J_.transpose() * np;
      const double z2 = d.tail(n_ - q_).squaredNorm();
      if (z2 <= s_.dependence_tol * s_.dependence_tol * d.squaredNorm()) {
        throw DegenerateEqualities("equality rows are linearly dependent");
      }
      const Eigen::VectorXd z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
      const double slack = np.dot(w_) - p_.b(e);
      const double t = -slack / z2;
      w_ += t * z;
      if (q_ > 0) {
        Eigen::VectorXd r =
            R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
        u_.head(q_) -= t * r;
      }
      u_(q_) = t;
      append_active(e, d);
      ++meq_active_;
    }
  }

  // Most negative relative slack wins; the strict comparison plus the scan
  // order resolves ties to the lowest variable index, lower bound first.
  bool most_violated_bound(int& idx, bool& is_lower) const {
    double worst = -s_.violation_tol;
    idx = -1;
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.l(i)) && !active_flag_[ActiveId::lower(m_, i)]) {
        const double v = (w_(i) - p_.l(i)) / (1.0 + std::abs(p_.l(i)));
        if (v < worst) {
          worst = v;
          idx = i;
          is_lower = true;
        }
      }
      if (std::isfinite(p_.u(i)) && !active_flag_[ActiveId::upper(m_, i)]) {
        const double v = (p_.u(i) - w_(i)) / (1.0 + std::abs(p_.u(i)));
        if (v < worst) {
          worst = v;
          idx = i;
          is_lower = false;
        }
      }
    }
    return idx >= 0;
  }

  // Rotate d so only its first q_+1 entries survive, mirror the rotations on
  // J's columns, then store the new column of R.
  void append_active(int id, Eigen::VectorXd d) {
    for (int k = n_ - 1; k > q_; --k) {
      const double a = d(k - 1);
      const double bb = d(k);
      const double h = std::hypot(a, bb);
      if (h == 0.0) continue;
      const double cc = a / h;
      const double ss = bb / h;
      d(k - 1) = h;
      d(k) = 0.0;
      const Eigen::VectorXd col_prev = J_.col(k - 1);
      J_.col(k - 1) = cc * col_prev + ss * J_.col(k);
      J_.col(k) = -ss * col_prev + cc * J_.col(k);
    }
    R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    active_.push_back(id);
    active_flag_[id] = 1;
    ++q_;
  }

  // Remove active constraint at position `pos` (never an equality) and
  // restore R's triangular shape.
  void delete_active(int pos) {
    if (pos < meq_active_ || pos >= q_) {
      throw Error("dual active-set bookkeeping error (bad drop index)");
    }
    active_flag_[active_[pos]] = 0;
    active_.erase(active_.begin() + pos);
    for (int k = pos; k < q_ - 1; ++k) {
      R_.col(k).head(q_) = R_.col(k + 1).head(q_);
      u_(k) = u_(k + 1);
    }
    u_(q_ - 1) = 0.0;
    --q_;
    for (int k = pos; k < q_; ++k) {
      const double a = R_(k, k);
      const double bb = R_(k + 1, k);
      const double h = std::hypot(a, bb);
      if (h == 0.0) continue;
      const double cc = a / h;
      const double ss = bb / h;
      for (int col = k; col < q_; ++col) {
        const double rk = R_(k, col);
        const double rk1 = R_(k + 1, col);
        R_(k, col) = cc * rk + ss * rk1;
        R_(k + 1, col) = -ss * rk + cc * rk1;
      }
      const Eigen::VectorXd col_k = J_.col(k);
      J_.col(k) = cc * col_k + ss * J_.col(k + 1);
      J_.col(k + 1) = -ss * col_k + cc * J_.col(k + 1);
    }
  }

  QpSolution extract(int steps) const {
    QpSolution out;
    out.w = w_;
    out.nu.setZero(m_);
    out.beta_l.setZero(n_);
    out.beta_u.setZero(n_);
    for (int k = 0; k < q_; ++k) {
      const int id = active_[k];
      if (id < m_) {
        out.nu(id) = u_(k);
      } else if ((id - m_) % 2 == 0) {
        out.beta_l((id - m_) / 2) = std::max(u_(k), 0.0);
      } else {
        out.beta_u((id - m_) / 2) = std::max(u_(k), 0.0);
      }
    }
    out.objective = p_.c.dot(w_) + 0.5 * w_.dot(p_.H * w_);
    out.iterations = steps;
    return out;
  }

  const QpProblem& p_;
  const QpSettings& s_;
  int n_;
  int m_;
  int meq_active_ = 0;
  int q_ = 0;
  Eigen::MatrixXd L_, J_, R_;
  Eigen::VectorXd w_;
  Eigen::VectorXd u_;
  std::vector<int> active_;
  std::vector<char> active_flag_;
};

}  // namespace

Eigen::MatrixXd QpProblem::hessian_block(const std::vector<int>& rows,
                                         const std::vector<int>& cols) const {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < cols.size(); ++j) {
      out(i, j) = H(rows[i], cols[j]);
    }
  }
  return out;
}

Eigen::VectorXd QpProblem::hessian_times(const std::vector<int>& cols,
                                         const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  for (size_t j = 0; j < cols.size(); ++j) {
    out += H.col(cols[j]) * v(static_cast<int>(j));
  }
  return out;
}

void QpProblem::validate() const {
  const int n = dim();
  if (H.rows() != n || H.cols() != n) {
    throw DimensionMismatch("H must be n x n");
  }
  if (l.size() != n || u.size() != n) {
    throw DimensionMismatch("bounds must have length n");
  }
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n)) {
    throw DimensionMismatch("A/b sizes inconsistent with n");
  }
  const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw InvalidProblem("H is not symmetric (max |H - H'| = " + std::to_string(asym) + ")");
  }
  for (int i = 0; i < n; ++i) {
    if (!(l(i) <= u(i))) {
      throw InvalidProblem("bound l > u at variable " + std::to_string(i));
    }
  }
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  problem.validate();
  if (problem.dim() == 0) {
    throw InvalidProblem("empty problem");
  }
  DualActiveSet solver(problem, settings);
  return solver.run();
}

double kkt_residual(const QpProblem& problem, const QpSolution& solution) {
  problem.validate();
  const int n = problem.dim();
  const int m = problem.eq_count();
  if (solution.w.size() != n || solution.beta_l.size() != n || solution.beta_u.size() != n ||
      solution.nu.size() != m) {
    throw DimensionMismatch("solution sizes do not match problem");
  }

  Eigen::VectorXd grad = problem.c + problem.H * solution.w;
  if (m > 0) grad -= problem.A.transpose() * solution.nu;
  grad -= solution.beta_l;
  grad += solution.beta_u;
  double res = grad.cwiseAbs().maxCoeff();

  if (m > 0) {
    res = std::max(res, (problem.A * solution.w - problem.b).cwiseAbs().maxCoeff());
  }
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(problem.l(i))) {
      res = std::max(res, problem.l(i) - solution.w(i));
      res = std::max(res, solution.beta_l(i) * std::abs(solution.w(i) - problem.l(i)));
    } else {
      // A multiplier on a nonexistent bound is itself a violation.
      res = std::max(res, std::abs(solution.beta_l(i)));
    }
    if (std::isfinite(problem.u(i))) {
      res = std::max(res, solution.w(i) - problem.u(i));
      res = std::max(res, solution.beta_u(i) * std::abs(problem.u(i) - solution.w(i)));
    } else {
      res = std::max(res, std::abs(solution.beta_u(i)));
    }
    res = std::max(res, -solution.beta_l(i));
    res = std::max(res, -solution.beta_u(i));
  }
  return res;
}

}  // namespace scqp
