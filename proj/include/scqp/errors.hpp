#pragma once

#include <stdexcept>
#include <string>

namespace scqp {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A problem was assembled with inconsistent sizes or invalid field values
// (asymmetric Hessian, l > u, bad settings, malformed config).
class InvalidProblem : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidProblem {
 public:
  using InvalidProblem::InvalidProblem;
};

// Cholesky pivot fell below threshold: the quadratic term is not positive
// definite (or a covariance estimate is rank deficient).
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// Equality rows are linearly dependent.
class DegenerateEqualities : public Error {
 public:
  using Error::Error;
};

// No point satisfies the constraint system (unbounded dual step).
class Infeasible : public Error {
 public:
  using Error::Error;
};

// Every variable is pinned by the working set but the pinned point cannot
// satisfy the equality constraints.
class EmptyFreeSet : public Error {
 public:
  using Error::Error;
};

// A guessed working set produced an infeasible reduced problem and the
// empty-set fallback failed as well.
class InfeasibleWorkingSet : public Error {
 public:
  using Error::Error;
};

// Moments fell outside an objective's domain (y <= 0 under a square root,
// x <= r_f for ratio objectives, 1 + x <= 0 for growth objectives).
class DomainViolation : public Error {
 public:
  using Error::Error;
};

// Gradient signs broke the monotonicity requirements (dF/dx < 0, dF/dy > 0)
// at an iterate.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

// Dual variables for the mean-variance constraints grew past the cap while
// the constraints stayed violated: the floors/caps are not attainable.
class InfeasibleSpec : public Error {
 public:
  using Error::Error;
};

// A surrogate was requested with no positive weight on any risk term and no
// regularization, so the quadratic term would be singular.
class NotStrictlyConvex : public Error {
 public:
  using Error::Error;
};

// The dual ascent on the mean-variance constraints ran out of iterations.
class MaxInnerIterations : public Error {
 public:
  using Error::Error;
};

// CSV reader problems carry a 1-based row/column position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int row, int col)
      : Error(what + " (row " + std::to_string(row) + ", col " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_;
  int col_;
};

class NonPositivePrice : public Error {
 public:
  using Error::Error;
};

class NonMonotoneDates : public Error {
 public:
  using Error::Error;
};

class TooFewRows : public Error {
 public:
  using Error::Error;
};

class WindowTooShort : public Error {
 public:
  using Error::Error;
};

// The exhaustive simplex search only runs in dimensions small enough to
// enumerate.
class TooLarge : public Error {
 public:
  using Error::Error;
};

class NoFeasiblePoint : public Error {
 public:
  using Error::Error;
};

// Complexity fits need at least three distinct problem sizes.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

}  // namespace scqp
