#include "scqp/objectives.hpp"

#include <cmath>
#include <limits>

namespace scqp {

namespace {

const char* kind_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Markowitz: return "markowitz";
    case ObjectiveKind::SharpeRatio: return "sharpe";
    case ObjectiveKind::GeneralizedSharpe: return "generalized-sharpe";
    case ObjectiveKind::WorstCase: return "worst-case";
    case ObjectiveKind::ExpectedUtility: return "expected-utility";
    case ObjectiveKind::Kelly: return "kelly";
    case ObjectiveKind::MinVariance: return "min-variance";
    case ObjectiveKind::MaxReturn: return "max-return";
  }
  return "?";
}

void require_sizes(const ObjectiveModel& model, const Moments& m) {
  if (model.uses_x() && m.x.size() < 1) {
    throw DimensionMismatch(std::string(kind_name(model.kind)) +
                            " needs a return moment but none was supplied");
  }
  if (model.uses_y() && m.y.size() < 1) {
    throw DimensionMismatch(std::string(kind_name(model.kind)) +
                            " needs a risk moment but none was supplied");
  }
}

// Domain limits without which the formulas are undefined, independent of
// any monotonicity consideration.
void require_hard_domain(const ObjectiveModel& model, const Moments& m) {
  switch (model.kind) {
    case ObjectiveKind::SharpeRatio:
    case ObjectiveKind::GeneralizedSharpe:
    case ObjectiveKind::WorstCase:
      if (m.y(0) <= 0.0) {
        throw DomainViolation(std::string(kind_name(model.kind)) +
                              " requires a strictly positive risk moment");
      }
      break;
    case ObjectiveKind::Kelly:
      if (m.x(0) <= -1.0) {
        throw DomainViolation("growth objective requires 1 + x > 0 (portfolio not ruined)");
      }
      break;
    default:
      break;
  }
}

// The ratio objectives are only meaningful above the risk-free rate; below
// it the risk gradient flips sign and the problem stops being a portfolio
// selection question.
void require_excess_return(const ObjectiveModel& model, const Moments& m) {
  if (model.kind == ObjectiveKind::SharpeRatio ||
      model.kind == ObjectiveKind::GeneralizedSharpe) {
    if (m.x(0) <= model.risk_free) {
      throw DomainViolation(std::string(kind_name(model.kind)) +
                            " requires expected return above the risk-free rate");
    }
  }
}

struct RawGradient {
  double fx = 0.0;  // dF/dx_1
  double fy = 0.0;  // dF/dy_1
};

RawGradient raw_gradient(const ObjectiveModel& model, const Moments& m) {
  RawGradient g;
  const double x = model.uses_x() ? m.x(0) : 0.0;
  const double y = model.uses_y() ? m.y(0) : 0.0;
  switch (model.kind) {
    case ObjectiveKind::Markowitz:
      g.fx = -1.0;
      g.fy = 0.5 * model.alpha;
      break;
    case ObjectiveKind::SharpeRatio: {
      const double s = std::sqrt(y);
      g.fx = -1.0 / s;
      g.fy = (x - model.risk_free) / (2.0 * y * s);
      break;
    }
    case ObjectiveKind::GeneralizedSharpe: {
      const double yb = std::pow(y, model.beta);
      g.fx = -1.0 / yb;
      g.fy = model.beta * (x - model.risk_free) / (yb * y);
      break;
    }
    case ObjectiveKind::WorstCase:
      g.fx = -1.0;
      g.fy = 0.5 * model.alpha / std::sqrt(y);
      break;
    case ObjectiveKind::ExpectedUtility:
      g.fx = -(model.u1(x) + 0.5 * model.u3(x) * y);
      g.fy = -0.5 * model.u2(x);
      break;
    case ObjectiveKind::Kelly: {
      const double r = 1.0 + x;
      g.fx = -1.0 / r - y / (r * r * r);
      g.fy = 0.5 / (r * r);
      break;
    }
    case ObjectiveKind::MinVariance:
      g.fy = 1.0;
      break;
    case ObjectiveKind::MaxReturn:
      g.fx = -1.0;
      break;
  }
  return g;
}

}  // namespace

void MarketModel::validate() const {
  if (sigmas.empty()) throw InvalidProblem("market needs at least one covariance estimate");
  const int n = dim();
  if (n <= 0) throw InvalidProblem("market has no assets");
  for (const auto& mu : mus) {
    if (mu.size() != n) throw DimensionMismatch("mean estimates disagree in length");
  }
  for (const auto& sig : sigmas) {
    if (sig.rows() != n || sig.cols() != n) {
      throw DimensionMismatch("covariance estimates disagree in dimension");
    }
    const double scale = std::max(1.0, sig.cwiseAbs().maxCoeff());
    if ((sig - sig.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw InvalidProblem("covariance estimate is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sig);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("covariance estimate is not positive definite");
    }
  }
}

ObjectiveModel ObjectiveModel::markowitz(double alpha) {
  ObjectiveModel m;
  m.kind = ObjectiveKind::Markowitz;
  m.alpha = alpha;
  m.validate();
  return m;
}

ObjectiveModel ObjectiveModel::sharpe_ratio(double risk_free) {
  ObjectiveModel m;
  m.kind = ObjectiveKind::SharpeRatio;
  m.risk_free = risk_free;
  return m;
}

ObjectiveModel ObjectiveModel::generalized_sharpe(double risk_free, double beta) {
  ObjectiveModel m;
  m.kind = ObjectiveKind::GeneralizedSharpe;
  m.risk_free = risk_free;
  m.beta = beta;
  m.validate();
  return m;
}

ObjectiveModel ObjectiveModel::worst_case(double alpha) {
  ObjectiveModel m;
  m.kind = ObjectiveKind::WorstCase;
  m.alpha = alpha;
  m.validate();
  return m;
}

ObjectiveModel ObjectiveModel::exp_utility(double gamma) {
  ObjectiveModel m;
  m.kind = ObjectiveKind::ExpectedUtility;
  m.gamma = gamma;
  m.validate();
  const double g = gamma;
  m.u0 = [g](double r) { return -std::exp(-g * r); };
  m.u1 = [g](double r) { return g * std::exp(-g * r); };
  m.u2 = [g](double r) { return -g * g * std::exp(-g * r); };
  m.u3 = [g](double r) { return g * g * g * std::exp(-g * r); };
  return m;
}

ObjectiveModel ObjectiveModel::expected_utility(std::function<double(double)> u,
                                                std::function<double(double)> du,
                                                std::function<double(double)> d2u,
                                                std::function<double(double)> d3u) {
  ObjectiveModel m;
  m.kind = ObjectiveKind::ExpectedUtility;
  m.u0 = std::move(u);
  m.u1 = std::move(du);
  m.u2 = std::move(d2u);
  m.u3 = std::move(d3u);
  m.validate();
  return m;
}

ObjectiveModel ObjectiveModel::kelly() {
  ObjectiveModel m;
  m.kind = ObjectiveKind::Kelly;
  return m;
}

ObjectiveModel ObjectiveModel::min_variance() {
  ObjectiveModel m;
  m.kind = ObjectiveKind::MinVariance;
  return m;
}

ObjectiveModel ObjectiveModel::max_return() {
  ObjectiveModel m;
  m.kind = ObjectiveKind::MaxReturn;
  return m;
}

bool ObjectiveModel::uses_x() const { return kind != ObjectiveKind::MinVariance; }

bool ObjectiveModel::uses_y() const {
  if (kind == ObjectiveKind::MaxReturn) return false;
  if (kind == ObjectiveKind::Markowitz) return alpha > 0.0;
  return true;
}

void ObjectiveModel::validate() const {
  switch (kind) {
    case ObjectiveKind::Markowitz:
      if (alpha < 0.0) throw InvalidProblem("risk aversion must be nonnegative");
      break;
    case ObjectiveKind::GeneralizedSharpe:
      if (beta < 0.5) throw InvalidProblem("risk exponent must be at least 1/2");
      break;
    case ObjectiveKind::WorstCase:
      if (alpha <= 0.0) throw InvalidProblem("uncertainty radius must be positive");
      break;
    case ObjectiveKind::ExpectedUtility:
      if (!u0 && gamma <= 0.0) {
        throw InvalidProblem("utility curvature must be positive");
      }
      if (u0 && (!u1 || !u2 || !u3)) {
        throw InvalidProblem("custom utility needs all three derivatives");
      }
      break;
    default:
      break;
  }
}

Moments eval_moments(const Eigen::VectorXd& w, const MarketModel& market) {
  const int n = market.dim();
  if (w.size() != n) throw DimensionMismatch("weight vector does not match asset count");
  Moments m;
  m.x.resize(market.mean_count());
  m.y.resize(market.risk_count());
  for (int i = 0; i < market.mean_count(); ++i) m.x(i) = market.mus[i].dot(w);
  for (int j = 0; j < market.risk_count(); ++j) m.y(j) = w.dot(market.sigmas[j] * w);
  return m;
}

double objective_value(const ObjectiveModel& model, const Moments& m) {
  model.validate();
  require_sizes(model, m);
  require_hard_domain(model, m);
  require_excess_return(model, m);
  switch (model.kind) {
    case ObjectiveKind::Markowitz:
      // alpha = 0 collapses to pure return maximization; y may then be absent
      return -m.x(0) + (model.alpha > 0.0 ? 0.5 * model.alpha * m.y(0) : 0.0);
    case ObjectiveKind::SharpeRatio:
      return -(m.x(0) - model.risk_free) / std::sqrt(m.y(0));
    case ObjectiveKind::GeneralizedSharpe:
      return -(m.x(0) - model.risk_free) / std::pow(m.y(0), model.beta);
    case ObjectiveKind::WorstCase:
      return -m.x(0) + model.alpha * std::sqrt(m.y(0));
    case ObjectiveKind::ExpectedUtility:
      return -(model.u0(m.x(0)) + 0.5 * model.u2(m.x(0)) * m.y(0));
    case ObjectiveKind::Kelly: {
      const double r = 1.0 + m.x(0);
      return -std::log(r) + 0.5 * m.y(0) / (r * r);
    }
    case ObjectiveKind::MinVariance:
      return m.y(0);
    case ObjectiveKind::MaxReturn:
      return -m.x(0);
  }
  throw Error("unreachable objective kind");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> objective_gradients(const ObjectiveModel& model,
                                                                const Moments& m) {
  model.validate();
  require_sizes(model, m);
  require_hard_domain(model, m);
  require_excess_return(model, m);
  const RawGradient g = raw_gradient(model, m);
  if (model.uses_x() && !(g.fx < 0.0)) {
    throw AssumptionViolated("objective fails to reward expected return (dF/dx >= 0)");
  }
  if (model.uses_y() && !(g.fy > 0.0)) {
    throw AssumptionViolated("objective fails to penalize risk (dF/dy <= 0)");
  }
  Eigen::VectorXd gx = Eigen::VectorXd::Zero(m.x.size());
  Eigen::VectorXd gy = Eigen::VectorXd::Zero(m.y.size());
  if (model.uses_x()) gx(0) = g.fx;
  if (model.uses_y()) gy(0) = g.fy;
  return {gx, gy};
}

Eigen::VectorXd constraint_values(const MvpSpec& spec, const Moments& m) {
  if (spec.return_floors.size() != m.x.size()) {
    throw DimensionMismatch("return floors do not match the number of mean estimates");
  }
  if (spec.risk_caps.size() != m.y.size()) {
    throw DimensionMismatch("risk caps do not match the number of covariance estimates");
  }
  Eigen::VectorXd g(m.x.size() + m.y.size());
  for (int i = 0; i < m.x.size(); ++i) {
    g(i) = std::isfinite(spec.return_floors(i))
               ? spec.return_floors(i) - m.x(i)
               : -std::numeric_limits<double>::infinity();
  }
  for (int j = 0; j < m.y.size(); ++j) {
    g(m.x.size() + j) = std::isfinite(spec.risk_caps(j))
                            ? m.y(j) - spec.risk_caps(j)
                            : -std::numeric_limits<double>::infinity();
  }
  return g;
}

Assumption1Report check_assumption1(const ObjectiveModel& model, const Moments& m) {
  model.validate();
  require_sizes(model, m);
  require_hard_domain(model, m);
  const RawGradient g = raw_gradient(model, m);
  Assumption1Report rep;
  if (model.uses_x() && !(g.fx < 0.0)) {
    rep.ok = false;
    rep.moment = 'x';
    rep.index = 0;
    rep.gradient = g.fx;
    rep.message = "higher expected return does not improve the objective";
    return rep;
  }
  if (model.uses_y() && !(g.fy > 0.0)) {
    rep.ok = false;
    rep.moment = 'y';
    rep.index = 0;
    rep.gradient = g.fy;
    rep.message = "higher risk does not worsen the objective";
    return rep;
  }
  return rep;
}

}  // namespace scqp
