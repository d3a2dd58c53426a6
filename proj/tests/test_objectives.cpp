#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "scqp/errors.hpp"
#include "scqp/objectives.hpp"
#include "scqp/qp.hpp"

using namespace scqp;

namespace {

MarketModel two_asset_market() {
  MarketModel mkt;
  Eigen::VectorXd mu(2);
  mu << 0.1, 0.2;
  mkt.mus = {mu};
  mkt.sigmas = {Eigen::MatrixXd::Identity(2, 2)};
  return mkt;
}

Moments mom(double x, double y) {
  Moments m;
  m.x.resize(1);
  m.y.resize(1);
  m.x << x;
  m.y << y;
  return m;
}

// Central difference of F in one moment coordinate.
double fd_x(const ObjectiveModel& model, const Moments& m, double h) {
  Moments hi = m, lo = m;
  hi.x(0) += h;
  lo.x(0) -= h;
  return (objective_value(model, hi) - objective_value(model, lo)) / (2.0 * h);
}

double fd_y(const ObjectiveModel& model, const Moments& m, double h) {
  Moments hi = m, lo = m;
  hi.y(0) += h;
  lo.y(0) -= h;
  return (objective_value(model, hi) - objective_value(model, lo)) / (2.0 * h);
}

}  // namespace

TEST_CASE("moments pick out coordinates for a unit weight vector") {
  MarketModel mkt = two_asset_market();
  Moments m = eval_moments(Eigen::Vector2d(1.0, 0.0), mkt);
  CHECK(m.x(0) == doctest::Approx(0.1));
  CHECK(m.y(0) == doctest::Approx(1.0));

  Moments half = eval_moments(Eigen::Vector2d(0.5, 0.5), mkt);
  CHECK(half.y(0) == doctest::Approx(0.5));

  Moments zero = eval_moments(Eigen::Vector2d::Zero(), mkt);
  CHECK(zero.x(0) == doctest::Approx(0.0));
  CHECK(zero.y(0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(eval_moments(Eigen::Vector3d::Zero(), mkt), DimensionMismatch);
}

TEST_CASE("scaling the weights scales return linearly and risk quadratically") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MarketModel mkt = two_asset_market();
  Eigen::MatrixXd g(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = gauss(rng);
  mkt.sigmas.push_back(g * g.transpose() + 0.1 * Eigen::MatrixXd::Identity(2, 2));
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector2d w(gauss(rng), gauss(rng));
    Moments one = eval_moments(w, mkt);
    Moments two = eval_moments(2.0 * w, mkt);
    for (int i = 0; i < one.x.size(); ++i) {
      CHECK(two.x(i) == doctest::Approx(2.0 * one.x(i)).epsilon(1e-12));
    }
    for (int j = 0; j < one.y.size(); ++j) {
      CHECK(two.y(j) == doctest::Approx(4.0 * one.y(j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("market validation rejects broken inputs") {
  MarketModel mkt = two_asset_market();
  mkt.sigmas.clear();
  CHECK_THROWS_AS(mkt.validate(), InvalidProblem);

  mkt = two_asset_market();
  mkt.sigmas[0](0, 1) = 0.5;  // symmetric partner left at 0
  CHECK_THROWS_AS(mkt.validate(), InvalidProblem);

  mkt = two_asset_market();
  mkt.sigmas[0] = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(mkt.validate(), NotPositiveDefinite);

  mkt = two_asset_market();
  mkt.mus[0] = Eigen::Vector3d::Zero();
  CHECK_THROWS_AS(mkt.validate(), DimensionMismatch);

  CHECK_NOTHROW(two_asset_market().validate());
}

TEST_CASE("objective values match hand computations") {
  CHECK(objective_value(ObjectiveModel::markowitz(2.0), mom(0.15, 0.5)) ==
        doctest::Approx(0.35));
  CHECK(objective_value(ObjectiveModel::sharpe_ratio(0.0), mom(0.2, 0.04)) ==
        doctest::Approx(-1.0));
  CHECK(objective_value(ObjectiveModel::kelly(), mom(0.0, 0.5)) == doctest::Approx(0.25));
  CHECK(objective_value(ObjectiveModel::generalized_sharpe(0.0, 1.0), mom(0.2, 0.1)) ==
        doctest::Approx(-2.0));
  CHECK(objective_value(ObjectiveModel::worst_case(1.0), mom(0.1, 0.25)) ==
        doctest::Approx(0.4));
  CHECK(objective_value(ObjectiveModel::min_variance(), mom(0.3, 0.7)) ==
        doctest::Approx(0.7));
  CHECK(objective_value(ObjectiveModel::max_return(), mom(0.3, 0.7)) ==
        doctest::Approx(-0.3));
}

TEST_CASE("domain guards throw instead of returning nonsense") {
  auto sharpe = ObjectiveModel::sharpe_ratio(0.05);
  CHECK_THROWS_AS(objective_value(sharpe, mom(0.05, 0.1)), DomainViolation);  // x == r_f
  CHECK_THROWS_AS(objective_value(sharpe, mom(0.02, 0.1)), DomainViolation);  // x < r_f
  CHECK_THROWS_AS(objective_value(sharpe, mom(0.2, 0.0)), DomainViolation);   // y == 0
  CHECK_THROWS_AS(objective_gradients(sharpe, mom(0.02, 0.1)), DomainViolation);

  CHECK_THROWS_AS(objective_value(ObjectiveModel::kelly(), mom(-1.0, 0.5)), DomainViolation);
  CHECK_THROWS_AS(objective_value(ObjectiveModel::worst_case(1.0), mom(0.1, -0.2)),
                  DomainViolation);
  CHECK_THROWS_AS(objective_gradients(ObjectiveModel::generalized_sharpe(0.0, 0.75),
                                      mom(0.1, 0.0)),
                  DomainViolation);
}

TEST_CASE("parameter ranges are enforced at construction") {
  CHECK_THROWS_AS(ObjectiveModel::markowitz(-0.1), InvalidProblem);
  CHECK_THROWS_AS(ObjectiveModel::generalized_sharpe(0.0, 0.49), InvalidProblem);
  CHECK_THROWS_AS(ObjectiveModel::worst_case(0.0), InvalidProblem);
  CHECK_THROWS_AS(ObjectiveModel::exp_utility(0.0), InvalidProblem);
  CHECK_NOTHROW(ObjectiveModel::markowitz(0.0));
  CHECK_NOTHROW(ObjectiveModel::generalized_sharpe(0.0, 0.5));
}

TEST_CASE("analytic gradients match their closed forms") {
  // Risk-aversion model: constant gradients everywhere.
  auto [gx_m, gy_m] = objective_gradients(ObjectiveModel::markowitz(2.0), mom(0.4, 1.3));
  CHECK(gx_m(0) == doctest::Approx(-1.0));
  CHECK(gy_m(0) == doctest::Approx(1.0));

  // Sharpe ratio at (0.2, 0.04): raw slopes -5 and 12.5, i.e. (1, 2.5)
  // after dividing by 1/sqrt(y).
  auto [gx_s, gy_s] = objective_gradients(ObjectiveModel::sharpe_ratio(0.0), mom(0.2, 0.04));
  CHECK(gx_s(0) == doctest::Approx(-5.0));
  CHECK(gy_s(0) == doctest::Approx(12.5));
  CHECK(gy_s(0) / -gx_s(0) == doctest::Approx(2.5));

  // Generalized ratio with unit exponent at (0.2, 0.1): scaled slope pair (1, 2).
  auto [gx_g, gy_g] =
      objective_gradients(ObjectiveModel::generalized_sharpe(0.0, 1.0), mom(0.2, 0.1));
  CHECK(gy_g(0) / -gx_g(0) == doctest::Approx(2.0));

  // Robust return model at y = 0.25.
  auto [gx_w, gy_w] = objective_gradients(ObjectiveModel::worst_case(1.0), mom(0.1, 0.25));
  CHECK(gx_w(0) == doctest::Approx(-1.0));
  CHECK(gy_w(0) == doctest::Approx(1.0));

  // Growth objective at the origin.
  auto [gx_k, gy_k] = objective_gradients(ObjectiveModel::kelly(), mom(0.0, 0.0));
  CHECK(gx_k(0) == doctest::Approx(-1.0));
  CHECK(gy_k(0) == doctest::Approx(0.5));

  // Exponential utility, unit curvature, at (0, 0.1).
  auto [gx_e, gy_e] = objective_gradients(ObjectiveModel::exp_utility(1.0), mom(0.0, 0.1));
  CHECK(gx_e(0) == doctest::Approx(-1.05));
  CHECK(gy_e(0) == doctest::Approx(0.5));
}

TEST_CASE("closed-form slope ratios hold at random in-domain points") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(0.05, 0.6);
  std::uniform_real_distribution<double> uy(0.05, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = ux(rng);
    const double y = uy(rng);

    auto [gx_s, gy_s] = objective_gradients(ObjectiveModel::sharpe_ratio(0.01), mom(x, y));
    const double scale_s = std::sqrt(y);
    CHECK(std::abs(-gx_s(0) * scale_s - 1.0) <= 1e-12);
    CHECK(std::abs(gy_s(0) * scale_s - (x - 0.01) / (2.0 * y)) <= 1e-12);

    const double beta = 0.75;
    auto [gx_g, gy_g] =
        objective_gradients(ObjectiveModel::generalized_sharpe(0.01, beta), mom(x, y));
    const double scale_g = std::pow(y, beta);
    CHECK(std::abs(-gx_g(0) * scale_g - 1.0) <= 1e-12);
    CHECK(std::abs(gy_g(0) * scale_g - beta * (x - 0.01) / y) <= 1e-12);

    auto [gx_w, gy_w] = objective_gradients(ObjectiveModel::worst_case(1.5), mom(x, y));
    CHECK(std::abs(gy_w(0) - 1.5 / (2.0 * std::sqrt(y))) <= 1e-12);
    CHECK(std::abs(gx_w(0) + 1.0) <= 1e-12);

    auto [gx_k, gy_k] = objective_gradients(ObjectiveModel::kelly(), mom(x, y));
    const double r = 1.0 + x;
    CHECK(std::abs(-gx_k(0) - (1.0 / r + y / (r * r * r))) <= 1e-12);
    CHECK(std::abs(gy_k(0) - 0.5 / (r * r)) <= 1e-12);

    auto [gx_e, gy_e] = objective_gradients(ObjectiveModel::exp_utility(2.0), mom(x, y));
    const double e = std::exp(-2.0 * x);
    CHECK(std::abs(-gx_e(0) - (2.0 * e + 4.0 * e * y)) <= 1e-12);
    CHECK(std::abs(gy_e(0) - 2.0 * e) <= 1e-12);
  }
}

TEST_CASE("analytic gradients agree with central differences") {
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  struct Setup {
    ObjectiveModel model;
    double x_lo, x_hi, y_lo, y_hi;
  };
  const Setup setups[] = {
      {ObjectiveModel::markowitz(2.0), -0.5, 0.5, 0.05, 2.0},
      {ObjectiveModel::sharpe_ratio(0.01), 0.05, 0.6, 0.05, 2.0},
      {ObjectiveModel::generalized_sharpe(0.01, 0.75), 0.05, 0.6, 0.05, 2.0},
      {ObjectiveModel::worst_case(1.5), -0.5, 0.5, 0.05, 2.0},
      {ObjectiveModel::exp_utility(2.0), -0.5, 0.5, 0.05, 2.0},
      {ObjectiveModel::kelly(), -0.5, 1.0, 0.05, 2.0},
      {ObjectiveModel::min_variance(), -0.5, 0.5, 0.05, 2.0},
      {ObjectiveModel::max_return(), -0.5, 0.5, 0.05, 2.0},
  };
  for (const Setup& s : setups) {
    std::uniform_real_distribution<double> ux(s.x_lo, s.x_hi);
    std::uniform_real_distribution<double> uy(s.y_lo, s.y_hi);
    for (int trial = 0; trial < 50; ++trial) {
      Moments m = mom(ux(rng), uy(rng));
      auto [gx, gy] = objective_gradients(s.model, m);
      const double fdx = fd_x(s.model, m, h);
      const double fdy = fd_y(s.model, m, h);
      CHECK(std::abs(gx(0) - fdx) <= 1e-5 * std::max(1.0, std::abs(gx(0))));
      CHECK(std::abs(gy(0) - fdy) <= 1e-5 * std::max(1.0, std::abs(gy(0))));
    }
  }
}

TEST_CASE("unused moment slots stay zero in the gradient vectors") {
  Moments m;
  m.x.resize(2);
  m.y.resize(2);
  m.x << 0.2, 0.5;
  m.y << 0.04, 0.9;
  auto [gx, gy] = objective_gradients(ObjectiveModel::sharpe_ratio(0.0), m);
  CHECK(gx.size() == 2);
  CHECK(gy.size() == 2);
  CHECK(gx(1) == 0.0);
  CHECK(gy(1) == 0.0);

  auto [gx_mv, gy_mv] = objective_gradients(ObjectiveModel::min_variance(), m);
  CHECK(gx_mv(0) == 0.0);
  CHECK(gy_mv(0) == doctest::Approx(1.0));
}

TEST_CASE("constraint residuals are signed violations with inactive infinities") {
  MvpSpec spec;
  spec.objective = ObjectiveModel::markowitz(1.0);
  spec.return_floors.resize(1);
  spec.risk_caps.resize(1);
  spec.return_floors << 0.1;
  spec.risk_caps << 0.5;
  Eigen::VectorXd g = constraint_values(spec, mom(0.15, 0.68));
  CHECK(g(0) == doctest::Approx(-0.05));  // floor satisfied with slack
  CHECK(g(1) == doctest::Approx(0.18));   // cap violated

  spec.return_floors << -kInf;
  spec.risk_caps << kInf;
  Eigen::VectorXd off = constraint_values(spec, mom(0.15, 0.68));
  CHECK(off(0) == -kInf);
  CHECK(off(1) == -kInf);

  spec.risk_caps.resize(2);
  CHECK_THROWS_AS(constraint_values(spec, mom(0.15, 0.68)), DimensionMismatch);
}

TEST_CASE("monotonicity check reports instead of throwing") {
  CHECK(check_assumption1(ObjectiveModel::markowitz(2.0), mom(-5.0, 3.0)).ok);
  CHECK(check_assumption1(ObjectiveModel::exp_utility(1.0), mom(0.0, 0.1)).ok);

  // Below the risk-free rate the risk slope flips sign.
  Assumption1Report rep =
      check_assumption1(ObjectiveModel::sharpe_ratio(0.1), mom(0.0, 0.25));
  CHECK_FALSE(rep.ok);
  CHECK(rep.moment == 'y');
  CHECK(rep.index == 0);
  CHECK(rep.gradient < 0.0);

  // A utility rigged to dislike return trips the return-side check.
  auto bad = ObjectiveModel::expected_utility(
      [](double r) { return -r; }, [](double) { return -1.0; },
      [](double) { return -1.0; }, [](double) { return 0.0; });
  Assumption1Report bad_rep = check_assumption1(bad, mom(0.1, 0.2));
  CHECK_FALSE(bad_rep.ok);
  CHECK(bad_rep.moment == 'x');
  CHECK_THROWS_AS(objective_gradients(bad, mom(0.1, 0.2)), AssumptionViolated);
}

TEST_CASE("pure return maximization ignores the risk moment") {
  auto flat = ObjectiveModel::markowitz(0.0);
  CHECK_FALSE(flat.uses_y());
  Moments m;
  m.x.resize(1);
  m.x << 0.3;
  m.y.resize(0);  // no risk moment supplied at all
  CHECK(objective_value(flat, m) == doctest::Approx(-0.3));
  CHECK(check_assumption1(flat, m).ok);
}
