#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "scqp/errors.hpp"
#include "scqp/market_data.hpp"
#include "scqp/objectives.hpp"
#include "scqp/solver.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("synthetic markets are reproducible and well conditioned") {
  const scqp::MarketModel a = scqp::generate_market(3, 2, 2, 7);
  const scqp::MarketModel b = scqp::generate_market(3, 2, 2, 7);
  REQUIRE(a.mus.size() == 2);
  REQUIRE(a.sigmas.size() == 2);
  CHECK(a.dim() == 3);

  for (size_t k = 0; k < a.mus.size(); ++k) {
    CHECK((a.mus[k].array() == b.mus[k].array()).all());
    CHECK(a.mus[k].minCoeff() >= -0.001);
    CHECK(a.mus[k].maxCoeff() <= 0.003);
  }
  for (size_t k = 0; k < a.sigmas.size(); ++k) {
    CHECK((a.sigmas[k].array() == b.sigmas[k].array()).all());
    CHECK((a.sigmas[k] - a.sigmas[k].transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.sigmas[k]);
    CHECK(es.eigenvalues().minCoeff() > 1e-4);  // the identity floor plus G G'
  }

  const scqp::MarketModel c = scqp::generate_market(3, 2, 2, 8);
  CHECK((a.mus[0] - c.mus[0]).cwiseAbs().maxCoeff() > 0.0);

  const scqp::MarketModel one = scqp::generate_market(1, 1, 1, 3);
  CHECK(one.sigmas[0].rows() == 1);
  CHECK(one.sigmas[0](0, 0) > 1e-4);

  CHECK_THROWS_AS(scqp::generate_market(0, 1, 1, 1), scqp::InvalidProblem);
  CHECK_THROWS_AS(scqp::generate_market(2, 1, 0, 1), scqp::InvalidProblem);
}

TEST_CASE("csv price loading keeps order and reports failure positions") {
  const std::string good = write_temp_csv(
      "scqp_good.csv", "date,AAA,BBB\n2024-01-02,100,50\n2024-01-03,110,49\n");
  const scqp::PricePanel panel = scqp::load_prices_csv(good);
  REQUIRE(panel.tickers == (std::vector<std::string>{"AAA", "BBB"}));
  REQUIRE(panel.prices.rows() == 2);
  REQUIRE(panel.prices.cols() == 2);
  CHECK(panel.prices(0, 0) == 100.0);
  CHECK(panel.prices(0, 1) == 50.0);
  CHECK(panel.prices(1, 0) == 110.0);
  CHECK(panel.prices(1, 1) == 49.0);
  CHECK(panel.dates == (std::vector<std::string>{"2024-01-02", "2024-01-03"}));

  SUBCASE("non numeric cell cites its file row and column") {
    const std::string bad = write_temp_csv(
        "scqp_badcell.csv", "date,AAA,BBB\n2024-01-02,100,50\n2024-01-03,abc,49\n");
    try {
      scqp::load_prices_csv(bad);
      FAIL("expected ParseError");
    } catch (const scqp::ParseError& e) {
      CHECK(e.row() == 3);
      CHECK(e.col() == 2);
    }
  }

  SUBCASE("a short row cites the first missing cell") {
    const std::string ragged = write_temp_csv(
        "scqp_ragged.csv", "date,AAA,BBB\n2024-01-02,100,50\n2024-01-03,110\n");
    try {
      scqp::load_prices_csv(ragged);
      FAIL("expected ParseError");
    } catch (const scqp::ParseError& e) {
      CHECK(e.row() == 3);
      CHECK(e.col() == 3);
    }
  }

  SUBCASE("prices must be strictly positive") {
    const std::string zero = write_temp_csv(
        "scqp_zero.csv", "date,AAA\n2024-01-02,100\n2024-01-03,0\n");
    CHECK_THROWS_AS(scqp::load_prices_csv(zero), scqp::NonPositivePrice);
    const std::string neg = write_temp_csv(
        "scqp_neg.csv", "date,AAA\n2024-01-02,-5\n2024-01-03,100\n");
    CHECK_THROWS_AS(scqp::load_prices_csv(neg), scqp::NonPositivePrice);
  }

  SUBCASE("date labels must strictly increase") {
    const std::string back = write_temp_csv(
        "scqp_back.csv", "date,AAA\n2024-01-05,100\n2024-01-04,101\n");
    CHECK_THROWS_AS(scqp::load_prices_csv(back), scqp::NonMonotoneDates);
    const std::string dup = write_temp_csv(
        "scqp_dup.csv", "date,AAA\n2024-01-05,100\n2024-01-05,101\n");
    CHECK_THROWS_AS(scqp::load_prices_csv(dup), scqp::NonMonotoneDates);
  }

  SUBCASE("structural problems") {
    CHECK_THROWS_AS(scqp::load_prices_csv("/nonexistent/prices.csv"), scqp::InvalidProblem);
    const std::string headerless = write_temp_csv("scqp_dateonly.csv", "date\n");
    CHECK_THROWS_AS(scqp::load_prices_csv(headerless), scqp::ParseError);
  }
}

TEST_CASE("returns are simple per period changes") {
  scqp::PricePanel p;
  p.dates = {"d1", "d2", "d3"};
  p.tickers = {"A"};
  p.prices.resize(3, 1);
  p.prices << 100.0, 110.0, 55.0;

  const scqp::ReturnPanel r = scqp::to_returns(p);
  REQUIRE(r.returns.rows() == 2);
  CHECK(r.returns(0, 0) == doctest::Approx(0.10));
  CHECK(r.returns(1, 0) == doctest::Approx(-0.5));

  scqp::PricePanel flat;
  flat.dates = {"d1", "d2"};
  flat.tickers = {"A"};
  flat.prices.resize(2, 1);
  flat.prices << 42.0, 42.0;
  CHECK(scqp::to_returns(flat).returns(0, 0) == 0.0);

  scqp::PricePanel single;
  single.dates = {"d1"};
  single.tickers = {"A"};
  single.prices.resize(1, 1);
  single.prices << 42.0;
  CHECK_THROWS_AS(scqp::to_returns(single), scqp::TooFewRows);
}

TEST_CASE("moment estimation matches hand arithmetic") {
  scqp::ReturnPanel rp;
  rp.returns.resize(2, 2);
  rp.returns << 0.1, 0.0, -0.1, 0.0;

  // The second asset never moves: the unshrunk covariance is singular.
  CHECK_THROWS_AS(scqp::estimate_moments(rp, {{0, 2}}, 0.0), scqp::NotPositiveDefinite);

  const scqp::MarketModel mkt = scqp::estimate_moments(rp, {{0, 2}}, 0.1);
  REQUIRE(mkt.mus.size() == 1);
  CHECK(mkt.mus[0](0) == 0.0);
  CHECK(mkt.mus[0](1) == 0.0);
  CHECK(mkt.sigmas[0](0, 0) == doctest::Approx(0.021));   // 0.02 + 0.1 * (0.02 / 2)
  CHECK(mkt.sigmas[0](1, 1) == doctest::Approx(0.001));
  CHECK(mkt.sigmas[0](0, 1) == 0.0);

  SUBCASE("window validation") {
    CHECK_THROWS_AS(scqp::estimate_moments(rp, {{0, 1}}, 0.1), scqp::WindowTooShort);
    CHECK_THROWS_AS(scqp::estimate_moments(rp, {{1, 1}}, 0.1), scqp::WindowTooShort);
    CHECK_THROWS_AS(scqp::estimate_moments(rp, {{0, 3}}, 0.1), scqp::InvalidProblem);
    CHECK_THROWS_AS(scqp::estimate_moments(rp, {{-1, 2}}, 0.1), scqp::InvalidProblem);
    CHECK_THROWS_AS(scqp::estimate_moments(rp, {}, 0.1), scqp::InvalidProblem);
    CHECK_THROWS_AS(scqp::estimate_moments(rp, {{0, 2}}, -0.1), scqp::InvalidProblem);
  }

  SUBCASE("each window gets its own moments") {
    scqp::ReturnPanel four;
    four.returns.resize(4, 1);
    four.returns << 0.01, 0.03, -0.02, 0.02;
    const scqp::MarketModel two = scqp::estimate_moments(four, {{0, 4}, {2, 4}}, 0.0);
    REQUIRE(two.mus.size() == 2);
    REQUIRE(two.sigmas.size() == 2);
    CHECK(two.mus[0](0) == doctest::Approx(0.01));
    CHECK(two.sigmas[0](0, 0) == doctest::Approx(0.0014 / 3.0));
    CHECK(two.mus[1](0) == doctest::Approx(0.0).scale(1.0));
    CHECK(two.sigmas[1](0, 0) == doctest::Approx(8e-4));
  }
}

TEST_CASE("estimates recover the distribution that generated the data") {
  const int rows = 100000;
  VectorXd mu_true(3);
  mu_true << 0.001, 0.002, -0.0005;
  MatrixXd sig_true(3, 3);
  sig_true << 4e-4, 1e-4, 0.5e-4,
              1e-4, 3e-4, 0.8e-4,
              0.5e-4, 0.8e-4, 2e-4;
  const Eigen::LLT<MatrixXd> llt(sig_true);
  REQUIRE(llt.info() == Eigen::Success);
  const MatrixXd chol = llt.matrixL();

  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  scqp::ReturnPanel rp;
  rp.returns.resize(rows, 3);
  VectorXd z(3);
  for (int t = 0; t < rows; ++t) {
    for (int i = 0; i < 3; ++i) z(i) = gauss(rng);
    rp.returns.row(t) = (mu_true + chol * z).transpose();
  }

  const scqp::MarketModel est = scqp::estimate_moments(rp, {{0, rows}}, 0.0);
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(sig_true(i, i) / rows);
    CHECK(std::abs(est.mus[0](i) - mu_true(i)) <= 3.0 * se);
  }
  CHECK((est.sigmas[0] - sig_true).norm() / sig_true.norm() <= 0.05);
}

TEST_CASE("shrinkage turns rank deficient windows into usable markets") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 0.01);
  scqp::ReturnPanel thin;
  thin.returns.resize(3, 5);  // at most rank 2, far short of 5 assets
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < 5; ++j) thin.returns(t, j) = gauss(rng);

  CHECK_THROWS_AS(scqp::estimate_moments(thin, {{0, 3}}, 0.0), scqp::NotPositiveDefinite);

  const scqp::MarketModel shrunk = scqp::estimate_moments(thin, {{0, 3}}, 1e-4);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(shrunk.sigmas[0]);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("prices flow through returns and estimation into the solver") {
  const std::string path = write_temp_csv(
      "scqp_flow.csv",
      "date,AAA,BBB\n"
      "2024-01-02,100.0,200.0\n"
      "2024-01-03,101.0,199.0\n"
      "2024-01-04,100.5,201.5\n"
      "2024-01-05,102.0,202.0\n"
      "2024-01-08,101.5,204.0\n"
      "2024-01-09,103.0,203.0\n");
  const scqp::PricePanel panel = scqp::load_prices_csv(path);
  const scqp::ReturnPanel returns = scqp::to_returns(panel);
  REQUIRE(returns.returns.rows() == 5);

  const scqp::MarketModel mkt = scqp::estimate_moments(returns, {{0, 5}, {3, 5}});
  REQUIRE(mkt.mus.size() == 2);

  scqp::MvpSpec spec;
  spec.objective = scqp::ObjectiveModel::markowitz(1.0);
  const scqp::SolveResult res = scqp::solve(spec, mkt);
  CHECK(res.status == scqp::SolveStatus::Converged);
  CHECK(res.w.sum() == doctest::Approx(1.0));
  CHECK(res.w.minCoeff() >= 0.0);
}
