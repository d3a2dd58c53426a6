#include "scqp/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scqp/errors.hpp"

namespace scqp {

namespace {

// Self-contained sampler: 53-bit uniforms and Box-Muller normals on top of
// mt19937_64, so the draw stream is pinned by the standard rather than by
// whichever distribution implementation the toolchain ships.
struct Sampler {
  std::mt19937_64 rng;
  bool has_spare = false;
  double spare = 0.0;

  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  double unit() {  // strictly inside (0, 1), safe under log
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    const double radius = std::sqrt(-2.0 * std::log(unit()));
    const double angle = 2.0 * std::numbers::pi * unit();
    spare = radius * std::sin(angle);
    has_spare = true;
    return radius * std::cos(angle);
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  size_t start = 0;
  for (;;) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

MarketModel generate_market(int n_assets, int n_mu, int n_sigma, std::uint64_t seed) {
  if (n_assets < 1) throw InvalidProblem("a market needs at least one asset");
  if (n_mu < 0) throw InvalidProblem("the number of mean estimates cannot be negative");
  if (n_sigma < 1) throw InvalidProblem("a market needs at least one covariance estimate");

  Sampler draw(seed);
  MarketModel mkt;
  mkt.mus.reserve(n_mu);
  mkt.sigmas.reserve(n_sigma);

  for (int k = 0; k < n_mu; ++k) {
    Eigen::VectorXd mu(n_assets);
    for (int i = 0; i < n_assets; ++i) mu(i) = draw.uniform(-0.001, 0.003);
    mkt.mus.push_back(std::move(mu));
  }
  for (int k = 0; k < n_sigma; ++k) {
    Eigen::MatrixXd g(n_assets, n_assets);
    for (int i = 0; i < n_assets; ++i)
      for (int j = 0; j < n_assets; ++j) g(i, j) = draw.normal();
    Eigen::MatrixXd sig = g * g.transpose() / n_assets;
    sig = 0.5 * (sig + sig.transpose());  // exact symmetry despite blocked products
    sig.diagonal().array() += 1e-4;
    mkt.sigmas.push_back(std::move(sig));
  }
  mkt.validate();
  return mkt;
}

ReturnPanel sample_return_history(int n_assets, int rows, std::uint64_t seed) {
  if (n_assets < 1) throw InvalidProblem("a return history needs at least one asset");
  if (rows < 1) throw InvalidProblem("a return history needs at least one row");

  // Borrow the correlation structure of a seeded synthetic covariance and
  // rescale it to a 2% typical daily volatility so drifts of a few basis
  // points are visible against the noise over realistic window lengths.
  const MarketModel base = generate_market(n_assets, 0, 1, seed);
  Eigen::MatrixXd sigma = base.sigmas[0] * (4e-4 * n_assets / base.sigmas[0].trace());
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();

  Sampler draw(seed ^ 0x5851f42d4c957f2dULL);  // stream disjoint from generate_market's
  Eigen::VectorXd drift(n_assets);
  for (int i = 0; i < n_assets; ++i) drift(i) = draw.uniform(0.0002, 0.001);

  ReturnPanel panel;
  panel.returns.resize(rows, n_assets);
  Eigen::VectorXd z(n_assets);
  for (int t = 0; t < rows; ++t) {
    for (int i = 0; i < n_assets; ++i) z(i) = draw.normal();
    panel.returns.row(t) = (drift + chol * z).transpose();
  }
  return panel;
}

PricePanel load_prices_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidProblem("cannot open price file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  PricePanel panel;
  {
    const std::vector<std::string> head = split_csv_line(line);
    if (head.size() < 2) {
      throw ParseError("header needs a date column and at least one ticker", 1,
                       static_cast<int>(head.size()) + 1);
    }
    panel.tickers.assign(head.begin() + 1, head.end());
  }
  const int n = static_cast<int>(panel.tickers.size());

  std::vector<double> cells;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != n + 1) {
      throw ParseError("row has " + std::to_string(fields.size()) + " cells, expected " +
                           std::to_string(n + 1),
                       row, std::min<int>(static_cast<int>(fields.size()), n + 1) + 1);
    }
    if (!panel.dates.empty() && panel.dates.back() >= fields[0]) {
      throw NonMonotoneDates("date labels must strictly increase: '" + panel.dates.back() +
                             "' is not before '" + fields[0] + "' (row " + std::to_string(row) +
                             ")");
    }
    panel.dates.push_back(fields[0]);
    for (int j = 0; j < n; ++j) {
      const std::string& cell = fields[j + 1];
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      const auto parsed = std::from_chars(first, last, value);
      if (parsed.ec != std::errc{} || parsed.ptr != last || !std::isfinite(value)) {
        throw ParseError("cell '" + cell + "' is not a finite number", row, j + 2);
      }
      if (!(value > 0.0)) {
        throw NonPositivePrice("price " + cell + " for " + panel.tickers[j] + " at row " +
                               std::to_string(row) + " is not positive");
      }
      cells.push_back(value);
    }
  }

  const int t = static_cast<int>(panel.dates.size());
  panel.prices.resize(t, n);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < n; ++j) panel.prices(i, j) = cells[static_cast<size_t>(i) * n + j];
  return panel;
}

ReturnPanel to_returns(const PricePanel& panel) {
  const Eigen::Index t = panel.prices.rows();
  if (t < 2) {
    throw TooFewRows("need at least two price rows to form returns, got " + std::to_string(t));
  }
  ReturnPanel out;
  out.returns = (panel.prices.bottomRows(t - 1).array() /
                 panel.prices.topRows(t - 1).array()) -
                1.0;
  return out;
}

MarketModel estimate_moments(const ReturnPanel& returns,
                             const std::vector<RowRange>& windows, double shrink) {
  const Eigen::Index t = returns.returns.rows();
  const Eigen::Index n = returns.returns.cols();
  if (n < 1) throw InvalidProblem("return panel has no assets");
  if (windows.empty()) throw InvalidProblem("at least one estimation window is required");
  if (!(shrink >= 0.0)) throw InvalidProblem("shrink must be nonnegative");

  MarketModel mkt;
  for (const RowRange& win : windows) {
    if (win.begin < 0 || win.end > t) {
      throw InvalidProblem("estimation window [" + std::to_string(win.begin) + ", " +
                           std::to_string(win.end) + ") falls outside the " +
                           std::to_string(t) + " return rows");
    }
    const int rows = win.end - win.begin;
    if (rows < 2) {
      throw WindowTooShort("estimation windows need at least 2 rows, got " +
                           std::to_string(rows));
    }

    const Eigen::MatrixXd block = returns.returns.middleRows(win.begin, rows);
    const Eigen::VectorXd mu = block.colwise().mean();
    const Eigen::MatrixXd centered = block.rowwise() - mu.transpose();
    Eigen::MatrixXd sigma = centered.transpose() * centered / static_cast<double>(rows - 1);
    sigma = 0.5 * (sigma + sigma.transpose());
    if (shrink > 0.0) sigma.diagonal().array() += shrink * sigma.trace() / static_cast<double>(n);

    // A rank-deficient window slips through a plain Cholesky when the zero
    // pivot lands last, so gate on the LDLT pivots instead.
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const double worst = pivots.minCoeff();
    const double scale = std::max(pivots.maxCoeff(), 0.0);
    if (ldlt.info() != Eigen::Success || !(worst > 1e-12 * scale)) {
      throw NotPositiveDefinite(
          "estimated covariance is rank deficient; lengthen the window or raise shrink");
    }

    mkt.mus.push_back(mu);
    mkt.sigmas.push_back(std::move(sigma));
  }
  mkt.validate();
  return mkt;
}

}  // namespace scqp
