#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "scqp/objectives.hpp"

namespace scqp {

// A loaded price history: one row per trading day, one column per ticker.
// Prices are strictly positive, dates strictly increasing, no gaps.
struct PricePanel {
  std::vector<std::string> dates;  // opaque labels, compared lexicographically
  Eigen::MatrixXd prices;          // T x N
  std::vector<std::string> tickers;
};

// Simple per-period returns r_t = p_t / p_{t-1} - 1, one row fewer than the
// prices that produced them. Positive prices keep every entry above -1.
struct ReturnPanel {
  Eigen::MatrixXd returns;  // (T-1) x N
};

// Half-open slice [begin, end) of return rows used for one moment estimate.
struct RowRange {
  int begin = 0;
  int end = 0;
};

// Synthetic market: n_mu mean vectors with entries uniform in
// [-0.001, 0.003] and n_sigma covariances G G' / N + 1e-4 I from standard
// normal G, drawn from a self-contained generator so a seed reproduces the
// exact same model on every run.
MarketModel generate_market(int n_assets, int n_mu, int n_sigma, std::uint64_t seed);

// Synthetic daily return history: Gaussian rows with per-asset drift
// uniform in [0.0002, 0.001] and the correlation structure of a seeded
// synthetic covariance rescaled to 2% typical volatility. Deterministic in
// (n_assets, rows, seed); the draw stream is independent of
// generate_market's for the same seed.
ReturnPanel sample_return_history(int n_assets, int rows, std::uint64_t seed);

// Reads "date,TICKER1,TICKER2,..." CSV. Throws ParseError with the 1-based
// file row and column for malformed cells or ragged rows, NonPositivePrice
// for prices <= 0, NonMonotoneDates when date labels fail to increase.
PricePanel load_prices_csv(const std::string& path);

// Throws TooFewRows when fewer than two price rows are available.
ReturnPanel to_returns(const PricePanel& panel);

// Per window: mu = column means, Sigma = (n-1)-denominator sample
// covariance plus shrink * (trace/N) on the diagonal. Windows shorter than
// two rows throw WindowTooShort; a rank-deficient unshrunk covariance
// throws NotPositiveDefinite.
MarketModel estimate_moments(const ReturnPanel& returns,
                             const std::vector<RowRange>& windows,
                             double shrink = 1e-4);

}  // namespace scqp
