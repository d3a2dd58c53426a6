#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scqp/baselines.hpp"
#include "scqp/market_data.hpp"
#include "scqp/objectives.hpp"
#include "scqp/solver.hpp"

namespace scqp {

// A (market, problem) pair the benchmark solves. The stock applications are
//   1  robust growth:   -x + sqrt(y), no constraints
//   2  log growth:      -log(1+x) + y/(2(1+x)^2), no constraints
//   3  budgeted return: -x subject to y <= risk of the equal-weight mix
//   4  ratio with fresh-window limits: Sharpe on full-history estimates,
//      return floor 1.2e and risk cap 0.8r taken from the equal-weight
//      portfolio on the latest short window (2N rows out of 5N)
struct BenchInstance {
  MarketModel market;
  MvpSpec spec;
};

BenchInstance make_application(int application, int n_assets, std::uint64_t seed);

// Everything one benchmark run needs. `methods` entries come from
// kBenchMethods below; the fixed-point contenders only apply where their
// objective matches (qt: sharpe_ratio, dinkelbach: generalized_sharpe with
// unit exponent, mm-*: their namesakes) and none of them accepts floors or
// caps, so mismatched cells are recorded as failures rather than solved
// against the wrong problem.
struct BenchConfig {
  int application = 1;  // 1..4 stock applications, 0 = use `custom`
  MvpSpec custom;
  std::vector<int> sizes;  // asset counts, each >= 2
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods = {"scqp"};
  ScqpSettings termination;  // shared stopping rules; baselines inherit
                             // step_tol / max_outer / ridge / warm_start
  double oracle_resolution = 1e-5;
  std::string output_path;  // nonempty: the JSON report is written here

  // Throws InvalidProblem on out-of-range fields, unknown method names,
  // duplicate methods, or grid-oracle paired with sizes above 3.
  void validate() const;
};

inline const std::vector<std::string> kBenchMethods = {
    "scqp", "dinkelbach", "qt", "mm-worstcase", "mm-kelly", "grid-oracle"};

struct BenchCell {
  std::string method;
  int size = 0;
  std::uint64_t seed = 0;
  double objective = 0.0;
  double gap = 0.0;  // objective minus the instance minimum across methods
  double seconds = 0.0;
  int iterations = 0;
  bool failed = false;
  std::string error;
  SolveTrace trace;  // empty for the grid oracle
};

struct BenchReport {
  BenchConfig config;
  std::vector<BenchCell> cells;
  // Fitted growth exponents per method, present only where at least three
  // distinct sizes produced successful timings.
  std::map<std::string, double> fits;
};

// Solves every (method, size, seed) cell sequentially on one thread so the
// wall-clock columns stay comparable, computes per-instance gaps against
// the minimum across the methods that succeeded, and fits the time-vs-size
// exponent per method. Individual solve failures are recorded in their
// cell; only configuration errors throw.
BenchReport run_benchmark(const BenchConfig& config);

struct FrontierPoint {
  double parameter = 0.0;
  Eigen::VectorXd w;
  double ret = 0.0;        // x(w*)
  double risk = 0.0;       // y(w*)
  int nonzeros = 0;        // entries with |w_i| > 1e-7
  int outer_iterations = 0;
  int qp_solves = 0;       // surrogate QPs across the solve
  int reduced_solves = 0;  // working-set passes across those QPs
  bool failed = false;
  std::string error;
};

// Sweeps a one-parameter objective family over a monotone grid. With
// `warm` set, each solve starts from the previous optimum so the working
// set carries over. Per-point failures are recorded, not thrown.
std::vector<FrontierPoint> trace_frontier(const MarketModel& market,
                                          const std::function<ObjectiveModel(double)>& family,
                                          const std::vector<double>& grid, bool warm,
                                          const ScqpSettings& settings = {});

// Least-squares slope of log(time) against log(size): the c in O(N^c).
// Throws DegenerateInput with fewer than three distinct sizes and
// InvalidProblem on nonpositive entries or mismatched lengths.
double fit_complexity_order(const std::vector<double>& sizes, const std::vector<double>& times);

}  // namespace scqp
