#include "scqp/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scqp/errors.hpp"
#include "scqp/working_set.hpp"

namespace scqp {

namespace {

// One iteration's QP in market terms: cost -sum_i wx_i mu_i, Hessian
// sum_j 2 wy_j Sigma_j, plus an optional coef * mu_1 mu_1' rank-one term.
struct QuadSub {
  Eigen::VectorXd x_weights;
  Eigen::VectorXd y_weights;
  double rank1_coef = 0.0;
};

using SubBuilder = std::function<QuadSub(const Moments&)>;

QuadSub blank_sub(const MarketModel& market) {
  QuadSub sub;
  sub.x_weights = Eigen::VectorXd::Zero(market.mean_count());
  sub.y_weights = Eigen::VectorXd::Zero(market.risk_count());
  return sub;
}

// Same trace-scaled regularization the double-loop solver applies: a sliver
// of the weighted Hessian trace, so conditioning is uniform across scales.
double ridge_for(const MarketModel& market, const QuadSub& sub, double scale) {
  double weighted = 0.0;
  for (int j = 0; j < sub.y_weights.size(); ++j) {
    if (sub.y_weights(j) > 0.0) weighted += 2.0 * sub.y_weights(j) * market.sigmas[j].trace();
  }
  if (sub.rank1_coef > 0.0) weighted += sub.rank1_coef * market.mus[0].squaredNorm();
  return scale * weighted / market.dim();
}

// Shared driver for the reference methods: full steps from equal weights,
// one warm-started QP per iteration, stop once the iterate stops moving.
BaselineResult run_fixed_point(const MarketModel& market, const ObjectiveModel& model,
                               const SubBuilder& build, const BaselineSettings& settings) {
  market.validate();
  model.validate();
  if (market.mean_count() < 1) {
    throw InvalidProblem("iterative baselines need at least one return moment");
  }
  if (settings.max_iterations < 1) {
    throw InvalidProblem("max_iterations must be at least 1");
  }
  if (!(settings.step_tol > 0.0)) {
    throw InvalidProblem("step_tol must be positive");
  }

  const int n = market.dim();
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::VectorXd no_eta_x = Eigen::VectorXd::Zero(market.mean_count());
  const Eigen::VectorXd no_eta_y = Eigen::VectorXd::Zero(market.risk_count());
  const WorkingSetSettings ws_settings;

  BaselineResult out;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);

  for (int k = 0; k < settings.max_iterations; ++k) {
    const Moments m = eval_moments(w, market);
    const double f = objective_value(model, m);  // domain errors surface here
    const QuadSub sub = build(m);

    SurrogateProblem qp(market, sub.x_weights, sub.y_weights,
                        ridge_for(market, sub, settings.ridge_scale));
    if (sub.rank1_coef != 0.0) qp.add_rank_one(market.mus[0], sub.rank1_coef);

    WorkingSet guess;
    if (settings.warm_start && k > 0) guess = warm_start_from(w, qp.lower(), qp.upper());
    const WorkingSetResult r = detail::solve_ws_impl(qp, guess, ws_settings);

    const double step = (r.solution.w - w).lpNorm<Eigen::Infinity>();

    TraceRecord rec;
    rec.k = k;
    rec.t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.f = f;
    rec.step = step;
    rec.gamma = 1.0;
    rec.residual = step;
    rec.lambda_x = sub.x_weights;
    rec.lambda_y = sub.y_weights;
    rec.eta_x = no_eta_x;
    rec.eta_y = no_eta_y;
    rec.inner_iterations = 0;
    rec.qp_iterations = r.solution.iterations;
    rec.reduced_solves = r.reduced_solves;
    out.trace.records.push_back(std::move(rec));

    w = r.solution.w;
    out.iterations = k + 1;
    if (step <= settings.step_tol) {
      out.status = SolveStatus::Converged;
      break;
    }
  }

  out.w_star = w;
  out.objective = objective_value(model, eval_moments(w, market));
  return out;
}

}  // namespace

BaselineResult solve_dinkelbach(const MarketModel& market, double risk_free,
                                const BaselineSettings& settings) {
  // Parametric iteration for max (x - r_f) / y: each subproblem prices the
  // iterate's own ratio as the variance penalty.
  const ObjectiveModel model = ObjectiveModel::generalized_sharpe(risk_free, 1.0);
  auto build = [&market, risk_free](const Moments& m) {
    QuadSub sub = blank_sub(market);
    sub.x_weights(0) = 1.0;
    sub.y_weights(0) = (m.x(0) - risk_free) / m.y(0);
    return sub;
  };
  return run_fixed_point(market, model, build, settings);
}

BaselineResult solve_quadratic_transform(const MarketModel& market, double risk_free,
                                         const BaselineSettings& settings) {
  // Sharpe ratio via the quadratic transform: with s = (x_k - r_f) / y_k the
  // step minimizes -2 s (x - r_f) + s^2 y, whose moving constant 2 s r_f is
  // dropped.
  const ObjectiveModel model = ObjectiveModel::sharpe_ratio(risk_free);
  auto build = [&market, risk_free](const Moments& m) {
    const double s = (m.x(0) - risk_free) / m.y(0);
    QuadSub sub = blank_sub(market);
    sub.x_weights(0) = 2.0 * s;
    sub.y_weights(0) = s * s;
    return sub;
  };
  return run_fixed_point(market, model, build, settings);
}

BaselineResult solve_mm_worstcase(const MarketModel& market, double alpha,
                                  const BaselineSettings& settings) {
  // sqrt(y) <= sqrt(y_k)/2 + y / (2 sqrt(y_k)) turns the robust objective
  // into a tangent quadratic that touches at the current iterate, so every
  // full step decreases -x + alpha sqrt(y).
  const ObjectiveModel model = ObjectiveModel::worst_case(alpha);
  auto build = [&market, alpha](const Moments& m) {
    QuadSub sub = blank_sub(market);
    sub.x_weights(0) = 1.0;
    sub.y_weights(0) = alpha / (2.0 * std::sqrt(m.y(0)));
    return sub;
  };
  return run_fixed_point(market, model, build, settings);
}

BaselineResult solve_mm_kelly(const MarketModel& market, const BaselineSettings& settings) {
  // Growth objective -log(1+x) + y / (2 (1+x)^2). The coupled term is split
  // with the auxiliary scale a_1 = sqrt(y_k) / (1+x_k)^2, the square root is
  // majorized by its tangent, and the convex -log(1+x) by an L-smooth
  // quadratic with L = 1 / (1 + min_i mu_i)^2, the curvature bound over the
  // whole simplex. Each step is then the QP below; a_1 cancels against the
  // tangent denominators so nothing degenerates as y -> 0.
  market.validate();
  if (market.mean_count() < 1) {
    throw InvalidProblem("iterative baselines need at least one return moment");
  }
  const double x_lb = market.mus[0].minCoeff();
  if (!(1.0 + x_lb > 0.0)) {
    throw DomainViolation("growth objective needs 1 + w'mu > 0, but an asset mean reaches -1");
  }
  const double curvature = 1.0 / ((1.0 + x_lb) * (1.0 + x_lb));

  const ObjectiveModel model = ObjectiveModel::kelly();
  auto build = [&market, curvature](const Moments& m) {
    const double opx = 1.0 + m.x(0);
    QuadSub sub = blank_sub(market);
    sub.x_weights(0) = 1.0 / opx + m.y(0) / (opx * opx * opx) + curvature * m.x(0);
    sub.y_weights(0) = 0.5 / (opx * opx);
    sub.rank1_coef = curvature;
    return sub;
  };
  return run_fixed_point(market, model, build, settings);
}

namespace {

constexpr double kGridFeasTol = 1e-12;

struct GridBest {
  Eigen::VectorXd w;
  double f = kInf;
  bool found = false;
};

// Seeds carried between refinement stages, ranked by objective plus a large
// feasibility penalty so near-boundary cells survive into the next stage.
struct GridSeed {
  double score;
  double w1, w2;
  bool operator<(const GridSeed& other) const { return score < other.score; }
};

class SeedPool {
 public:
  explicit SeedPool(size_t cap) : cap_(cap) {}

  void offer(double score, double w1, double w2) {
    heap_.push(GridSeed{score, w1, w2});
    if (heap_.size() > cap_) heap_.pop();  // drop the worst
  }

  std::vector<GridSeed> drain() {
    std::vector<GridSeed> out;
    out.reserve(heap_.size());
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    return out;
  }

 private:
  size_t cap_;
  std::priority_queue<GridSeed> heap_;  // max-heap: top() is the worst kept
};

}  // namespace

Eigen::VectorXd grid_oracle(const MvpSpec& spec, const MarketModel& market,
                            double resolution) {
  market.validate();
  spec.objective.validate();
  const int n = market.dim();
  if (n > 3) {
    throw TooLarge("exhaustive simplex search handles at most 3 assets, got " +
                   std::to_string(n));
  }
  if (!(resolution > 0.0) || resolution > 1e-3 * (1.0 + 1e-12)) {
    throw InvalidProblem("grid resolution must lie in (0, 1e-3]");
  }

  MvpSpec padded = spec;  // empty limit vectors mean "no constraints"
  if (padded.return_floors.size() == 0) {
    padded.return_floors = Eigen::VectorXd::Constant(market.mean_count(), -kInf);
  }
  if (padded.risk_caps.size() == 0) {
    padded.risk_caps = Eigen::VectorXd::Constant(market.risk_count(), kInf);
  }

  GridBest best;
  // Returns false when the objective is undefined at w; fills f and the
  // total constraint overshoot otherwise, and tracks the incumbent.
  auto assess = [&](const Eigen::VectorXd& w, double& f, double& viol) -> bool {
    const Moments m = eval_moments(w, market);
    const Eigen::VectorXd g = constraint_values(padded, m);
    viol = 0.0;
    for (int i = 0; i < g.size(); ++i) viol += std::max(g(i), 0.0);
    try {
      f = objective_value(spec.objective, m);
    } catch (const DomainViolation&) {
      return false;
    }
    if (viol <= kGridFeasTol && (!best.found || f < best.f)) {
      best.w = w;
      best.f = f;
      best.found = true;
    }
    return true;
  };

  if (n == 1) {
    double f, viol;
    assess(Eigen::VectorXd::Ones(1), f, viol);
  } else if (n == 2) {
    const long m_cells = std::lround(std::ceil(1.0 / resolution));
    Eigen::VectorXd w(2);
    for (long i = 0; i <= m_cells; ++i) {
      w(0) = static_cast<double>(i) / static_cast<double>(m_cells);
      w(1) = 1.0 - w(0);
      double f, viol;
      assess(w, f, viol);
    }
  } else {
    // Staged refinement: exhaustive sweep at 1e-3, then tenfold-finer
    // passes over windows around the 200 most promising cells.
    constexpr size_t kSeedCap = 200;
    constexpr double kViolPenalty = 1e6;
    double stage_res = 1e-3;
    long m_cells = std::lround(std::ceil(1.0 / stage_res));
    SeedPool pool(kSeedCap);
    Eigen::VectorXd w(3);

    for (long i = 0; i <= m_cells; ++i) {
      for (long j = 0; j <= m_cells - i; ++j) {
        w(0) = static_cast<double>(i) / static_cast<double>(m_cells);
        w(1) = static_cast<double>(j) / static_cast<double>(m_cells);
        w(2) = 1.0 - w(0) - w(1);
        double f, viol;
        if (assess(w, f, viol)) pool.offer(f + kViolPenalty * viol, w(0), w(1));
      }
    }

    while (stage_res > resolution * (1.0 + 1e-12)) {
      const double prev_res = stage_res;
      stage_res = std::max(stage_res / 10.0, resolution);
      m_cells = std::lround(std::ceil(1.0 / stage_res));
      const std::vector<GridSeed> seeds = pool.drain();
      pool = SeedPool(kSeedCap);
      std::unordered_set<std::int64_t> visited;

      for (const GridSeed& seed : seeds) {
        const double half = 2.0 * prev_res;  // window reaches 2 coarse cells out
        const long i_lo = std::max(0L, static_cast<long>(std::floor((seed.w1 - half) * m_cells)));
        const long i_hi = std::min(m_cells, static_cast<long>(std::ceil((seed.w1 + half) * m_cells)));
        const long j_lo = std::max(0L, static_cast<long>(std::floor((seed.w2 - half) * m_cells)));
        const long j_hi = std::min(m_cells, static_cast<long>(std::ceil((seed.w2 + half) * m_cells)));
        for (long i = i_lo; i <= i_hi; ++i) {
          for (long j = j_lo; j <= std::min(j_hi, m_cells - i); ++j) {
            if (!visited.insert(i * (m_cells + 1) + j).second) continue;
            w(0) = static_cast<double>(i) / static_cast<double>(m_cells);
            w(1) = static_cast<double>(j) / static_cast<double>(m_cells);
            w(2) = 1.0 - w(0) - w(1);
            double f, viol;
            if (assess(w, f, viol)) pool.offer(f + kViolPenalty * viol, w(0), w(1));
          }
        }
      }
    }
  }

  if (!best.found) {
    throw NoFeasiblePoint("no simplex lattice point satisfies the floors and caps");
  }
  return best.w;
}

}  // namespace scqp
