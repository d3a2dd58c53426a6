#include "scqp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "scqp/working_set.hpp"

namespace scqp {

namespace {

// Moments via the support of w: simplex QP solutions carry exact zeros on
// their pinned coordinates, so this is O(q s^2) for support size s instead
// of O(q N^2).
Moments moments_at(const Eigen::VectorXd& w, const MarketModel& market) {
  std::vector<int> sup;
  sup.reserve(64);
  for (int i = 0; i < w.size(); ++i) {
    if (w(i) != 0.0) sup.push_back(i);
  }
  Moments m;
  m.x.resize(market.mean_count());
  m.y.resize(market.risk_count());
  for (int i = 0; i < market.mean_count(); ++i) {
    const Eigen::VectorXd& mu = market.mus[i];
    double acc = 0.0;
    for (int k : sup) acc += mu(k) * w(k);
    m.x(i) = acc;
  }
  for (int j = 0; j < market.risk_count(); ++j) {
    const Eigen::MatrixXd& sig = market.sigmas[j];
    double acc = 0.0;
    for (int r : sup) {
      double dot = 0.0;
      for (int c : sup) dot += sig(r, c) * w(c);
      acc += w(r) * dot;
    }
    m.y(j) = acc;
  }
  return m;
}

// Ridge sized off the weighted Hessian trace; when nothing weights the risk
// terms the surrogate is an LP in disguise and gets the larger fallback so
// the factorization stays far from cancellation.
double ridge_for(const MarketModel& market, const Eigen::VectorXd& y_weights,
                 const ScqpSettings& settings) {
  const int n = market.dim();
  double weighted = 0.0;
  bool any = false;
  for (int j = 0; j < y_weights.size(); ++j) {
    if (y_weights(j) > 0.0) {
      weighted += 2.0 * y_weights(j) * market.sigmas[j].trace();
      any = true;
    }
  }
  if (any) return settings.ridge_scale * weighted / n;
  double avg = 0.0;
  for (const auto& sig : market.sigmas) avg += sig.trace();
  avg /= static_cast<double>(market.risk_count());
  return settings.lp_ridge_scale * avg / n;
}

int resolve_top_k(const ScqpSettings& settings, int n, const ObjectiveModel& model) {
  int k = settings.first_qp_top_k;
  if (k < 0) {
    k = (n >= 32 && model.uses_x())
            ? static_cast<int>(std::sqrt(static_cast<double>(n))) + 10
            : 0;
  }
  return std::min(k, n);
}

struct SurrogateSolve {
  Eigen::VectorXd w;
  double objective = 0.0;
  int qp_iterations = 0;
  int reduced_solves = 0;
};

SurrogateSolve run_surrogate(const MarketModel& market, const Eigen::VectorXd& wx,
                             const Eigen::VectorXd& wy, double ridge, SurrogateCache* cache,
                             bool warm) {
  SurrogateProblem sp(market, wx, wy, ridge);
  WorkingSet ws0;
  if (cache) {
    if (cache->has && warm) {
      ws0 = warm_start_from(cache->w, sp.lower(), sp.upper(), 1e-9);
    } else if (!cache->has && cache->pending_top_k > 0 && cache->pending_top_k < sp.dim()) {
      // Cold start on a large problem: free only the cheapest assets by
      // surrogate cost, pin the rest at zero. Wrong pins are evicted by
      // the multiplier test, so this is a speedup, not an approximation.
      const int n = sp.dim();
      const int k = cache->pending_top_k;
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::nth_element(order.begin(), order.begin() + k, order.end(),
                       [&](int a, int b) { return sp.cost()(a) < sp.cost()(b); });
      ws0.lower.assign(order.begin() + k, order.end());
      std::sort(ws0.lower.begin(), ws0.lower.end());
    }
  }
  WorkingSetSettings wss;
  WorkingSetResult r = detail::solve_ws_impl(sp, ws0, wss);
  if (cache) {
    cache->w = r.solution.w;
    cache->has = true;
  }
  SurrogateSolve out;
  out.w = std::move(r.solution.w);
  out.objective = r.solution.objective;
  out.qp_iterations = r.solution.iterations;
  out.reduced_solves = r.reduced_solves;
  return out;
}

Eigen::VectorXd init_eta(const Eigen::VectorXd& user, const std::vector<int>& mask, int len,
                         const char* what) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(len);
  if (user.size() == 0) {
    for (int i : mask) eta(i) = 1.0;
  } else if (user.size() == len) {
    for (int i : mask) eta(i) = std::max(user(i), 0.0);
  } else {
    throw DimensionMismatch(std::string("initial dual vector for ") + what +
                            " has the wrong length");
  }
  return eta;
}

struct InnerEval {
  Eigen::VectorXd w;
  Eigen::VectorXd gx, gy;  // constraint residuals, zero on unconstrained entries
  double h = 0.0;          // dual value
  double feas = 0.0;       // max positive residual
  int qp_iterations = 0;
  int reduced_solves = 0;
};

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> lambda_update(const ObjectiveModel& model,
                                                          const Moments& m) {
  auto [gx, gy] = objective_gradients(model, m);
  return {Eigen::VectorXd(-gx), std::move(gy)};
}

QpProblem build_surrogate(const MarketModel& market, const Weights& weights, double ridge) {
  market.validate();
  const int n = market.dim();
  const int p = market.mean_count();
  const int q = market.risk_count();
  auto fill = [](const Eigen::VectorXd& v, int len, const char* what) {
    if (v.size() == 0) return Eigen::VectorXd(Eigen::VectorXd::Zero(len));
    if (v.size() != len) {
      throw DimensionMismatch(std::string(what) + " weight length mismatch");
    }
    if (v.minCoeff() < 0.0) {
      throw InvalidProblem(std::string(what) + " weights must be nonnegative");
    }
    return v;
  };
  Eigen::VectorXd wx = fill(weights.lambda_x, p, "return") + fill(weights.eta_x, p, "return");
  Eigen::VectorXd wy = fill(weights.lambda_y, q, "risk") + fill(weights.eta_y, q, "risk");
  if (wy.maxCoeff() <= 0.0 && ridge == 0.0) {
    throw NotStrictlyConvex("no risk term carries weight and no ridge was supplied");
  }
  SurrogateProblem sp(market, wx, wy, ridge);
  QpProblem out;
  out.c = sp.cost();
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  out.H = sp.hessian_block(all, all);
  out.A = sp.eq_matrix();
  out.b = sp.eq_rhs();
  out.l = sp.lower();
  out.u = sp.upper();
  return out;
}

double gamma_schedule(int k, const ScqpSettings& settings) {
  if (settings.step_rule == StepRule::Diminishing) return 2.0 / (k + 2.0);
  return 1.0;
}

InnerResult inner_dual_ascent(const MarketModel& market, const MvpSpec& spec,
                              const Eigen::VectorXd& lambda_x,
                              const Eigen::VectorXd& lambda_y,
                              const Eigen::VectorXd& eta0_x, const Eigen::VectorXd& eta0_y,
                              const ScqpSettings& settings, SurrogateCache* cache) {
  const int p = market.mean_count();
  const int q = market.risk_count();
  if (lambda_x.size() != p || lambda_y.size() != q) {
    throw DimensionMismatch("objective weights do not match the market's moment counts");
  }
  Eigen::VectorXd floors = spec.return_floors.size() == 0
                               ? Eigen::VectorXd::Constant(p, -kInf)
                               : spec.return_floors;
  Eigen::VectorXd caps =
      spec.risk_caps.size() == 0 ? Eigen::VectorXd::Constant(q, kInf) : spec.risk_caps;
  if (floors.size() != p || caps.size() != q) {
    throw DimensionMismatch("floors/caps do not match the market's moment counts");
  }
  std::vector<int> mask_x, mask_y;
  for (int i = 0; i < p; ++i) {
    if (std::isfinite(floors(i))) mask_x.push_back(i);
  }
  for (int j = 0; j < q; ++j) {
    if (std::isfinite(caps(j))) mask_y.push_back(j);
  }

  InnerResult out;
  out.eta_x = Eigen::VectorXd::Zero(p);
  out.eta_y = Eigen::VectorXd::Zero(q);

  if (mask_x.empty() && mask_y.empty()) {
    const double ridge = ridge_for(market, lambda_y, settings);
    SurrogateSolve ss =
        run_surrogate(market, lambda_x, lambda_y, ridge, cache, settings.warm_start);
    out.w_hat = std::move(ss.w);
    out.dual_value = ss.objective;
    out.qp_iterations = ss.qp_iterations;
    out.reduced_solves = ss.reduced_solves;
    return out;
  }

  Eigen::VectorXd eta_x = init_eta(eta0_x, mask_x, p, "the return floors");
  Eigen::VectorXd eta_y = init_eta(eta0_y, mask_y, q, "the risk caps");
  const double ridge = ridge_for(market, lambda_y + eta_y, settings);

  auto evaluate = [&](const Eigen::VectorXd& ex, const Eigen::VectorXd& ey) {
    InnerEval e;
    SurrogateSolve ss =
        run_surrogate(market, lambda_x + ex, lambda_y + ey, ridge, cache, settings.warm_start);
    Moments m = moments_at(ss.w, market);
    e.w = std::move(ss.w);
    e.gx = Eigen::VectorXd::Zero(p);
    e.gy = Eigen::VectorXd::Zero(q);
    e.h = ss.objective;
    e.feas = 0.0;
    for (int i : mask_x) {
      e.gx(i) = floors(i) - m.x(i);
      e.h += ex(i) * floors(i);
      e.feas = std::max(e.feas, e.gx(i));
    }
    for (int j : mask_y) {
      e.gy(j) = m.y(j) - caps(j);
      e.h -= ey(j) * caps(j);
      e.feas = std::max(e.feas, e.gy(j));
    }
    e.qp_iterations = ss.qp_iterations;
    e.reduced_solves = ss.reduced_solves;
    return e;
  };

  auto comp_slack = [&](const Eigen::VectorXd& ex, const Eigen::VectorXd& ey,
                        const InnerEval& e) {
    double comp = 0.0;
    for (int i : mask_x) comp = std::max(comp, ex(i) * std::max(e.gx(i), 0.0));
    for (int j : mask_y) comp = std::max(comp, ey(j) * std::max(e.gy(j), 0.0));
    return comp;
  };

  InnerEval cur = evaluate(eta_x, eta_y);
  out.qp_iterations += cur.qp_iterations;
  out.reduced_solves += cur.reduced_solves;
  double alpha_seed = settings.armijo.alpha_init;

  for (int iter = 1;; ++iter) {
    if (iter > settings.max_inner) {
      throw MaxInnerIterations("dual ascent on the floors/caps exceeded its iteration budget");
    }
    double alpha = alpha_seed;
    bool accepted = false;
    bool measured = false;
    bool fixed_point = false;
    Eigen::VectorXd tx, ty;
    InnerEval trial;
    double accepted_alpha = alpha_seed;
    int accepted_bt = 0;
    // Gains smaller than the rounding noise of h cannot be verified, and
    // near the optimum all gains are that small; such steps are accepted
    // on faith so the ascent can polish the violation below tolerance.
    const double noise = 1e-12 * (1.0 + std::abs(cur.h));
    for (int bt = 0; bt <= settings.armijo.max_backtracks;
         ++bt, alpha *= settings.armijo.backtrack) {
      tx = eta_x;
      ty = eta_y;
      for (int i : mask_x) tx(i) = std::max(eta_x(i) + alpha * cur.gx(i), 0.0);
      for (int j : mask_y) ty(j) = std::max(eta_y(j) + alpha * cur.gy(j), 0.0);
      double move = 0.0;
      for (int i : mask_x) move = std::max(move, std::abs(tx(i) - eta_x(i)));
      for (int j : mask_y) move = std::max(move, std::abs(ty(j) - eta_y(j)));
      if (move == 0.0) {
        // The largest step does not move eta at all: projected fixed point.
        if (bt == 0) fixed_point = true;
        break;
      }
      trial = evaluate(tx, ty);
      out.qp_iterations += trial.qp_iterations;
      out.reduced_solves += trial.reduced_solves;
      double lin = 0.0;
      for (int i : mask_x) lin += cur.gx(i) * (tx(i) - eta_x(i));
      for (int j : mask_y) lin += cur.gy(j) * (ty(j) - eta_y(j));
      const double gain = trial.h - cur.h;
      if (gain >= settings.armijo.sigma * lin - noise) {
        accepted = true;
        measured = gain >= settings.armijo.sigma * lin + noise;
        accepted_alpha = alpha;
        accepted_bt = bt;
        break;
      }
    }
    out.iterations = iter;
    if (fixed_point) break;
    if (!accepted) {
      const double comp = comp_slack(eta_x, eta_y, cur);
      if (cur.feas <= settings.inner_feas_tol && comp <= settings.inner_comp_tol) break;
      throw MaxInnerIterations("dual line search stalled with constraints still violated");
    }
    double step = 0.0;
    for (int i : mask_x) step = std::max(step, std::abs(tx(i) - eta_x(i)));
    for (int j : mask_y) step = std::max(step, std::abs(ty(j) - eta_y(j)));
    eta_x = tx;
    eta_y = ty;
    cur = std::move(trial);
    // The seed tracks the accepted step so it adapts to the local dual
    // curvature; it doubles only on a measurably clean full step, which
    // lets divergent duals (infeasible specs) reach the cap in a
    // logarithmic number of steps without destabilizing the polish phase.
    alpha_seed = (accepted_bt == 0 && measured) ? std::min(accepted_alpha * 2.0, 1e12)
                                                : accepted_alpha;
    double eta_max = 0.0;
    for (int i : mask_x) eta_max = std::max(eta_max, eta_x(i));
    for (int j : mask_y) eta_max = std::max(eta_max, eta_y(j));
    if (eta_max > settings.eta_cap && cur.feas > settings.inner_feas_tol) {
      throw InfeasibleSpec("constraint duals escaped past the cap; floors/caps unattainable");
    }
    const double comp = comp_slack(eta_x, eta_y, cur);
    if (step <= settings.inner_eta_tol && cur.feas <= settings.inner_feas_tol &&
        comp <= settings.inner_comp_tol) {
      break;
    }
  }

  out.w_hat = cur.w;
  out.eta_x = eta_x;
  out.eta_y = eta_y;
  out.dual_value = cur.h;
  out.max_violation = cur.feas;
  return out;
}

SolveResult solve(const MvpSpec& spec_in, const MarketModel& market, const Eigen::VectorXd& w0,
                  const ScqpSettings& settings) {
  market.validate();
  MvpSpec spec = spec_in;
  spec.objective.validate();
  const int n = market.dim();
  const int p = market.mean_count();
  const int q = market.risk_count();
  if (spec.return_floors.size() == 0) spec.return_floors = Eigen::VectorXd::Constant(p, -kInf);
  if (spec.risk_caps.size() == 0) spec.risk_caps = Eigen::VectorXd::Constant(q, kInf);
  if (spec.return_floors.size() != p || spec.risk_caps.size() != q) {
    throw DimensionMismatch("floors/caps do not match the market's moment counts");
  }

  Eigen::VectorXd w;
  if (w0.size() == 0) {
    w = Eigen::VectorXd::Constant(n, 1.0 / n);
  } else {
    if (w0.size() != n) throw DimensionMismatch("start point does not match asset count");
    w = w0.cwiseMax(0.0);
    const double s = w.sum();
    w = s > 0.0 ? Eigen::VectorXd(w / s) : Eigen::VectorXd::Constant(n, 1.0 / n);
  }

  bool constrained = false;
  for (int i = 0; i < p; ++i) constrained = constrained || std::isfinite(spec.return_floors(i));
  for (int j = 0; j < q; ++j) constrained = constrained || std::isfinite(spec.risk_caps(j));

  Eigen::VectorXd eta_x = settings.eta0_x;  // empty means default-ones inside the inner loop
  Eigen::VectorXd eta_y = settings.eta0_y;
  SurrogateCache cache;
  cache.pending_top_k = resolve_top_k(settings, n, spec.objective);
  if (w0.size() != 0 && settings.warm_start) {
    // A caller-supplied start point seeds the first working set the same
    // way later iterates do, so consecutive solves along a frontier reuse
    // the previous support.
    cache.w = w;
    cache.has = true;
  }

  SolveResult out;
  out.weights.eta_x = Eigen::VectorXd::Zero(p);
  out.weights.eta_y = Eigen::VectorXd::Zero(q);
  const auto t0 = std::chrono::steady_clock::now();
  bool converged = false;
  Eigen::VectorXd lx, ly;

  for (int k = 0; k < settings.max_outer; ++k) {
    Moments m = moments_at(w, market);
    const double fk = objective_value(spec.objective, m);
    std::tie(lx, ly) = lambda_update(spec.objective, m);

    InnerResult ir;
    if (constrained) {
      ir = inner_dual_ascent(market, spec, lx, ly, eta_x, eta_y, settings, &cache);
      eta_x = ir.eta_x;  // carry the duals into the next outer iteration
      eta_y = ir.eta_y;
    } else {
      const double ridge = ridge_for(market, ly, settings);
      SurrogateSolve ss = run_surrogate(market, lx, ly, ridge, &cache, settings.warm_start);
      ir.w_hat = std::move(ss.w);
      ir.eta_x = Eigen::VectorXd::Zero(p);
      ir.eta_y = Eigen::VectorXd::Zero(q);
      ir.dual_value = ss.objective;
      ir.qp_iterations = ss.qp_iterations;
      ir.reduced_solves = ss.reduced_solves;
    }

    const double gamma = gamma_schedule(k, settings);
    Eigen::VectorXd w_next = w + gamma * (ir.w_hat - w);
    const double residual = (ir.w_hat - w).cwiseAbs().maxCoeff();
    const double step = (w_next - w).cwiseAbs().maxCoeff();

    TraceRecord rec;
    rec.k = k;
    rec.t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.f = fk;
    rec.step = step;
    rec.gamma = gamma;
    rec.residual = residual;
    rec.lambda_x = lx;
    rec.lambda_y = ly;
    rec.eta_x = constrained ? eta_x : ir.eta_x;
    rec.eta_y = constrained ? eta_y : ir.eta_y;
    rec.inner_iterations = ir.iterations;
    rec.qp_iterations = ir.qp_iterations;
    rec.reduced_solves = ir.reduced_solves;
    out.trace.records.push_back(std::move(rec));
    out.outer_iterations = k + 1;
    out.residual = residual;

    if (residual <= settings.outer_tol || step <= settings.step_tol) {
      // w itself is the certified iterate: the residual was measured here,
      // and the stored lambda corresponds to it exactly.
      converged = true;
      break;
    }
    w = std::move(w_next);
  }

  out.w = std::move(w);
  out.status = converged ? SolveStatus::Converged : SolveStatus::MaxIterations;
  out.weights.lambda_x = lx;
  out.weights.lambda_y = ly;
  if (constrained) {
    out.weights.eta_x = eta_x;
    out.weights.eta_y = eta_y;
  }
  out.objective = objective_value(spec.objective, moments_at(out.w, market));
  return out;
}

double stationarity_residual(const Eigen::VectorXd& w, const MvpSpec& spec_in,
                             const MarketModel& market, const ScqpSettings& settings) {
  market.validate();
  MvpSpec spec = spec_in;
  spec.objective.validate();
  const int n = market.dim();
  const int p = market.mean_count();
  const int q = market.risk_count();
  if (w.size() != n) throw DimensionMismatch("weight vector does not match asset count");
  if (std::abs(w.sum() - 1.0) > 1e-6 || w.minCoeff() < -1e-9) {
    throw InvalidProblem("weights must lie on the budget simplex");
  }
  if (spec.return_floors.size() == 0) spec.return_floors = Eigen::VectorXd::Constant(p, -kInf);
  if (spec.risk_caps.size() == 0) spec.risk_caps = Eigen::VectorXd::Constant(q, kInf);

  Moments m = moments_at(w, market);
  auto [lx, ly] = lambda_update(spec.objective, m);
  SurrogateCache cache;
  cache.pending_top_k = resolve_top_k(settings, n, spec.objective);
  InnerResult ir = inner_dual_ascent(market, spec, lx, ly, settings.eta0_x, settings.eta0_y,
                                     settings, &cache);
  return (ir.w_hat - w).cwiseAbs().maxCoeff();
}

}  // namespace scqp
