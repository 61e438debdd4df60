#pragma once

// Component-wise utilities, vector expected utility, scalarized maximization
// by away-step conditional gradient with an LP oracle, Pareto maximality via
// cutting planes, and the arbitrage-improvement construction.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conemkt/arbitrage.hpp"
#include "conemkt/attainable.hpp"
#include "conemkt/lp_core.hpp"
#include "conemkt/market_cones.hpp"
#include "conemkt/random.hpp"
#include "conemkt/scenario_tree.hpp"
#include "conemkt/tolerances.hpp"

namespace conemkt {

// Bounded-above families with finite one-sided derivative at 0 and U(0) = 0.
enum class UtilityFamily { Exponential, Hyperbolic, PowerAsymptote };

struct AssetUtility {
  UtilityFamily family = UtilityFamily::Exponential;
  double param = 1.0;
};

struct UtilitySpec {
  std::vector<AssetUtility> assets;

  int dim() const { return static_cast<int>(assets.size()); }

  static UtilitySpec exponential(int d, double alpha = 1.0) {
    UtilitySpec s;
    s.assets.assign(static_cast<size_t>(d), {UtilityFamily::Exponential, alpha});
    return s;
  }
  static UtilitySpec hyperbolic(int d, double beta = 1.0) {
    UtilitySpec s;
    s.assets.assign(static_cast<size_t>(d), {UtilityFamily::Hyperbolic, beta});
    return s;
  }
};

struct UtilityEval {
  double value = 0.0;
  double derivative = 0.0;
};

inline UtilityEval eval_utility(const UtilitySpec& spec, int i, double x) {
  if (x < 0.0) throw std::domain_error("eval_utility: negative consumption");
  const AssetUtility& u = spec.assets.at(static_cast<size_t>(i));
  if (!(u.param > 0.0)) throw std::invalid_argument("eval_utility: parameter must be positive");
  UtilityEval out;
  switch (u.family) {
    case UtilityFamily::Exponential: {
      const double e = std::exp(-u.param * x);
      out.value = 1.0 - e;
      out.derivative = u.param * e;
      break;
    }
    case UtilityFamily::Hyperbolic: {
      const double s = u.param + x;
      out.value = x / s;
      out.derivative = u.param / (s * s);
      break;
    }
    case UtilityFamily::PowerAsymptote: {
      const double b = std::pow(1.0 + x, -u.param);
      out.value = 1.0 - b;
      out.derivative = u.param * b / (1.0 + x);
      break;
    }
  }
  return out;
}

// (E_P U^1(X^1), ..., E_P U^d(X^d)). Components in [-1e-9, 0) are treated as
// exact zeros (LP-level noise); anything lower is a genuine violation.
inline std::vector<double> expected_vector_utility(const ScenarioTree& tree,
                                                   const std::vector<std::vector<double>>& terminal,
                                                   const UtilitySpec& spec) {
  const int d = spec.dim();
  std::vector<double> out(static_cast<size_t>(d), 0.0);
  for (int leaf : tree.leaves()) {
    const auto& xt = terminal[static_cast<size_t>(leaf)];
    if (static_cast<int>(xt.size()) != d)
      throw std::invalid_argument("expected_vector_utility: terminal dimension mismatch");
    const double p = tree.node_probability(leaf);
    for (int i = 0; i < d; ++i) {
      double v = xt[static_cast<size_t>(i)];
      if (v < 0.0) {
        if (v < -1e-9) throw std::domain_error("expected_vector_utility: negative terminal component");
        v = 0.0;
      }
      out[static_cast<size_t>(i)] += p * eval_utility(spec, i, v).value;
    }
  }
  return out;
}

struct ParetoSolution {
  std::vector<double> lambda_raw;
  std::vector<double> lambda;  // normalized to sum 1
  TransferPlan plan;
  std::vector<std::vector<double>> terminal;  // node-indexed, meaningful at leaves
  std::vector<double> utilities;
  double gap = 0.0;  // conditional-gradient gap at the returned point
  bool converged = false;
  int iterations = 0;
  int clamp_warnings = 0;  // terminal components below -1e-9 projected to 0
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Concave 1-D maximization by golden section; returns the argmax midpoint.
template <typename F>
double golden_max(F&& f, double lo, double hi, double width = 1e-10) {
  const double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  if (!(b > a)) return a;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 400 && b - a > width; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Per-asset expected utility and its gradient in plan space, evaluated
// through the affine realize map with the one-sided derivative at 0.
struct UtilityGeometry {
  const ScenarioTree& tree;
  const BidAskProcess& pi;
  const UtilitySpec& spec;
  std::vector<double> x;
  PlanIndexer layout;

  UtilityGeometry(const ScenarioTree& t, const BidAskProcess& p, const UtilitySpec& s,
                  std::vector<double> endow)
      : tree(t), pi(p), spec(s), x(std::move(endow)), layout(p.d, t.size()) {}

  Realization realize_flat(const std::vector<double>& flat) const {
    return realize(plan_from_flat(layout, flat), tree, pi, x);
  }

  // clamped per-asset utilities; counts components below -1e-9
  std::vector<double> utilities(const Realization& r, int* warn = nullptr) const {
    const int d = pi.d;
    std::vector<double> u(static_cast<size_t>(d), 0.0);
    for (int leaf : tree.leaves()) {
      const double p = tree.node_probability(leaf);
      for (int i = 0; i < d; ++i) {
        double v = r.terminal[static_cast<size_t>(leaf)][static_cast<size_t>(i)];
        if (v < 0.0) {
          if (v < -1e-9 && warn) ++*warn;
          v = 0.0;
        }
        u[static_cast<size_t>(i)] += p * eval_utility(spec, i, v).value;
      }
    }
    return u;
  }

  // gradient of plan -> E U^i(X^i(plan)) for one asset
  std::vector<double> asset_gradient(const Realization& r, int asset) const {
    const int d = pi.d;
    std::vector<std::vector<double>> w(static_cast<size_t>(tree.size()),
                                       std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int leaf : tree.leaves()) {
      double v = std::max(r.terminal[static_cast<size_t>(leaf)][static_cast<size_t>(asset)], 0.0);
      w[static_cast<size_t>(leaf)][static_cast<size_t>(asset)] =
          tree.node_probability(leaf) * eval_utility(spec, asset, v).derivative;
    }
    return plan_objective_from_leaf_weights(tree, pi, layout, w);
  }

  // gradient of plan -> sum_i lambda_i E U^i(X^i(plan))
  std::vector<double> weighted_gradient(const Realization& r, const std::vector<double>& lambda) const {
    const int d = pi.d;
    std::vector<std::vector<double>> w(static_cast<size_t>(tree.size()),
                                       std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int leaf : tree.leaves()) {
      const double p = tree.node_probability(leaf);
      for (int i = 0; i < d; ++i) {
        double v = std::max(r.terminal[static_cast<size_t>(leaf)][static_cast<size_t>(i)], 0.0);
        w[static_cast<size_t>(leaf)][static_cast<size_t>(i)] =
            lambda[static_cast<size_t>(i)] * p * eval_utility(spec, i, v).derivative;
      }
    }
    return plan_objective_from_leaf_weights(tree, pi, layout, w);
  }

  double weighted_value(const std::vector<double>& flat, const std::vector<double>& lambda,
                        int* warn = nullptr) const {
    Realization r = realize_flat(flat);
    std::vector<double> u = utilities(r, warn);
    return dot(u, lambda);
  }
};

inline std::vector<double> normalized_weights(const std::vector<double>& lambda) {
  double s = 0.0;
  for (double v : lambda) {
    if (!(v > 0.0)) throw std::invalid_argument("scalarization weights must be strictly positive");
    s += v;
  }
  std::vector<double> out = lambda;
  for (double& v : out) v /= s;
  return out;
}

}  // namespace detail

// Away-step conditional gradient over the attainability polytope. Terminates
// when the gap <lambda-gradient, vertex - iterate> falls to tol or at the
// iteration cap (converged=false, gap reported). The returned gap is always
// recomputed at the returned point with a fresh oracle call.
inline ParetoSolution solve_scalarized(const ScenarioTree& tree, const BidAskProcess& pi,
                                       const std::vector<double>& x, const UtilitySpec& spec,
                                       const std::vector<double>& lambda_raw, double gap_tol = -1.0,
                                       const Tolerances& tol = Tolerances::defaults()) {
  if (spec.dim() != pi.d) throw std::invalid_argument("solve_scalarized: utility dimension mismatch");
  if (static_cast<int>(lambda_raw.size()) != pi.d)
    throw std::invalid_argument("solve_scalarized: weight dimension mismatch");
  if (gap_tol <= 0.0) gap_tol = tol.fw_gap;

  const std::vector<double> lambda = detail::normalized_weights(lambda_raw);
  detail::UtilityGeometry geo(tree, pi, spec, x);
  ConstraintSkeleton sk = assemble_constraints(tree, pi, x);
  const int nv = sk.layout.total();

  auto oracle = [&sk, &tol](const std::vector<double>& grad) {
    sk.lp.objective = grad;
    sk.lp.maximize = true;
    LpOutcome res = solve_lp(sk.lp, tol);
    if (res.status != LpStatus::Optimal)
      throw std::runtime_error("solve_scalarized: oracle LP not optimal");
    return res.primal;
  };

  ParetoSolution out;
  out.lambda_raw = lambda_raw;
  out.lambda = lambda;

  std::vector<double> p(static_cast<size_t>(nv), 0.0);
  std::vector<std::pair<std::vector<double>, double>> active;
  active.emplace_back(p, 1.0);

  // Exact line search by bisection on the directional derivative. Function
  // values near the optimum differ below double noise while the derivative
  // is computed directly, so this resolves steps golden section cannot.
  auto dphi = [&](const std::vector<double>& at, const std::vector<double>& dir) {
    Realization r = geo.realize_flat(at);
    return detail::dot(geo.weighted_gradient(r, lambda), dir);
  };
  auto line_search = [&](const std::vector<double>& dir, double gmax) {
    std::vector<double> q = p;
    if (dphi(q, dir) <= 0.0) return 0.0;
    for (int k = 0; k < nv; ++k) q[static_cast<size_t>(k)] = p[static_cast<size_t>(k)] + gmax * dir[static_cast<size_t>(k)];
    if (dphi(q, dir) >= 0.0) return gmax;
    double lo = 0.0, hi = gmax;
    for (int b = 0; b < 60; ++b) {
      const double mid = 0.5 * (lo + hi);
      for (int k = 0; k < nv; ++k) q[static_cast<size_t>(k)] = p[static_cast<size_t>(k)] + mid * dir[static_cast<size_t>(k)];
      (dphi(q, dir) > 0.0 ? lo : hi) = mid;
    }
    return lo;  // derivative still positive here, so the step never loses value
  };

  int warn = 0;
  const int cap = 10000;
  double best_gap = kInf;
  int since_progress = 0;
  int it = 0;
  for (; it < cap; ++it) {
    Realization r = geo.realize_flat(p);
    std::vector<double> grad = geo.weighted_gradient(r, lambda);
    std::vector<double> s = oracle(grad);
    const double gap = detail::dot(grad, s) - detail::dot(grad, p);
    if (gap <= gap_tol) break;
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      since_progress = 0;
    } else if (++since_progress > 50) {
      break;  // stagnated; the fresh certificate below reports the final gap
    }

    bool known = false;
    for (auto& av : active)
      if (av.first == s) known = true;
    if (!known) active.emplace_back(s, 0.0);

    // correction: pairwise steps over the active-set hull until it is
    // near-optimal there, then ask the oracle for a fresh vertex
    for (int inner = 0; inner < 400; ++inner) {
      Realization ri = geo.realize_flat(p);
      std::vector<double> g = geo.weighted_gradient(ri, lambda);
      int top = -1, bot = -1;
      double top_score = -kInf, bot_score = kInf;
      for (size_t k = 0; k < active.size(); ++k) {
        const double sc = detail::dot(g, active[k].first);
        if (sc > top_score) {
          top_score = sc;
          top = static_cast<int>(k);
        }
        if (active[k].second > 0.0 && sc < bot_score) {
          bot_score = sc;
          bot = static_cast<int>(k);
        }
      }
      if (top < 0 || bot < 0 || top == bot) break;
      const double hull_gap = top_score - detail::dot(g, p);
      const double pair_gap = top_score - bot_score;
      if (hull_gap <= 0.25 * gap_tol && pair_gap <= 0.25 * gap_tol) break;

      std::vector<double> dir(static_cast<size_t>(nv));
      for (int k = 0; k < nv; ++k)
        dir[static_cast<size_t>(k)] = active[static_cast<size_t>(top)].first[static_cast<size_t>(k)] -
                                      active[static_cast<size_t>(bot)].first[static_cast<size_t>(k)];
      const double gmax = active[static_cast<size_t>(bot)].second;
      const double gamma = line_search(dir, gmax);
      if (gamma <= 0.0) break;
      for (int k = 0; k < nv; ++k) p[static_cast<size_t>(k)] += gamma * dir[static_cast<size_t>(k)];
      active[static_cast<size_t>(top)].second += gamma;
      active[static_cast<size_t>(bot)].second -= gamma;
      active.erase(std::remove_if(active.begin(), active.end(),
                                  [](const auto& av) { return av.second <= 1e-14; }),
                   active.end());
    }
    if (active.size() > 1)
      active.erase(std::remove_if(active.begin(), active.end(),
                                  [](const auto& av) { return av.second <= 0.0; }),
                   active.end());
  }

  // fresh certificate at the returned point
  Realization r = geo.realize_flat(p);
  std::vector<double> grad = geo.weighted_gradient(r, lambda);
  std::vector<double> v = oracle(grad);
  out.gap = detail::dot(grad, v) - detail::dot(grad, p);
  out.converged = out.gap <= gap_tol;
  out.iterations = it;
  out.plan = plan_from_flat(sk.layout, p);
  out.terminal.assign(static_cast<size_t>(tree.size()), {});
  for (int leaf : tree.leaves()) {
    std::vector<double> t = r.terminal[static_cast<size_t>(leaf)];
    for (double& c : t) {
      if (c < -1e-9) ++warn;
      c = std::max(c, 0.0);
    }
    out.terminal[static_cast<size_t>(leaf)] = std::move(t);
  }
  out.utilities = geo.utilities(r, nullptr);
  out.clamp_warnings = warn;
  return out;
}

struct ParetoCheck {
  bool maximal = false;
  bool resolved = false;  // certified (upper bound or witness), not a cap exit
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  int iterations = 0;
  std::optional<std::vector<std::vector<double>>> dominator;  // terminal map
  std::optional<TransferPlan> dominator_plan;
};

namespace detail {

// Shared state of the componentwise-improvement program
//   max sum_i s_i  s.t.  plan feasible, 0 <= s_i <= 1 - c_i,
//                        E U^i(X^i(plan)) >= c_i + s_i,
// outer-approximated by gradient cuts of the concave E U^i.
struct ImprovementProgram {
  UtilityGeometry geo;
  ConstraintSkeleton sk;
  LinearProgram lp;  // plan vars then s vars; cut rows appended as we go
  std::vector<double> c;
  std::vector<double> cap;
  int nv = 0;
  int d = 0;
  double feas_eps = 1e-7;

  ImprovementProgram(const ScenarioTree& tree, const BidAskProcess& pi, const UtilitySpec& spec,
                     const std::vector<double>& x, const std::vector<double>& base_utilities)
      : geo(tree, pi, spec, x), sk(assemble_constraints(tree, pi, x)), c(base_utilities) {
    d = pi.d;
    nv = sk.layout.total();
    cap.resize(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) cap[static_cast<size_t>(i)] = 1.0 - c[static_cast<size_t>(i)];
    lp = sk.lp;
    lp.maximize = true;
    std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
    for (int i = 0; i < d; ++i) lp.add_var(0.0, std::max(cap[static_cast<size_t>(i)], 0.0), 1.0);
    for (auto& row : lp.rows) row.resize(static_cast<size_t>(nv + d), 0.0);
  }

  // u_i(q) + <g_i, plan - q> >= c_i + s_i  as an LE row
  void add_cuts(const std::vector<double>& q, const Realization& r, const std::vector<double>& u) {
    for (int i = 0; i < d; ++i) {
      std::vector<double> g = geo.asset_gradient(r, i);
      std::vector<double> row(static_cast<size_t>(nv + d), 0.0);
      for (int k = 0; k < nv; ++k) row[static_cast<size_t>(k)] = -g[static_cast<size_t>(k)];
      row[static_cast<size_t>(nv + i)] = 1.0;
      const double rhs = u[static_cast<size_t>(i)] - dot(g, q) - c[static_cast<size_t>(i)];
      lp.add_row(RowSense::LE, rhs, std::move(row));
    }
  }

  bool feasible(const std::vector<double>& u) const {
    for (int i = 0; i < d; ++i)
      if (u[static_cast<size_t>(i)] < c[static_cast<size_t>(i)] - feas_eps) return false;
    return true;
  }

  double clipped_gain(const std::vector<double>& u) const {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      s += std::min(cap[static_cast<size_t>(i)],
                    std::max(0.0, u[static_cast<size_t>(i)] - c[static_cast<size_t>(i)]));
    return s;
  }

  // Largest t in [0,1] with blend(t) = inc + t (target - inc) feasible,
  // assuming inc feasible; the feasible set along the segment is an interval.
  double clip_to_feasible(const std::vector<double>& inc, const std::vector<double>& target) const {
    auto util_at = [&](double t) {
      std::vector<double> q(inc.size());
      for (size_t k = 0; k < q.size(); ++k) q[k] = inc[k] + t * (target[k] - inc[k]);
      return geo.utilities(geo.realize_flat(q), nullptr);
    };
    if (feasible(util_at(1.0))) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 50; ++it) {
      double mid = 0.5 * (lo + hi);
      (feasible(util_at(mid)) ? lo : hi) = mid;
    }
    return lo;
  }
};

}  // namespace detail

// Decides epsilon-Pareto-maximality of a feasible candidate terminal map by
// the componentwise-improvement program. hint, when given, must be a plan
// realizing the candidate; the first cut then lands exactly at the candidate,
// which tightens the one-cut upper bound gap/min(lambda).
inline ParetoCheck is_pareto_maximal(const ScenarioTree& tree, const BidAskProcess& pi,
                                     const std::vector<double>& x, const UtilitySpec& spec,
                                     const std::vector<std::vector<double>>& candidate,
                                     double improve_tol = -1.0,
                                     const Tolerances& tol = Tolerances::defaults(),
                                     const TransferPlan* hint = nullptr) {
  if (improve_tol <= 0.0) improve_tol = tol.pareto;
  std::vector<double> c = expected_vector_utility(tree, candidate, spec);
  detail::ImprovementProgram prog(tree, pi, spec, x, c);
  const int nv = prog.nv;

  // feasible incumbent: the hint plan, else any plan with X >= candidate
  std::vector<double> inc;
  if (hint != nullptr) {
    if (static_cast<int>(hint->flat.size()) != nv)
      throw std::invalid_argument("is_pareto_maximal: hint plan has wrong layout");
    inc = hint->flat;
  } else {
    ConstraintSkeleton init = assemble_constraints(tree, pi, x);
    for (int rix = 0; rix < init.lp.num_rows(); ++rix) {
      auto [leaf, asset] = init.row_meta[static_cast<size_t>(rix)];
      init.lp.rhs[rix] = x[static_cast<size_t>(asset)] -
                         candidate[static_cast<size_t>(leaf)][static_cast<size_t>(asset)] + 1e-8;
    }
    std::vector<std::vector<double>> ones(static_cast<size_t>(tree.size()),
                                          std::vector<double>(static_cast<size_t>(pi.d), 0.0));
    for (int leaf : tree.leaves())
      for (int i = 0; i < pi.d; ++i) ones[static_cast<size_t>(leaf)][static_cast<size_t>(i)] = 1.0;
    init.lp.objective = plan_objective_from_leaf_weights(tree, pi, init.layout, ones);
    init.lp.maximize = true;
    LpOutcome res = solve_lp(init.lp, tol);
    if (res.status != LpStatus::Optimal)
      throw std::invalid_argument("is_pareto_maximal: candidate terminal is not attainable");
    inc = res.primal;
  }

  Realization inc_r = prog.geo.realize_flat(inc);
  std::vector<double> inc_u = prog.geo.utilities(inc_r, nullptr);
  double lb = prog.feasible(inc_u) ? prog.clipped_gain(inc_u) : 0.0;

  ParetoCheck out;
  double ub = kInf;
  std::vector<double> cut_at = inc;
  Realization cut_r = inc_r;
  std::vector<double> cut_u = inc_u;

  const int rounds = 300;
  int k = 0;
  for (; k < rounds; ++k) {
    prog.add_cuts(cut_at, cut_r, cut_u);
    LpOutcome res = solve_lp(prog.lp, tol);
    if (res.status != LpStatus::Optimal)
      throw std::runtime_error("is_pareto_maximal: improvement LP not optimal");
    ub = res.objective;
    std::vector<double> plan_k(res.primal.begin(), res.primal.begin() + nv);

    if (ub <= improve_tol) {
      out.maximal = true;
      out.resolved = true;
      break;
    }

    const double t_max = prog.clip_to_feasible(inc, plan_k);
    auto gain_at = [&](double t) {
      std::vector<double> q(inc.size());
      for (size_t idx = 0; idx < q.size(); ++idx) q[idx] = inc[idx] + t * (plan_k[idx] - inc[idx]);
      return prog.clipped_gain(prog.geo.utilities(prog.geo.realize_flat(q), nullptr));
    };
    double t_best = detail::golden_max(gain_at, 0.0, t_max, 1e-9);
    if (gain_at(t_max) > gain_at(t_best)) t_best = t_max;
    if (gain_at(t_best) > lb) {
      lb = gain_at(t_best);
      for (size_t idx = 0; idx < inc.size(); ++idx) inc[idx] += t_best * (plan_k[idx] - inc[idx]);
      inc_r = prog.geo.realize_flat(inc);
      inc_u = prog.geo.utilities(inc_r, nullptr);
    }

    if (lb > improve_tol) {
      out.maximal = false;
      out.resolved = true;
      break;
    }
    if (ub - lb <= std::max(1e-9, 0.01 * improve_tol)) {
      out.maximal = ub <= improve_tol;
      out.resolved = true;
      break;
    }

    cut_at = plan_k;
    cut_r = prog.geo.realize_flat(cut_at);
    cut_u = prog.geo.utilities(cut_r, nullptr);
  }
  if (!out.resolved) out.maximal = ub <= improve_tol;
  out.upper_bound = ub;
  out.lower_bound = lb;
  out.iterations = k + 1;

  if (!out.maximal) {
    TransferPlan dp = plan_from_flat(prog.sk.layout, inc);
    Realization r = prog.geo.realize_flat(inc);
    std::vector<std::vector<double>> dom(static_cast<size_t>(tree.size()));
    for (int leaf : tree.leaves()) {
      std::vector<double> t = r.terminal[static_cast<size_t>(leaf)];
      for (double& v : t) v = std::max(v, 0.0);
      dom[static_cast<size_t>(leaf)] = std::move(t);
    }
    out.dominator = std::move(dom);
    out.dominator_plan = std::move(dp);
  }
  return out;
}

// Pareto-maximal point dominating a feasible terminal map: first drive the
// componentwise-improvement program (near) to optimality, then maximize the
// utility total subject to the achieved componentwise floors.
inline ParetoSolution domination_point(const ScenarioTree& tree, const BidAskProcess& pi,
                                       const std::vector<double>& x, const UtilitySpec& spec,
                                       const std::vector<std::vector<double>>& start,
                                       double improve_tol = -1.0,
                                       const Tolerances& tol = Tolerances::defaults(),
                                       const TransferPlan* hint = nullptr) {
  if (improve_tol <= 0.0) improve_tol = tol.pareto;
  const int d = pi.d;
  std::vector<double> c = expected_vector_utility(tree, start, spec);

  // stage 1: componentwise improvement, run past the decision threshold
  detail::ImprovementProgram prog(tree, pi, spec, x, c);
  const int nv = prog.nv;
  std::vector<double> inc;
  if (hint != nullptr) {
    inc = hint->flat;
  } else {
    ConstraintSkeleton init = assemble_constraints(tree, pi, x);
    for (int rix = 0; rix < init.lp.num_rows(); ++rix) {
      auto [leaf, asset] = init.row_meta[static_cast<size_t>(rix)];
      init.lp.rhs[rix] = x[static_cast<size_t>(asset)] -
                         start[static_cast<size_t>(leaf)][static_cast<size_t>(asset)] + 1e-8;
    }
    LpOutcome res = solve_lp(init.lp, tol);
    if (res.status != LpStatus::Optimal)
      throw std::invalid_argument("domination_point: start terminal is not attainable");
    inc = res.primal;
  }
  Realization inc_r = prog.geo.realize_flat(inc);
  std::vector<double> inc_u = prog.geo.utilities(inc_r, nullptr);
  double lb = prog.feasible(inc_u) ? prog.clipped_gain(inc_u) : 0.0;
  std::vector<double> cut_at = inc;
  Realization cut_r = inc_r;
  std::vector<double> cut_u = inc_u;
  const double stage1_eps = std::max(1e-9, 0.05 * improve_tol);
  for (int k = 0; k < 300; ++k) {
    prog.add_cuts(cut_at, cut_r, cut_u);
    LpOutcome res = solve_lp(prog.lp, tol);
    if (res.status != LpStatus::Optimal)
      throw std::runtime_error("domination_point: improvement LP not optimal");
    std::vector<double> plan_k(res.primal.begin(), res.primal.begin() + nv);
    const double ub = res.objective;
    const double t_max = prog.clip_to_feasible(inc, plan_k);
    auto gain_at = [&](double t) {
      std::vector<double> q(inc.size());
      for (size_t idx = 0; idx < q.size(); ++idx) q[idx] = inc[idx] + t * (plan_k[idx] - inc[idx]);
      return prog.clipped_gain(prog.geo.utilities(prog.geo.realize_flat(q), nullptr));
    };
    double t_best = detail::golden_max(gain_at, 0.0, t_max, 1e-9);
    if (gain_at(t_max) > gain_at(t_best)) t_best = t_max;
    if (gain_at(t_best) > lb) {
      lb = gain_at(t_best);
      for (size_t idx = 0; idx < inc.size(); ++idx) inc[idx] += t_best * (plan_k[idx] - inc[idx]);
      inc_r = prog.geo.realize_flat(inc);
      inc_u = prog.geo.utilities(inc_r, nullptr);
    }
    if (ub - lb <= stage1_eps) break;
    cut_at = plan_k;
    cut_r = prog.geo.realize_flat(cut_at);
    cut_u = prog.geo.utilities(cut_r, nullptr);
  }

  // stage 2: maximize sum_i E U^i subject to E U^i >= floors from stage 1,
  // Kelley cuts on both the objective and the floor constraints
  std::vector<double> floors = inc_u;
  detail::UtilityGeometry& geo = prog.geo;
  LinearProgram lp2 = prog.sk.lp;
  lp2.maximize = true;
  std::fill(lp2.objective.begin(), lp2.objective.end(), 0.0);
  const int tvar = lp2.add_var(0.0, static_cast<double>(d), 1.0);
  for (auto& row : lp2.rows) row.resize(static_cast<size_t>(nv + 1), 0.0);

  auto add_stage2_cuts = [&](const std::vector<double>& q, const Realization& r,
                             const std::vector<double>& u) {
    std::vector<double> gsum(static_cast<size_t>(nv), 0.0);
    double usum = 0.0;
    for (int i = 0; i < d; ++i) {
      std::vector<double> g = geo.asset_gradient(r, i);
      // floor cut: u_i(q) + <g, plan - q> >= floor_i
      std::vector<double> row(static_cast<size_t>(nv + 1), 0.0);
      for (int k = 0; k < nv; ++k) row[static_cast<size_t>(k)] = -g[static_cast<size_t>(k)];
      lp2.add_row(RowSense::LE,
                  u[static_cast<size_t>(i)] - detail::dot(g, q) - floors[static_cast<size_t>(i)],
                  std::move(row));
      for (int k = 0; k < nv; ++k) gsum[static_cast<size_t>(k)] += g[static_cast<size_t>(k)];
      usum += u[static_cast<size_t>(i)];
    }
    // objective cut: t <= sum_i u_i(q) + <sum_i g_i, plan - q>
    std::vector<double> row(static_cast<size_t>(nv + 1), 0.0);
    for (int k = 0; k < nv; ++k) row[static_cast<size_t>(k)] = -gsum[static_cast<size_t>(k)];
    row[static_cast<size_t>(tvar)] = 1.0;
    lp2.add_row(RowSense::LE, usum - detail::dot(gsum, q), std::move(row));
  };

  auto floors_ok = [&](const std::vector<double>& u) {
    for (int i = 0; i < d; ++i)
      if (u[static_cast<size_t>(i)] < floors[static_cast<size_t>(i)] - prog.feas_eps) return false;
    return true;
  };

  double lb2 = 0.0;
  for (double v : inc_u) lb2 += v;
  double ub2 = kInf;
  cut_at = inc;
  cut_r = geo.realize_flat(cut_at);
  cut_u = geo.utilities(cut_r, nullptr);
  int it2 = 0;
  for (; it2 < 300; ++it2) {
    add_stage2_cuts(cut_at, cut_r, cut_u);
    LpOutcome res = solve_lp(lp2, tol);
    if (res.status != LpStatus::Optimal)
      throw std::runtime_error("domination_point: stage-2 LP not optimal");
    ub2 = res.objective;
    std::vector<double> plan_k(res.primal.begin(), res.primal.begin() + nv);

    auto util_at = [&](double t) {
      std::vector<double> q(inc.size());
      for (size_t idx = 0; idx < q.size(); ++idx) q[idx] = inc[idx] + t * (plan_k[idx] - inc[idx]);
      return geo.utilities(geo.realize_flat(q), nullptr);
    };
    double t_max = 1.0;
    if (!floors_ok(util_at(1.0))) {
      double lo = 0.0, hi = 1.0;
      for (int b = 0; b < 50; ++b) {
        double mid = 0.5 * (lo + hi);
        (floors_ok(util_at(mid)) ? lo : hi) = mid;
      }
      t_max = lo;
    }
    auto total_at = [&](double t) {
      std::vector<double> u = util_at(t);
      double s = 0.0;
      for (double v : u) s += v;
      return s;
    };
    double t_best = detail::golden_max(total_at, 0.0, t_max, 1e-9);
    if (total_at(t_max) > total_at(t_best)) t_best = t_max;
    if (total_at(t_best) > lb2) {
      lb2 = total_at(t_best);
      for (size_t idx = 0; idx < inc.size(); ++idx) inc[idx] += t_best * (plan_k[idx] - inc[idx]);
    }
    if (ub2 - lb2 <= improve_tol) break;
    cut_at = plan_k;
    cut_r = geo.realize_flat(cut_at);
    cut_u = geo.utilities(cut_r, nullptr);
  }

  ParetoSolution out;
  out.lambda_raw.assign(static_cast<size_t>(d), 1.0);
  out.lambda.assign(static_cast<size_t>(d), 1.0 / d);
  out.plan = plan_from_flat(prog.sk.layout, inc);
  Realization r = geo.realize_flat(inc);
  out.terminal.assign(static_cast<size_t>(tree.size()), {});
  for (int leaf : tree.leaves()) {
    std::vector<double> t = r.terminal[static_cast<size_t>(leaf)];
    for (double& v : t) v = std::max(v, 0.0);
    out.terminal[static_cast<size_t>(leaf)] = std::move(t);
  }
  out.utilities = geo.utilities(r, nullptr);
  out.gap = ub2 - lb2;
  out.converged = out.gap <= improve_tol;
  out.iterations = it2 + 1;
  return out;
}

// X-hat + kappa * X-bar from an arbitrage certificate: componentwise >= with
// a strict increase somewhere. The certificate's stored terminal is already
// clamped at 0, so adding it never decreases any component.
inline std::vector<std::vector<double>> improvement_from_arbitrage(
    const ScenarioTree& tree, const BidAskProcess& pi, const std::vector<double>& x,
    const UtilitySpec& spec, const std::vector<std::vector<double>>& candidate,
    const ArbitrageCertificate& cert, const Tolerances& tol = Tolerances::defaults()) {
  (void)x;
  (void)spec;
  if (!certificate_valid(cert, tree, pi, tol))
    throw std::invalid_argument("improvement_from_arbitrage: invalid certificate");
  double top = 0.0;
  for (int leaf : tree.leaves())
    for (double v : cert.terminal[static_cast<size_t>(leaf)]) top = std::max(top, v);
  const double kappa = std::max(1.0, 10.0 / top);
  std::vector<std::vector<double>> out(static_cast<size_t>(tree.size()));
  for (int leaf : tree.leaves()) {
    const auto& base = candidate[static_cast<size_t>(leaf)];
    const auto& add = cert.terminal[static_cast<size_t>(leaf)];
    std::vector<double> t(base.size());
    for (size_t i = 0; i < base.size(); ++i) t[i] = base[i] + kappa * std::max(add[i], 0.0);
    out[static_cast<size_t>(leaf)] = std::move(t);
  }
  return out;
}

struct SweepEntry {
  std::vector<double> lambda;
  std::optional<ParetoSolution> solution;
  std::string error;
};

// One scalarized solve per weight vector; per-entry failures are recorded and
// the sweep continues. Output order follows the grid (callers pass it sorted).
inline std::vector<SweepEntry> pareto_front_sweep(const ScenarioTree& tree, const BidAskProcess& pi,
                                                  const std::vector<double>& x,
                                                  const UtilitySpec& spec,
                                                  const std::vector<std::vector<double>>& grid,
                                                  double gap_tol = -1.0,
                                                  const Tolerances& tol = Tolerances::defaults()) {
  std::vector<SweepEntry> out;
  for (const auto& lambda : grid) {
    SweepEntry e;
    e.lambda = lambda;
    try {
      e.solution = solve_scalarized(tree, pi, x, spec, lambda, gap_tol, tol);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

// Weight grid on the simplex with every component floored at 0.1 (keeps the
// scalarization certificates meaningful at the sweep's tolerance).
inline std::vector<std::vector<double>> weight_grid(int d, int n) {
  if (d < 1 || n < 1) throw std::invalid_argument("weight_grid: bad parameters");
  std::vector<std::vector<double>> grid;
  if (d == 1) {
    grid.assign(static_cast<size_t>(n), {1.0});
    return grid;
  }
  if (d == 2) {
    for (int k = 0; k < n; ++k) {
      double a = n == 1 ? 0.5 : 0.1 + 0.8 * static_cast<double>(k) / (n - 1);
      grid.push_back({a, 1.0 - a});
    }
    return grid;
  }
  Rng rng(90001);
  for (int k = 0; k < n; ++k) {
    std::vector<double> z(static_cast<size_t>(d));
    double s = 0.0;
    for (double& v : z) s += (v = rng.uniform(0.1, 1.0));
    const double spare = 1.0 - 0.1 * d;
    for (double& v : z) v = 0.1 + spare * v / s;
    grid.push_back(std::move(z));
  }
  return grid;
}

}  // namespace conemkt
