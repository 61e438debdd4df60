#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "conemkt/arbitrage.hpp"
#include "conemkt/attainable.hpp"
#include "conemkt/instance.hpp"
#include "conemkt/utility.hpp"
#include "support/fixtures.hpp"

using namespace conemkt;
using Catch::Approx;

namespace {

// node-indexed terminal map equal to the endowment at every leaf
std::vector<std::vector<double>> no_trade_terminal(const ScenarioTree& tree,
                                                   const std::vector<double>& x) {
  std::vector<std::vector<double>> out(static_cast<size_t>(tree.size()));
  for (int leaf : tree.leaves()) out[static_cast<size_t>(leaf)] = x;
  return out;
}

// Two-leaf market where asset 0 is cheap in leaf u and dear in leaf d, with
// wide spreads at the root. Trading at the leaves raises both expected
// utilities over no-trade, so the no-trade point is dominated.
BidAskProcess reallocation_market(const ScenarioTree& tree) {
  BidAskProcess pi;
  pi.d = 2;
  pi.matrices = AdaptedProcess<BidAskMatrix>(tree.size(), BidAskMatrix(2));
  BidAskMatrix root(2);
  root.at(0, 1) = 20.0;
  root.at(1, 0) = 20.0;
  BidAskMatrix u(2);  // value vector (0.1, 1)
  u.at(0, 1) = 10.0;
  u.at(1, 0) = 0.1;
  BidAskMatrix d(2);  // value vector (10, 1)
  d.at(0, 1) = 0.1;
  d.at(1, 0) = 10.0;
  pi.at(0) = root;
  pi.at(1) = u;
  pi.at(2) = d;
  return pi;
}

double utility_sum(const std::vector<double>& u) {
  double s = 0.0;
  for (double v : u) s += v;
  return s;
}

}  // namespace

TEST_CASE("utility families match their closed forms") {
  UtilitySpec spec;
  spec.assets = {{UtilityFamily::Exponential, 1.0},
                 {UtilityFamily::Hyperbolic, 1.0},
                 {UtilityFamily::PowerAsymptote, 2.0}};

  UtilityEval e = eval_utility(spec, 0, 0.0);
  REQUIRE(e.value == 0.0);
  REQUIRE(e.derivative == 1.0);

  UtilityEval h = eval_utility(spec, 1, 1.0);
  REQUIRE(h.value == Approx(0.5));
  REQUIRE(h.derivative == Approx(0.25));

  UtilityEval p = eval_utility(spec, 2, 1.0);
  REQUIRE(p.value == Approx(0.75));
  REQUIRE(p.derivative == Approx(0.25));

  REQUIRE_THROWS_AS(eval_utility(spec, 0, -0.1), std::domain_error);
  UtilitySpec bad;
  bad.assets = {{UtilityFamily::Exponential, 0.0}};
  REQUIRE_THROWS_AS(eval_utility(bad, 0, 1.0), std::invalid_argument);
}

TEST_CASE("utility derivatives agree with central differences") {
  Rng rng(2024);
  const double hstep = 1e-5;
  for (int fam = 0; fam < 3; ++fam) {
    for (int rep = 0; rep < 50; ++rep) {
      UtilitySpec spec;
      AssetUtility u;
      u.family = fam == 0   ? UtilityFamily::Exponential
                 : fam == 1 ? UtilityFamily::Hyperbolic
                            : UtilityFamily::PowerAsymptote;
      u.param = rng.uniform(0.5, 2.0);
      spec.assets = {u};
      const double x = rng.uniform(0.05, 3.0);
      const double fd =
          (eval_utility(spec, 0, x + hstep).value - eval_utility(spec, 0, x - hstep).value) /
          (2.0 * hstep);
      const double g = eval_utility(spec, 0, x).derivative;
      REQUIRE(std::abs(fd - g) <= 1e-6 * std::max(1.0, std::abs(g)));
    }
  }
}

TEST_CASE("expected utility clamps solver noise and rejects violations") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  UtilitySpec spec = UtilitySpec::exponential(2);

  std::vector<std::vector<double>> zero(3);
  zero[1] = {0.0, 0.0};
  zero[2] = {0.0, 0.0};
  std::vector<double> u = expected_vector_utility(tree, zero, spec);
  REQUIRE(u[0] == 0.0);
  REQUIRE(u[1] == 0.0);

  std::vector<std::vector<double>> split(3);
  split[1] = {0.0, 1.0};
  split[2] = {2.0, 1.0};
  u = expected_vector_utility(tree, split, spec);
  REQUIRE(u[0] == Approx(0.5 * (1.0 - std::exp(-2.0))));
  REQUIRE(u[1] == Approx(1.0 - std::exp(-1.0)));

  std::vector<std::vector<double>> noisy(3);
  noisy[1] = {-5e-10, 1.0};
  noisy[2] = {0.0, 1.0};
  u = expected_vector_utility(tree, noisy, spec);
  REQUIRE(u[0] == 0.0);

  std::vector<std::vector<double>> badmap(3);
  badmap[1] = {-2e-9, 1.0};
  badmap[2] = {0.0, 1.0};
  REQUIRE_THROWS_AS(expected_vector_utility(tree, badmap, spec), std::domain_error);
}

TEST_CASE("single-asset problems stop at the zero plan") {
  ScenarioTree tree = fixtures::path_tree(1);
  BidAskProcess pi = fixtures::frictionless_from_prices(tree, {{1.0}, {1.0}});
  UtilitySpec spec = UtilitySpec::exponential(1);

  ParetoSolution sol = solve_scalarized(tree, pi, {1.0}, spec, {1.0});
  REQUIRE(sol.converged);
  REQUIRE(sol.iterations == 0);
  REQUIRE(sol.gap == 0.0);
  REQUIRE(sol.terminal[1][0] == Approx(1.0));
  REQUIRE(sol.utilities[0] == Approx(1.0 - std::exp(-1.0)));
}

TEST_CASE("symmetric frictionless split equalizes holdings") {
  ScenarioTree tree = fixtures::path_tree(1);
  BidAskProcess pi = fixtures::frictionless_from_prices(tree, {{1.0, 1.0}, {1.0, 1.0}});
  UtilitySpec spec = UtilitySpec::exponential(2);

  ParetoSolution sol = solve_scalarized(tree, pi, {2.0, 0.0}, spec, {1.0, 1.0});
  REQUIRE(sol.converged);
  REQUIRE(sol.gap <= 1e-6);
  const int leaf = tree.leaves()[0];
  REQUIRE(sol.terminal[static_cast<size_t>(leaf)][0] == Approx(1.0).margin(5e-3));
  REQUIRE(sol.terminal[static_cast<size_t>(leaf)][1] == Approx(1.0).margin(5e-3));
  REQUIRE(sol.utilities[0] == Approx(1.0 - std::exp(-1.0)).margin(2e-3));
  REQUIRE(sol.utilities[1] == Approx(1.0 - std::exp(-1.0)).margin(2e-3));
  // normalization reported alongside raw weights
  REQUIRE(sol.lambda[0] == Approx(0.5));
  REQUIRE(sol.lambda_raw[0] == 1.0);
}

TEST_CASE("two-point grid oracle brackets the scalarized value") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  BidAskProcess pi = fixtures::two_point_market(tree, 2.0, 0.5);
  UtilitySpec spec = UtilitySpec::exponential(2);

  ParetoSolution sol = solve_scalarized(tree, pi, {1.0, 1.0}, spec, {1.0, 1.0});
  REQUIRE(sol.converged);
  const double solver_value = 0.5 * utility_sum(sol.utilities);

  // exhaust the effective degrees of freedom: post-root asset-1 holdings v1
  // (asset 0 pays for it one-for-one), then the optimal split at each leaf
  auto util = [](double c) { return c <= 0.0 ? 0.0 : 1.0 - std::exp(-c); };
  auto leaf_best = [&](double budget, double q) {
    if (budget < 0.0) return -1.0;
    double best = 0.0;
    const int steps = 800;
    for (int k = 0; k <= steps; ++k) {
      const double x1 = budget / q * k / steps;
      best = std::max(best, util(budget - q * x1) + util(x1));
    }
    return best;
  };
  double oracle = -1.0;
  const int vsteps = 1200;
  for (int k = 0; k <= vsteps; ++k) {
    const double v1 = -2.0 + 6.0 * k / vsteps;
    const double bu = 2.0 + v1;        // leaf-u value at price (1,2)
    const double bd = 2.0 - 0.5 * v1;  // leaf-d value at price (1,0.5)
    if (bu < 0.0 || bd < 0.0) continue;
    oracle = std::max(oracle, 0.5 * (0.5 * leaf_best(bu, 2.0) + 0.5 * leaf_best(bd, 0.5)));
  }

  REQUIRE(solver_value >= oracle - 1e-5);
  REQUIRE(solver_value <= oracle + 5e-5);
  REQUIRE(utility_sum(sol.utilities) >= 2.0 * (1.0 - std::exp(-1.0)) - 1e-9);
}

TEST_CASE("plan-space gradients match central differences") {
  Rng rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 2 + rep % 2;
    InstanceBundle b = generate_roundtrip_instance(3000 + static_cast<std::uint64_t>(rep), d,
                                                   1 + rep % 2, 2);
    detail::UtilityGeometry geo(b.tree, b.pi, b.spec, b.x);
    std::vector<double> lambda(static_cast<size_t>(d));
    double s = 0.0;
    for (double& v : lambda) s += (v = rng.uniform(0.2, 1.0));
    for (double& v : lambda) v /= s;

    std::vector<double> flat(static_cast<size_t>(geo.layout.total()));
    for (double& v : flat) v = rng.uniform(5e-4, 2e-3);
    // keep the terminal well inside the positive orthant
    for (int guard = 0; guard < 60; ++guard) {
      Realization r = geo.realize_flat(flat);
      double lo = 1e300;
      for (int leaf : b.tree.leaves())
        for (double c : r.terminal[static_cast<size_t>(leaf)]) lo = std::min(lo, c);
      if (lo > 0.05) break;
      for (double& v : flat) v *= 0.5;
    }

    Realization r = geo.realize_flat(flat);
    std::vector<double> grad = geo.weighted_gradient(r, lambda);
    const double h = 1e-6;
    for (size_t k = 0; k < flat.size(); ++k) {
      std::vector<double> up = flat, dn = flat;
      up[k] += h;
      dn[k] -= h;
      const double fd = (geo.weighted_value(up, lambda) - geo.weighted_value(dn, lambda)) / (2.0 * h);
      REQUIRE(std::abs(fd - grad[k]) <= 1e-5 * std::max(1.0, std::abs(grad[k])));
    }
  }
}

TEST_CASE("scalarized solutions pass the maximality check") {
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + rep % 2;
    InstanceBundle b = generate_roundtrip_instance(500 + static_cast<std::uint64_t>(rep), d,
                                                   1 + rep % 2, 2 + rep % 2);
    NarResult nar = check_nar(b.tree, b.pi);
    REQUIRE(nar.holds);

    std::vector<double> lambda(static_cast<size_t>(d), 1.0);
    lambda[static_cast<size_t>(rep % d)] = 2.0;
    ParetoSolution sol = solve_scalarized(b.tree, b.pi, b.x, b.spec, lambda);
    REQUIRE(sol.converged);
    for (double u : sol.utilities) {
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
    }

    ParetoCheck chk = is_pareto_maximal(b.tree, b.pi, b.x, b.spec, sol.terminal, 1e-4,
                                        Tolerances::defaults(), &sol.plan);
    REQUIRE(chk.maximal);
  }
}

TEST_CASE("reallocation instance: no-trade is dominated") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  BidAskProcess pi = reallocation_market(tree);
  UtilitySpec spec = UtilitySpec::exponential(2);
  const std::vector<double> x{1.0, 1.0};

  REQUIRE(check_nar(tree, pi).holds);

  auto candidate = no_trade_terminal(tree, x);
  std::vector<double> base = expected_vector_utility(tree, candidate, spec);

  ParetoCheck chk = is_pareto_maximal(tree, pi, x, spec, candidate);
  REQUIRE_FALSE(chk.maximal);
  REQUIRE(chk.lower_bound > 1e-3);
  REQUIRE(chk.dominator.has_value());
  std::vector<double> dom_u = expected_vector_utility(tree, *chk.dominator, spec);
  for (int i = 0; i < 2; ++i) REQUIRE(dom_u[i] >= base[i] - 1e-7);
  REQUIRE(utility_sum(dom_u) > utility_sum(base) + 1e-3);
}

TEST_CASE("domination point improves no-trade and is maximal") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  BidAskProcess pi = reallocation_market(tree);
  UtilitySpec spec = UtilitySpec::exponential(2);
  const std::vector<double> x{1.0, 1.0};

  auto candidate = no_trade_terminal(tree, x);
  std::vector<double> base = expected_vector_utility(tree, candidate, spec);

  ParetoSolution dom = domination_point(tree, pi, x, spec, candidate);
  REQUIRE(dom.utilities[0] >= base[0] + 1e-3);
  REQUIRE(dom.utilities[1] >= base[1] + 1e-3);

  ParetoCheck chk = is_pareto_maximal(tree, pi, x, spec, dom.terminal, 1e-4,
                                      Tolerances::defaults(), &dom.plan);
  REQUIRE(chk.maximal);
}

TEST_CASE("domination point is a fixed point at maximal inputs") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  BidAskProcess pi = fixtures::two_point_market(tree, 2.0, 0.5, 0.2);
  UtilitySpec spec = UtilitySpec::exponential(2);
  const std::vector<double> x{1.0, 1.0};

  ParetoSolution sol = solve_scalarized(tree, pi, x, spec, {1.0, 1.0});
  REQUIRE(sol.converged);
  ParetoSolution dom = domination_point(tree, pi, x, spec, sol.terminal, -1.0,
                                        Tolerances::defaults(), &sol.plan);
  for (int i = 0; i < 2; ++i) REQUIRE(dom.utilities[i] >= sol.utilities[i] - 1e-7);
  REQUIRE(utility_sum(dom.utilities) <= utility_sum(sol.utilities) + 5e-5);
}

TEST_CASE("wasteful disposal is dominated") {
  ScenarioTree tree = fixtures::path_tree(1);
  BidAskProcess pi = fixtures::frictionless_from_prices(tree, {{1.0, 1.0}, {1.0, 1.0}});
  UtilitySpec spec = UtilitySpec::exponential(2);

  std::vector<std::vector<double>> candidate(2);
  candidate[1] = {1.5, 0.0};  // half a unit of asset 0 thrown away
  ParetoCheck chk = is_pareto_maximal(tree, pi, {2.0, 0.0}, spec, candidate);
  REQUIRE_FALSE(chk.maximal);
  REQUIRE(chk.lower_bound > 0.05);
}

TEST_CASE("arbitrage certificates improve any candidate") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  BidAskProcess pi = fixtures::two_point_market(tree, 2.0, 1.5);
  UtilitySpec spec = UtilitySpec::exponential(2);
  const std::vector<double> x{1.0, 1.0};

  NaResult na = check_na(tree, pi);
  REQUIRE_FALSE(na.holds);
  REQUIRE(na.certificate.has_value());

  auto check_improves = [&](const std::vector<std::vector<double>>& candidate) {
    std::vector<double> before = expected_vector_utility(tree, candidate, spec);
    auto improved = improvement_from_arbitrage(tree, pi, x, spec, candidate, *na.certificate);
    std::vector<double> after = expected_vector_utility(tree, improved, spec);
    double best_gain = 0.0;
    for (int i = 0; i < 2; ++i) {
      REQUIRE(after[i] >= before[i] - 1e-12);
      best_gain = std::max(best_gain, after[i] - before[i]);
    }
    REQUIRE(best_gain > 1e-9);
  };

  check_improves(no_trade_terminal(tree, x));

  Rng rng(4242);
  PlanIndexer layout(2, tree.size());
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> flat(static_cast<size_t>(layout.total()));
    for (double& v : flat) v = rng.uniform(0.0, 0.05);
    Realization r = realize(plan_from_flat(layout, flat), tree, pi, x);
    std::vector<std::vector<double>> candidate(static_cast<size_t>(tree.size()));
    for (int leaf : tree.leaves()) {
      std::vector<double> t = r.terminal[static_cast<size_t>(leaf)];
      for (double& c : t) c = std::max(c, 0.0);
      candidate[static_cast<size_t>(leaf)] = std::move(t);
    }
    check_improves(candidate);
  }

  ArbitrageCertificate zero;
  zero.plan = TransferPlan(2, tree.size());
  zero.terminal.assign(static_cast<size_t>(tree.size()), std::vector<double>(2, 0.0));
  REQUIRE_THROWS_AS(improvement_from_arbitrage(tree, pi, x, spec, no_trade_terminal(tree, x), zero),
                    std::invalid_argument);
}

TEST_CASE("sweep: scaling invariance, non-domination, comparative statics") {
  ScenarioTree tree = fixtures::two_leaf_tree();
  BidAskProcess pi = fixtures::two_point_market(tree, 2.0, 0.5, 0.2);
  UtilitySpec spec = UtilitySpec::exponential(2);
  const std::vector<double> x{1.0, 1.0};

  // positive scaling of lambda leaves the solve unchanged bit for bit
  ParetoSolution a = solve_scalarized(tree, pi, x, spec, {1.0, 1.0});
  ParetoSolution bsol = solve_scalarized(tree, pi, x, spec, {2.0, 2.0});
  REQUIRE(a.utilities == bsol.utilities);
  REQUIRE(a.plan.flat == bsol.plan.flat);

  std::vector<SweepEntry> sweep = pareto_front_sweep(tree, pi, x, spec, weight_grid(2, 5));
  REQUIRE(sweep.size() == 5);
  for (const auto& e : sweep) {
    REQUIRE(e.error.empty());
    REQUIRE(e.solution.has_value());
    REQUIRE(e.solution->converged);
    for (double u : e.solution->utilities) {
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
    }
  }
  for (size_t i = 0; i < sweep.size(); ++i)
    for (size_t j = 0; j < sweep.size(); ++j) {
      if (i == j) continue;
      const auto& ui = sweep[i].solution->utilities;
      const auto& uj = sweep[j].solution->utilities;
      bool weak_above = true;
      bool strict_somewhere = false;
      for (size_t k = 0; k < ui.size(); ++k) {
        if (ui[k] < uj[k] - 1e-6) weak_above = false;
        if (ui[k] > uj[k] + 1e-6) strict_somewhere = true;
      }
      REQUIRE_FALSE((weak_above && strict_somewhere));
    }

  // d=1: every weight gives the same point
  ScenarioTree path = fixtures::path_tree(1);
  BidAskProcess pi1 = fixtures::frictionless_from_prices(path, {{1.0}, {1.0}});
  std::vector<SweepEntry> single =
      pareto_front_sweep(path, pi1, {1.0}, UtilitySpec::exponential(1), {{1.0}, {2.0}});
  REQUIRE(single[0].solution->utilities == single[1].solution->utilities);

  // tilting the weights toward asset 0 cannot lower its utility
  BidAskProcess re = reallocation_market(tree);
  ParetoSolution tilt0 = solve_scalarized(tree, re, x, spec, {0.9, 0.1});
  ParetoSolution tilt1 = solve_scalarized(tree, re, x, spec, {0.1, 0.9});
  REQUIRE(tilt0.utilities[0] >= tilt1.utilities[0] - 1e-9);
}

TEST_CASE("weight grids stay on the floored simplex") {
  for (int d : {1, 2, 3, 4}) {
    auto grid = weight_grid(d, 6);
    REQUIRE(grid.size() == 6);
    for (const auto& w : grid) {
      double s = 0.0;
      for (double v : w) {
        REQUIRE(v >= 0.1 - 1e-12);
        s += v;
      }
      REQUIRE(s == Approx(1.0));
    }
  }
}
