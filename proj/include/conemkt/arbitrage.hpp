#pragma once

// NA and robust NA decided by linear programming, with certificates:
// an arbitrage plan when NA fails, a (strictly) consistent price process
// when it holds.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "conemkt/attainable.hpp"
#include "conemkt/lp_core.hpp"
#include "conemkt/market_cones.hpp"
#include "conemkt/scenario_tree.hpp"
#include "conemkt/tolerances.hpp"

namespace conemkt {

// Nonnegative price process Z_t(n) in R^d, adapted to the tree.
struct PriceProcess {
  int d = 0;
  AdaptedProcess<std::vector<double>> values;

  const std::vector<double>& at(int node) const { return values[node]; }
  std::vector<double>& at(int node) { return values[node]; }
};

// Max-norm martingale residual over non-leaf nodes:
//   max_n max_i | sum_c p(c|n) Z^i(c) - Z^i(n) |.
inline double martingale_residual(const PriceProcess& z, const ScenarioTree& tree) {
  double worst = 0.0;
  for (int n = 0; n < tree.size(); ++n) {
    if (tree.is_leaf(n)) continue;
    for (int i = 0; i < z.d; ++i) {
      double s = 0.0;
      for (int c : tree.node(n).children) s += tree.node(c).prob * z.at(c)[static_cast<size_t>(i)];
      worst = std::max(worst, std::abs(s - z.at(n)[static_cast<size_t>(i)]));
    }
  }
  return worst;
}

struct ViolationEntry {
  int leaf = -1;
  int asset = -1;
  double value = 0.0;
};

// Witness that NA fails: a zero-endowment plan whose terminal positions are
// nonnegative everywhere and bounded away from zero somewhere.
struct ArbitrageCertificate {
  TransferPlan plan;
  std::vector<std::vector<double>> terminal;  // node-indexed, meaningful at leaves
  std::vector<ViolationEntry> positive_entries;
};

struct NaResult {
  bool holds = true;
  double value = 0.0;  // LP optimum of total terminal mass (infinity when unbounded)
  std::optional<ArbitrageCertificate> certificate;
};

inline NaResult check_na(const ScenarioTree& tree, const BidAskProcess& pi,
                         const Tolerances& tol = Tolerances::defaults()) {
  const int d = pi.d;
  std::vector<double> zero(static_cast<size_t>(d), 0.0);
  ConstraintSkeleton sk = assemble_constraints(tree, pi, zero);
  std::vector<std::vector<double>> w(static_cast<size_t>(tree.size()),
                                     std::vector<double>(static_cast<size_t>(d), 0.0));
  for (int leaf : tree.leaves())
    for (int i = 0; i < d; ++i) w[static_cast<size_t>(leaf)][static_cast<size_t>(i)] = 1.0;
  sk.lp.objective = plan_objective_from_leaf_weights(tree, pi, sk.layout, w);
  sk.lp.maximize = true;

  LpOutcome res = solve_lp(sk.lp, tol);

  NaResult out;
  std::vector<double> flat;
  if (res.status == LpStatus::Optimal) {
    out.value = res.objective;
    out.holds = res.objective <= tol.na_value;
    flat = res.primal;
  } else if (res.status == LpStatus::Unbounded) {
    out.value = kInf;
    out.holds = false;
    flat = res.primal.empty() ? std::vector<double>(static_cast<size_t>(sk.layout.total()), 0.0)
                              : res.primal;
    for (size_t k = 0; k < flat.size(); ++k) flat[k] += res.ray[k];
    for (double& v : flat) v = std::max(v, 0.0);
  } else {
    throw std::runtime_error("check_na: attainability LP infeasible (zero plan should be feasible)");
  }
  if (out.holds) return out;

  TransferPlan plan = plan_from_flat(sk.layout, flat);
  Realization r = realize(plan, tree, pi, zero);
  double top = 0.0;
  for (int leaf : tree.leaves())
    for (int i = 0; i < d; ++i)
      top = std::max(top, r.terminal[static_cast<size_t>(leaf)][static_cast<size_t>(i)]);
  if (top > 0.0) {
    // Normalize so the largest terminal component is 1; keeps the witness
    // scale-independent of the box bound.
    double s = 1.0 / top;
    for (double& v : plan.flat) v *= s;
    r = realize(plan, tree, pi, zero);
  }

  ArbitrageCertificate cert;
  cert.plan = plan;
  cert.terminal.assign(static_cast<size_t>(tree.size()), {});
  for (int leaf : tree.leaves()) {
    std::vector<double> t = r.terminal[static_cast<size_t>(leaf)];
    for (double& v : t) v = std::max(v, 0.0);  // shave LP-level noise, stays within replay tolerance
    cert.terminal[static_cast<size_t>(leaf)] = t;
    for (int i = 0; i < d; ++i) {
      double v = t[static_cast<size_t>(i)];
      if (v >= tol.membership) cert.positive_entries.push_back({leaf, i, v});
    }
  }
  out.certificate = std::move(cert);
  return out;
}

struct FindPriceResult {
  std::optional<PriceProcess> Z;
  // Maximized uniform margin over the designated rows; -1 when infeasible.
  // Strict mode designates nondegenerate polar rows and positivity rows;
  // non-strict mode designates positivity rows only.
  double margin = -1.0;
  LpOutcome outcome;
};

// LP over Z(n) >= 0 per node: martingale equalities, polar rows
// Z^j(n) - pi^{ij}(n) Z^i(n) <= 0, normalization sum_i Z^i(root) = 1.
// strict=true maximizes a uniform margin on the nondegenerate polar rows and
// the positivity rows Z^i(n) >= eps; strict=false requires sum_i Z^i(n) >=
// 1e-6 at every node and maximizes the positivity floor alone, which picks a
// canonical interior representative without changing feasibility (a nonzero
// polar member is strictly positive in every coordinate).
inline FindPriceResult find_price_process(const ScenarioTree& tree, const BidAskProcess& pi,
                                          bool strict,
                                          const Tolerances& tol = Tolerances::defaults()) {
  const int d = pi.d;
  const int nn = tree.size();
  LinearProgram lp;
  for (int k = 0; k < nn * d; ++k) lp.add_var(0.0, kInf, 0.0);
  auto zi = [d](int node, int i) { return node * d + i; };

  std::vector<int> margin_rows;

  for (int n = 0; n < nn; ++n) {
    const BidAskMatrix& m = pi.at(n);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        lp.add_row_sparse(RowSense::LE, 0.0, {{zi(n, j), 1.0}, {zi(n, i), -m(i, j)}});
        if (strict && !m.degenerate_pair(i, j)) margin_rows.push_back(lp.num_rows() - 1);
      }
    }
  }
  for (int n = 0; n < nn; ++n)
    for (int i = 0; i < d; ++i) {
      lp.add_row_sparse(RowSense::LE, 0.0, {{zi(n, i), -1.0}});
      margin_rows.push_back(lp.num_rows() - 1);
    }
  for (int n = 0; n < nn; ++n) {
    if (tree.is_leaf(n)) continue;
    for (int i = 0; i < d; ++i) {
      std::vector<std::pair<int, double>> entries;
      entries.emplace_back(zi(n, i), -1.0);
      for (int c : tree.node(n).children) entries.emplace_back(zi(c, i), tree.node(c).prob);
      lp.add_row_sparse(RowSense::EQ, 0.0, entries);
    }
  }
  {
    std::vector<std::pair<int, double>> entries;
    for (int i = 0; i < d; ++i) entries.emplace_back(zi(tree.root(), i), 1.0);
    lp.add_row_sparse(RowSense::EQ, 1.0, entries);
  }
  if (!strict) {
    for (int n = 0; n < nn; ++n) {
      std::vector<std::pair<int, double>> entries;
      for (int i = 0; i < d; ++i) entries.emplace_back(zi(n, i), 1.0);
      lp.add_row_sparse(RowSense::GE, 1e-6, entries);
    }
  }

  FindPriceResult out;
  MarginResult mr = feasibility_with_margin(lp, margin_rows, tol);
  out.outcome = mr.outcome;
  if (mr.status != LpStatus::Optimal) return out;
  out.margin = mr.epsilon;
  std::vector<double> point = mr.point;

  PriceProcess z;
  z.d = d;
  z.values.values.assign(static_cast<size_t>(nn), std::vector<double>(static_cast<size_t>(d), 0.0));
  for (int n = 0; n < nn; ++n)
    for (int i = 0; i < d; ++i) z.at(n)[static_cast<size_t>(i)] = std::max(point[static_cast<size_t>(zi(n, i))], 0.0);
  out.Z = std::move(z);
  return out;
}

struct NarResult {
  bool holds = false;
  double margin = -1.0;
  std::optional<PriceProcess> certificate;
};

inline NarResult check_nar(const ScenarioTree& tree, const BidAskProcess& pi,
                           const Tolerances& tol = Tolerances::defaults()) {
  FindPriceResult fp = find_price_process(tree, pi, /*strict=*/true, tol);
  NarResult out;
  out.margin = fp.margin;
  out.holds = fp.Z.has_value() && fp.margin > tol.strict_margin;
  if (out.holds) out.certificate = fp.Z;
  return out;
}

struct BudgetAssetRow {
  bool applicable = false;
  double expected = 0.0;  // E_{Q^i} X_T^i with dQ^i/dP = Z_T^i / Z_0^i
  double bound = 0.0;     // <Z_0, x> / Z_0^i
};

struct BudgetReport {
  double lhs = 0.0;       // E_P <Z_T, X_T>
  double rhs = 0.0;       // <Z_0, x>
  double residual = 0.0;  // lhs - rhs, expected <= 1e-7 for feasible plans
  std::vector<BudgetAssetRow> assets;
};

inline BudgetReport budget_bound(const PriceProcess& z, const std::vector<double>& x,
                                 const std::vector<std::vector<double>>& terminal,
                                 const ScenarioTree& tree) {
  const int d = z.d;
  BudgetReport rep;
  const std::vector<double>& z0 = z.at(tree.root());
  for (int i = 0; i < d; ++i) rep.rhs += z0[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];

  std::vector<double> asset_lhs(static_cast<size_t>(d), 0.0);
  for (int leaf : tree.leaves()) {
    double p = tree.node_probability(leaf);
    const auto& zt = z.at(leaf);
    const auto& xt = terminal[static_cast<size_t>(leaf)];
    for (int i = 0; i < d; ++i)
      asset_lhs[static_cast<size_t>(i)] += p * zt[static_cast<size_t>(i)] * xt[static_cast<size_t>(i)];
  }
  for (int i = 0; i < d; ++i) rep.lhs += asset_lhs[static_cast<size_t>(i)];
  rep.residual = rep.lhs - rep.rhs;

  rep.assets.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    BudgetAssetRow& row = rep.assets[static_cast<size_t>(i)];
    double zi = z0[static_cast<size_t>(i)];
    if (zi > 1e-12) {
      row.applicable = true;
      row.expected = asset_lhs[static_cast<size_t>(i)] / zi;
      row.bound = rep.rhs / zi;
    }
  }
  return rep;
}

// Replays a certificate and checks its invariants: X_T >= -1e-8 everywhere,
// some component >= 1e-6 at a positive-probability leaf, replay within 1e-8.
inline bool certificate_valid(const ArbitrageCertificate& cert, const ScenarioTree& tree,
                              const BidAskProcess& pi,
                              const Tolerances& tol = Tolerances::defaults()) {
  const int d = pi.d;
  std::vector<double> zero(static_cast<size_t>(d), 0.0);
  Realization r = realize(cert.plan, tree, pi, zero);
  bool some_positive = false;
  for (int leaf : tree.leaves()) {
    const auto& replayed = r.terminal[static_cast<size_t>(leaf)];
    const auto& stored = cert.terminal[static_cast<size_t>(leaf)];
    if (stored.size() != replayed.size()) return false;
    for (int i = 0; i < d; ++i) {
      double rv = replayed[static_cast<size_t>(i)];
      if (rv < -tol.lp_feasibility) return false;
      if (std::abs(rv - stored[static_cast<size_t>(i)]) > tol.lp_feasibility) return false;
      if (stored[static_cast<size_t>(i)] >= tol.membership && tree.node_probability(leaf) > 0.0)
        some_positive = true;
    }
  }
  return some_positive;
}

}  // namespace conemkt
