#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "conemkt/arbitrage.hpp"
#include "conemkt/market_cones.hpp"
#include "conemkt/scenario_tree.hpp"
#include "conemkt/tolerances.hpp"
#include "conemkt/utility.hpp"

namespace conemkt {

enum class ConsistencyVerdict { Failed, Consistent, StrictlyConsistent };

inline const char* to_string(ConsistencyVerdict v) {
  switch (v) {
    case ConsistencyVerdict::StrictlyConsistent:
      return "strictly consistent";
    case ConsistencyVerdict::Consistent:
      return "consistent";
    default:
      return "failed";
  }
}

// Per-node verification record for a candidate price process. Residual and
// slack tables are node-indexed; leaves carry a zero martingale residual.
struct ConsistencyReport {
  std::vector<double> martingale_residual;
  std::vector<double> polar_slack;    // <= 0 means inside the node's polar cone
  std::vector<double> strict_margin;  // filled only when strict checks ran
  bool strict_checked = false;

  double max_martingale_residual = 0.0;
  double max_polar_slack = -std::numeric_limits<double>::infinity();
  double min_strict_margin = std::numeric_limits<double>::infinity();

  bool floor_checked = false;
  bool floor_met = false;        // terminal wealth >= delta at every leaf
  std::vector<int> zero_assets;  // coordinates of Z that vanish at every node

  ConsistencyVerdict verdict = ConsistencyVerdict::Failed;
  std::vector<std::string> failures;

  bool consistent() const { return verdict != ConsistencyVerdict::Failed; }
  bool strictly_consistent() const { return verdict == ConsistencyVerdict::StrictlyConsistent; }
};

// Z_t^i = lambda_raw^i E[ (U^i)'(X_T^i) | F_t ], a martingale per asset by
// construction. Terminal wealth is read from solution.terminal at the leaves;
// entries at zero use the finite right derivative U'(0+).
inline PriceProcess price_from_maximizer(const ScenarioTree& tree, const UtilitySpec& spec,
                                         const ParetoSolution& solution) {
  const int d = spec.dim();
  if (static_cast<int>(solution.lambda_raw.size()) != d)
    throw std::invalid_argument("price_from_maximizer: weight dimension mismatch");
  if (static_cast<int>(solution.terminal.size()) != tree.size())
    throw std::invalid_argument("price_from_maximizer: terminal not node-indexed");
  double top = 0.0;
  for (double l : solution.lambda_raw) {
    if (l < 0.0)
      throw std::invalid_argument("price_from_maximizer: negative weight component");
    top = std::max(top, l);
  }
  if (top <= 0.0) throw std::invalid_argument("price_from_maximizer: all weights zero");

  PriceProcess z;
  z.d = d;
  z.values = AdaptedProcess<std::vector<double>>(tree.size(), std::vector<double>(static_cast<size_t>(d), 0.0));
  for (int i = 0; i < d; ++i) {
    std::vector<double> leaf_value(static_cast<size_t>(tree.size()), 0.0);
    for (int leaf : tree.leaves()) {
      const std::vector<double>& xt = solution.terminal[static_cast<size_t>(leaf)];
      if (static_cast<int>(xt.size()) != d)
        throw std::invalid_argument("price_from_maximizer: terminal entry dimension mismatch");
      leaf_value[static_cast<size_t>(leaf)] =
          solution.lambda_raw[static_cast<size_t>(i)] *
          eval_utility(spec, i, xt[static_cast<size_t>(i)]).derivative;
    }
    const std::vector<double> zi = condexp_all(tree, leaf_value);
    for (int n = 0; n < tree.size(); ++n) z.at(n)[static_cast<size_t>(i)] = zi[static_cast<size_t>(n)];
  }
  return z;
}

// Checks a candidate Z against the market: per-node polar membership, the
// martingale property, optional strict margins, and (when terminal wealth and
// a floor are supplied) the X_T >= delta precondition. Report-valued: shape
// mismatches throw, everything else lands in the verdict and failure list.
// The floor result is informational and never changes the verdict.
inline ConsistencyReport verify_consistency(const PriceProcess& z, const ScenarioTree& tree,
                                            const BidAskProcess& pi,
                                            const std::vector<double>* delta_floor = nullptr,
                                            const std::vector<std::vector<double>>* terminal = nullptr,
                                            bool strict = false,
                                            const Tolerances& tol = Tolerances::defaults()) {
  const int d = pi.d;
  if (z.d != d) throw std::invalid_argument("verify_consistency: asset dimension mismatch");
  if (z.values.size() != tree.size())
    throw std::invalid_argument("verify_consistency: process not node-indexed");
  for (int n = 0; n < tree.size(); ++n)
    if (static_cast<int>(z.at(n).size()) != d)
      throw std::invalid_argument("verify_consistency: entry dimension mismatch");

  ConsistencyReport rep;
  rep.martingale_residual.assign(static_cast<size_t>(tree.size()), 0.0);
  rep.polar_slack.assign(static_cast<size_t>(tree.size()), 0.0);
  rep.strict_checked = strict;
  if (strict) rep.strict_margin.assign(static_cast<size_t>(tree.size()), 0.0);

  bool ok = true;
  for (int i = 0; i < d; ++i) {
    double mag = 0.0;
    for (int n = 0; n < tree.size(); ++n) mag = std::max(mag, std::abs(z.at(n)[static_cast<size_t>(i)]));
    if (mag == 0.0) rep.zero_assets.push_back(i);
  }

  for (int n = 0; n < tree.size(); ++n) {
    const std::vector<double>& w = z.at(n);
    const BidAskMatrix& mat = pi.at(n);

    double peak = 0.0;
    for (double c : w) peak = std::max(peak, c);
    if (peak <= 0.0) {
      ok = false;
      rep.failures.push_back("zero price vector at node " + tree.node(n).id);
    }

    double slack = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) slack = std::max(slack, -w[static_cast<size_t>(i)]);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        slack = std::max(slack, w[static_cast<size_t>(j)] - mat(i, j) * w[static_cast<size_t>(i)]);
      }
    rep.polar_slack[static_cast<size_t>(n)] = slack;
    rep.max_polar_slack = std::max(rep.max_polar_slack, slack);
    if (slack > tol.membership) {
      ok = false;
      rep.failures.push_back("polar membership fails at node " + tree.node(n).id +
                             " (slack " + std::to_string(slack) + ")");
    }

    if (!tree.is_leaf(n)) {
      double res = 0.0;
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int c : tree.node(n).children)
          s += tree.node(c).prob * z.at(c)[static_cast<size_t>(i)];
        res = std::max(res, std::abs(s - w[static_cast<size_t>(i)]));
      }
      rep.martingale_residual[static_cast<size_t>(n)] = res;
      rep.max_martingale_residual = std::max(rep.max_martingale_residual, res);
      if (res > tol.membership) {
        ok = false;
        rep.failures.push_back("martingale residual " + std::to_string(res) + " at node " +
                               tree.node(n).id);
      }
    }

    if (strict) {
      // mirrors strict_polar_membership: floor on every component, relative
      // slack on pairs with genuine friction, forced equality otherwise
      double margin = std::numeric_limits<double>::infinity();
      for (int i = 0; i < d; ++i) margin = std::min(margin, w[static_cast<size_t>(i)]);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          if (i == j) continue;
          const double wi = w[static_cast<size_t>(i)];
          const double wj = w[static_cast<size_t>(j)];
          if (mat(i, j) * mat(j, i) > 1.0 + 1e-10) {
            if (wi > 0.0) margin = std::min(margin, (mat(i, j) * wi - wj) / wi);
          } else {
            const double viol = std::abs(wj - mat(i, j) * wi) - 1e-10 * std::max(wi, wj);
            if (viol > 0.0) margin = std::min(margin, -viol);
          }
        }
      rep.strict_margin[static_cast<size_t>(n)] = margin;
      rep.min_strict_margin = std::min(rep.min_strict_margin, margin);
    }
  }

  if (terminal != nullptr && delta_floor != nullptr) {
    if (static_cast<int>(delta_floor->size()) != d)
      throw std::invalid_argument("verify_consistency: floor dimension mismatch");
    rep.floor_checked = true;
    rep.floor_met = true;
    for (int leaf : tree.leaves()) {
      const std::vector<double>& xt = (*terminal)[static_cast<size_t>(leaf)];
      if (static_cast<int>(xt.size()) != d)
        throw std::invalid_argument("verify_consistency: terminal entry dimension mismatch");
      for (int i = 0; i < d; ++i)
        if (xt[static_cast<size_t>(i)] < (*delta_floor)[static_cast<size_t>(i)]) {
          rep.floor_met = false;
          rep.failures.push_back("terminal floor unmet at leaf " + tree.node(leaf).id +
                                 " asset " + std::to_string(i));
        }
    }
  }

  if (!ok) {
    rep.verdict = ConsistencyVerdict::Failed;
  } else if (strict && rep.min_strict_margin > tol.strict_margin) {
    rep.verdict = ConsistencyVerdict::StrictlyConsistent;
  } else {
    rep.verdict = ConsistencyVerdict::Consistent;
    if (strict)
      rep.failures.push_back("strict margin " + std::to_string(rep.min_strict_margin) +
                             " below threshold");
  }
  return rep;
}

struct StrictPipeline {
  NarResult nar;
  BidAskProcess shrunk;
  ParetoSolution solution;
  PriceProcess z;
  ConsistencyReport report;
};

// Shrink spreads by theta, maximize under the tighter market, price the
// maximizer, then verify against the ORIGINAL market with strict checks.
// Consistency for the inner market forces strict consistency for the outer
// one. A failed terminal floor is surfaced in the report, not suppressed;
// a failed robust no-arbitrage gate refuses up front.
inline StrictPipeline strict_pipeline(const ScenarioTree& tree, const BidAskProcess& pi,
                                      double theta, const std::vector<double>& x,
                                      const UtilitySpec& spec, const std::vector<double>& lambda,
                                      const std::vector<double>& delta_floor,
                                      const Tolerances& tol = Tolerances::defaults()) {
  if (!(theta > 0.0) || !(theta < 1.0))
    throw std::invalid_argument("strict_pipeline: theta must lie in (0,1)");
  StrictPipeline out;
  out.nar = check_nar(tree, pi, tol);
  if (!out.nar.holds)
    throw std::runtime_error("strict_pipeline: robust no-arbitrage fails for this market");
  out.shrunk = shrink_spreads(pi, theta);
  out.solution = solve_scalarized(tree, out.shrunk, x, spec, lambda, tol.fw_gap, tol);
  out.z = price_from_maximizer(tree, spec, out.solution);
  out.report =
      verify_consistency(out.z, tree, pi, &delta_floor, &out.solution.terminal, true, tol);
  if (!out.solution.converged)
    out.report.failures.push_back("scalarized solve gap " + std::to_string(out.solution.gap) +
                                  " above tolerance");
  return out;
}

}  // namespace conemkt
