#pragma once

// Self-financing transfer plans over a scenario tree and the LP skeleton
// for attainability problems: variables are per-node exchange amounts and
// disposals, rows keep every terminal position nonnegative.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "conemkt/lp_core.hpp"
#include "conemkt/market_cones.hpp"
#include "conemkt/scenario_tree.hpp"
#include "conemkt/tolerances.hpp"

namespace conemkt {

// Flat layout of plan variables: for each node, first the d*(d-1) transfer
// amounts a^{ij} in lexicographic (i,j) order skipping i==j, then the d
// disposal amounts. Node blocks follow the tree's node indexing.
struct PlanIndexer {
  int d = 0;
  int nodes = 0;

  PlanIndexer() = default;
  PlanIndexer(int d_, int nodes_) : d(d_), nodes(nodes_) {
    if (d < 1 || nodes < 1) throw std::invalid_argument("PlanIndexer: d and nodes must be positive");
  }

  int per_node() const { return d * (d - 1) + d; }
  int total() const { return nodes * per_node(); }

  int transfer_index(int node, int i, int j) const {
    if (i == j) throw std::invalid_argument("transfer_index: i == j");
    int off = i * (d - 1) + (j < i ? j : j - 1);
    return node * per_node() + off;
  }

  int disposal_index(int node, int i) const {
    return node * per_node() + d * (d - 1) + i;
  }

  // Inverse map: which (node, kind, i, j) a flat variable index denotes.
  struct VarInfo {
    int node = 0;
    bool is_transfer = false;
    int i = 0;
    int j = 0;  // valid only for transfers
  };

  VarInfo describe(int var) const {
    VarInfo info;
    info.node = var / per_node();
    int off = var % per_node();
    if (off < d * (d - 1)) {
      info.is_transfer = true;
      info.i = off / (d - 1);
      int r = off % (d - 1);
      info.j = r < info.i ? r : r + 1;
    } else {
      info.is_transfer = false;
      info.i = off - d * (d - 1);
    }
    return info;
  }
};

// A transfer plan: a^{ij}(n) >= 0 units of asset j acquired at node n by
// paying pi^{ij}(n) units of asset i, plus free disposals dsp^i(n) >= 0.
struct TransferPlan {
  PlanIndexer layout;
  std::vector<double> flat;

  TransferPlan() = default;
  TransferPlan(int d, int nodes) : layout(d, nodes), flat(static_cast<size_t>(layout.total()), 0.0) {}

  static TransferPlan zeros(int d, int nodes) { return TransferPlan(d, nodes); }

  double& transfer(int node, int i, int j) { return flat[static_cast<size_t>(layout.transfer_index(node, i, j))]; }
  double transfer(int node, int i, int j) const { return flat[static_cast<size_t>(layout.transfer_index(node, i, j))]; }
  double& disposal(int node, int i) { return flat[static_cast<size_t>(layout.disposal_index(node, i))]; }
  double disposal(int node, int i) const { return flat[static_cast<size_t>(layout.disposal_index(node, i))]; }
};

// Adapted portfolio process v_t(n) in R^d plus the terminal map at leaves.
struct Realization {
  AdaptedProcess<std::vector<double>> portfolio;
  // terminal[node] meaningful at leaves only; sized over all nodes for direct indexing.
  std::vector<std::vector<double>> terminal;
};

namespace detail {

inline std::vector<double> node_increment(const TransferPlan& plan, const BidAskProcess& pi, int node) {
  const int d = plan.layout.d;
  std::vector<double> inc(static_cast<size_t>(d), 0.0);
  const BidAskMatrix& m = pi.at(node);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      double a = plan.transfer(node, i, j);
      if (a == 0.0) continue;
      inc[static_cast<size_t>(i)] -= m(i, j) * a;
      inc[static_cast<size_t>(j)] += a;
    }
    inc[static_cast<size_t>(i)] -= plan.disposal(node, i);
  }
  return inc;
}

}  // namespace detail

// v at node n = x + sum over ancestors-and-self m of increment(m); trading
// happens at every node including the root.
inline Realization realize(const TransferPlan& plan, const ScenarioTree& tree,
                           const BidAskProcess& pi, const std::vector<double>& x) {
  const int d = plan.layout.d;
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("realize: endowment dimension mismatch");
  if (plan.layout.nodes != tree.size()) throw std::invalid_argument("realize: plan/tree size mismatch");
  Realization out;
  out.portfolio.values.assign(static_cast<size_t>(tree.size()), {});
  out.terminal.assign(static_cast<size_t>(tree.size()), {});

  struct Rec {
    const TransferPlan& plan;
    const ScenarioTree& tree;
    const BidAskProcess& pi;
    Realization& out;
    void run(int node, std::vector<double> carried) const {
      std::vector<double> inc = detail::node_increment(plan, pi, node);
      for (size_t k = 0; k < carried.size(); ++k) carried[k] += inc[k];
      out.portfolio.values[static_cast<size_t>(node)] = carried;
      if (tree.is_leaf(node)) {
        out.terminal[static_cast<size_t>(node)] = carried;
      } else {
        for (int c : tree.node(node).children) run(c, carried);
      }
    }
  };
  Rec{plan, tree, pi, out}.run(tree.root(), x);
  return out;
}

// Whether delta lies in -K(pi): feasibility of
//   delta_i = sum_j a^{ji} - sum_j pi^{ij} a^{ij} - dsp_i, all vars >= 0.
inline bool increment_in_cone(const std::vector<double>& delta, const BidAskMatrix& pi,
                              const Tolerances& tol = Tolerances::defaults()) {
  const int d = pi.dim();
  if (static_cast<int>(delta.size()) != d) throw std::invalid_argument("increment_in_cone: dimension mismatch");
  LinearProgram lp;
  PlanIndexer layout(d, 1);
  for (int v = 0; v < layout.total(); ++v) lp.add_var(0.0, kInf, 0.0);
  for (int i = 0; i < d; ++i) {
    std::vector<std::pair<int, double>> entries;
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      entries.emplace_back(layout.transfer_index(0, j, i), 1.0);
      entries.emplace_back(layout.transfer_index(0, i, j), -pi(i, j));
    }
    entries.emplace_back(layout.disposal_index(0, i), -1.0);
    lp.add_row_sparse(RowSense::EQ, delta[static_cast<size_t>(i)], entries);
  }
  LpOutcome res = solve_lp(lp, tol);
  return res.status == LpStatus::Optimal;
}

// LP skeleton over plan variables with rows keeping X_T >= 0 at every leaf.
// Rows are stored as  -(linear part of X_T^i(leaf)) <= x_i  so the all-slack
// basis is feasible at the zero plan.
struct ConstraintSkeleton {
  LinearProgram lp;
  PlanIndexer layout;
  std::vector<double> endowment;
  double box_bound = 0.0;
  // row r corresponds to terminal nonnegativity of asset row_meta[r].second at leaf row_meta[r].first
  std::vector<std::pair<int, int>> row_meta;
};

inline double plan_box_bound(const ScenarioTree& tree, const BidAskProcess& pi,
                             const std::vector<double>& x) {
  double sx = 0.0;
  for (double xi : x) sx += xi;
  double base = std::max(sx, 1.0);
  double scale = std::pow(std::max(pi.max_entry(), 1.0), tree.horizon() + 1);
  return base * scale * static_cast<double>(pi.d);
}

inline ConstraintSkeleton assemble_constraints(const ScenarioTree& tree, const BidAskProcess& pi,
                                               const std::vector<double>& x) {
  const int d = pi.d;
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("assemble_constraints: endowment dimension mismatch");
  for (double xi : x)
    if (xi < 0.0) throw std::invalid_argument("assemble_constraints: endowment must be nonnegative");

  ConstraintSkeleton sk;
  sk.layout = PlanIndexer(d, tree.size());
  sk.endowment = x;
  sk.box_bound = plan_box_bound(tree, pi, x);

  for (int v = 0; v < sk.layout.total(); ++v) sk.lp.add_var(0.0, sk.box_bound, 0.0);

  // Path from root to each leaf, reused across the leaf's asset rows.
  for (int leaf : tree.leaves()) {
    std::vector<int> path;
    for (int n = leaf; n >= 0; n = tree.node(n).parent) path.push_back(n);
    for (int i = 0; i < d; ++i) {
      std::vector<std::pair<int, double>> entries;
      for (int m : path) {
        const BidAskMatrix& mat = pi.at(m);
        for (int j = 0; j < d; ++j) {
          if (i == j) continue;
          // X^i gains a^{ji} and pays pi^{ij} a^{ij}; row stores the negation.
          entries.emplace_back(sk.layout.transfer_index(m, j, i), -1.0);
          entries.emplace_back(sk.layout.transfer_index(m, i, j), mat(i, j));
        }
        entries.emplace_back(sk.layout.disposal_index(m, i), 1.0);
      }
      sk.lp.add_row_sparse(RowSense::LE, x[static_cast<size_t>(i)], entries);
      sk.row_meta.emplace_back(leaf, i);
    }
  }
  return sk;
}

// Linear objective over plan variables representing
//   sum_{leaves l} sum_i w[l][i] * X_T^i(l)
// (dropping the constant sum_{l,i} w[l][i] x_i). Uses the bottom-up
// accumulation S_i(m) = sum of w over leaves below-or-at m.
inline std::vector<double> plan_objective_from_leaf_weights(const ScenarioTree& tree,
                                                            const BidAskProcess& pi,
                                                            const PlanIndexer& layout,
                                                            const std::vector<std::vector<double>>& w) {
  const int d = layout.d;
  std::vector<std::vector<double>> acc(static_cast<size_t>(tree.size()),
                                       std::vector<double>(static_cast<size_t>(d), 0.0));
  struct Rec {
    const ScenarioTree& tree;
    const std::vector<std::vector<double>>& w;
    std::vector<std::vector<double>>& acc;
    int d;
    void run(int node) const {
      auto& a = acc[static_cast<size_t>(node)];
      if (tree.is_leaf(node)) {
        const auto& wl = w[static_cast<size_t>(node)];
        for (int i = 0; i < d; ++i) a[static_cast<size_t>(i)] = wl[static_cast<size_t>(i)];
        return;
      }
      for (int c : tree.node(node).children) {
        run(c);
        const auto& ac = acc[static_cast<size_t>(c)];
        for (int i = 0; i < d; ++i) a[static_cast<size_t>(i)] += ac[static_cast<size_t>(i)];
      }
    }
  };
  Rec{tree, w, acc, d}.run(tree.root());

  std::vector<double> obj(static_cast<size_t>(layout.total()), 0.0);
  for (int n = 0; n < tree.size(); ++n) {
    const auto& s = acc[static_cast<size_t>(n)];
    const BidAskMatrix& mat = pi.at(n);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        obj[static_cast<size_t>(layout.transfer_index(n, i, j))] =
            -mat(i, j) * s[static_cast<size_t>(i)] + s[static_cast<size_t>(j)];
      }
      obj[static_cast<size_t>(layout.disposal_index(n, i))] = -s[static_cast<size_t>(i)];
    }
  }
  return obj;
}

inline TransferPlan plan_from_flat(const PlanIndexer& layout, const std::vector<double>& flat) {
  TransferPlan p(layout.d, layout.nodes);
  if (flat.size() != p.flat.size()) throw std::invalid_argument("plan_from_flat: size mismatch");
  p.flat = flat;
  return p;
}

}  // namespace conemkt
