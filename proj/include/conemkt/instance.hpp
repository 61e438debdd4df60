#pragma once

// Instance bundles and seeded generators for the experiment harness. Each
// generator is deterministic in its arguments and emits a full bundle (tree,
// bid-ask process, endowment, utilities, experiment parameters).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "conemkt/market_cones.hpp"
#include "conemkt/random.hpp"
#include "conemkt/scenario_tree.hpp"
#include "conemkt/utility.hpp"

namespace conemkt {

struct InstanceBundle {
  ScenarioTree tree;
  BidAskProcess pi;
  std::vector<double> x;
  UtilitySpec spec;
  double theta = 0.5;
  std::vector<std::vector<double>> lambda_grid;
  std::uint64_t seed = 0;
  std::string kind = "free";
};

namespace detail {

inline UtilitySpec random_spec(Rng& rng, int d) {
  UtilitySpec spec;
  for (int i = 0; i < d; ++i) {
    const int fam = rng.uniform_int(0, 2);
    AssetUtility u;
    u.param = rng.uniform(0.5, 2.0);
    u.family = fam == 0   ? UtilityFamily::Exponential
               : fam == 1 ? UtilityFamily::Hyperbolic
                          : UtilityFamily::PowerAsymptote;
    spec.assets.push_back(u);
  }
  return spec;
}

inline std::vector<double> random_endowment(Rng& rng, int d) {
  std::vector<double> x(static_cast<size_t>(d));
  for (double& v : x) v = rng.uniform(0.5, 2.0);
  return x;
}

// Per-asset conditional expectation of leaf values at every node.
inline std::vector<std::vector<double>> martingale_from_leaves(
    const ScenarioTree& tree, const std::vector<std::vector<double>>& leaf_values, int d) {
  std::vector<std::vector<double>> z(static_cast<size_t>(tree.size()),
                                     std::vector<double>(static_cast<size_t>(d), 0.0));
  for (int i = 0; i < d; ++i) {
    std::vector<double> terminal(static_cast<size_t>(tree.size()), 0.0);
    for (int leaf : tree.leaves())
      terminal[static_cast<size_t>(leaf)] = leaf_values[static_cast<size_t>(leaf)][static_cast<size_t>(i)];
    std::vector<double> all = condexp_all(tree, terminal);
    for (int n = 0; n < tree.size(); ++n) z[static_cast<size_t>(n)][static_cast<size_t>(i)] = all[static_cast<size_t>(n)];
  }
  return z;
}

// Matrix around a strictly positive value vector with one spread factor per
// unordered pair applied to both directions; closure then cannot disturb the
// planted vector's strict membership (reversed paths shrink symmetrically).
inline BidAskMatrix matrix_around(const std::vector<double>& v,
                                  const std::vector<double>& pair_spread, int d) {
  BidAskMatrix m(d);
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j, ++k) {
      const double s = 1.0 + pair_spread[static_cast<size_t>(k)];
      m.at(i, j) = v[static_cast<size_t>(j)] / v[static_cast<size_t>(i)] * s;
      m.at(j, i) = v[static_cast<size_t>(i)] / v[static_cast<size_t>(j)] * s;
    }
  return triangle_closure(m);
}

inline BidAskMatrix frictionless_matrix(const std::vector<double>& v, int d) {
  BidAskMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) m.at(i, j) = v[static_cast<size_t>(j)] / v[static_cast<size_t>(i)];
  return m;
}

}  // namespace detail

// Strictly consistent by construction: i.i.d. leaf prices, interior values by
// conditional expectation, symmetric spreads per unordered pair. NA^r holds.
inline InstanceBundle generate_roundtrip_instance(std::uint64_t seed, int d, int horizon,
                                                  int branching) {
  if (d < 1) throw std::invalid_argument("generate_roundtrip_instance: d must be >= 1");
  Rng rng(seed ^ 0x5eedf00du);
  ScenarioTree tree = generate_random_tree(seed, branching, horizon);

  std::vector<std::vector<double>> leaf_values(static_cast<size_t>(tree.size()));
  for (int leaf : tree.leaves()) {
    std::vector<double> v(static_cast<size_t>(d));
    for (double& c : v) c = rng.uniform(0.7, 1.4);
    leaf_values[static_cast<size_t>(leaf)] = std::move(v);
  }
  std::vector<std::vector<double>> z = detail::martingale_from_leaves(tree, leaf_values, d);

  BidAskProcess pi;
  pi.d = d;
  pi.matrices = AdaptedProcess<BidAskMatrix>(tree.size(), BidAskMatrix(d));
  const int pairs = d * (d - 1) / 2;
  for (int n = 0; n < tree.size(); ++n) {
    std::vector<double> spread(static_cast<size_t>(pairs));
    for (double& s : spread) s = rng.uniform(0.05, 0.5);
    pi.at(n) = detail::matrix_around(z[static_cast<size_t>(n)], spread, d);
  }

  InstanceBundle b{std::move(tree), std::move(pi), detail::random_endowment(rng, d),
                   detail::random_spec(rng, d)};
  b.lambda_grid = weight_grid(d, 5);
  b.seed = seed;
  b.kind = "roundtrip";
  return b;
}

// Frictionless matrices around price vectors where asset 2 rises strictly on
// every branch: buy-and-hold from zero endowment is an arbitrage, NA fails.
inline InstanceBundle generate_arbitrage_instance(std::uint64_t seed, int d, int horizon,
                                                  int branching) {
  if (d < 2) d = 2;
  Rng rng(seed ^ 0xa2b17a9eu);
  ScenarioTree tree = generate_random_tree(seed, branching, horizon);

  std::vector<std::vector<double>> s(static_cast<size_t>(tree.size()),
                                     std::vector<double>(static_cast<size_t>(d), 1.0));
  // root prices
  for (int i = 2; i < d; ++i) s[static_cast<size_t>(tree.root())][static_cast<size_t>(i)] = rng.uniform(0.7, 1.4);
  // walk down: asset 1 is the unit, asset 2 rises, the rest wander
  struct Walk {
    const ScenarioTree& tree;
    std::vector<std::vector<double>>& s;
    Rng& rng;
    int d;
    void run(int n) {
      for (int c : tree.node(n).children) {
        s[static_cast<size_t>(c)] = s[static_cast<size_t>(n)];
        s[static_cast<size_t>(c)][1] *= rng.uniform(1.15, 1.35);
        for (int i = 2; i < d; ++i) s[static_cast<size_t>(c)][static_cast<size_t>(i)] *= rng.uniform(0.8, 1.25);
        run(c);
      }
    }
  } walk{tree, s, rng, d};
  walk.run(tree.root());

  BidAskProcess pi;
  pi.d = d;
  pi.matrices = AdaptedProcess<BidAskMatrix>(tree.size(), BidAskMatrix(d));
  for (int n = 0; n < tree.size(); ++n)
    pi.at(n) = detail::frictionless_matrix(s[static_cast<size_t>(n)], d);

  InstanceBundle b{std::move(tree), std::move(pi), detail::random_endowment(rng, d),
                   detail::random_spec(rng, d)};
  b.lambda_grid = weight_grid(d, 5);
  b.seed = seed;
  b.kind = "arbitrage";
  return b;
}

// Frictionless everywhere at one value vector except the root, where every
// rate out of asset 2 is widened by 1/r. Any consistent process is pinned to
// the (k,2) ask faces at the root: NA holds, NA^r fails.
inline InstanceBundle generate_boundary_instance(std::uint64_t seed, int d, int horizon,
                                                 int branching) {
  if (d < 2) d = 2;
  Rng rng(seed ^ 0xb0a7d00du);
  ScenarioTree tree = generate_random_tree(seed, branching, horizon);

  std::vector<double> v(static_cast<size_t>(d), 1.0);
  v[1] = rng.uniform(0.8, 1.6);
  for (int i = 2; i < d; ++i) v[static_cast<size_t>(i)] = rng.uniform(0.8, 1.6);
  const double r = rng.uniform(0.4, 0.8);

  BidAskMatrix inner = detail::frictionless_matrix(v, d);
  BidAskMatrix root_mat = inner;
  for (int k = 0; k < d; ++k)
    if (k != 1) root_mat.at(1, k) = inner.at(1, k) / r;

  BidAskProcess pi;
  pi.d = d;
  pi.matrices = AdaptedProcess<BidAskMatrix>(tree.size(), inner);
  pi.at(tree.root()) = root_mat;

  InstanceBundle b{std::move(tree), std::move(pi), detail::random_endowment(rng, d),
                   detail::random_spec(rng, d)};
  b.lambda_grid = weight_grid(d, 5);
  b.seed = seed;
  b.kind = "boundary";
  return b;
}

// Independent planted value vectors per node (no cross-node consistency):
// arbitrage status unconstrained, useful for mutual-exclusion sampling.
inline InstanceBundle generate_free_instance(std::uint64_t seed, int d, int horizon,
                                             int branching) {
  if (d < 1) throw std::invalid_argument("generate_free_instance: d must be >= 1");
  Rng rng(seed ^ 0xf4ee0123u);
  ScenarioTree tree = generate_random_tree(seed, branching, horizon);

  BidAskProcess pi;
  pi.d = d;
  pi.matrices = AdaptedProcess<BidAskMatrix>(tree.size(), BidAskMatrix(d));
  for (int n = 0; n < tree.size(); ++n) {
    std::vector<double> v(static_cast<size_t>(d));
    for (double& c : v) c = rng.uniform(0.5, 2.0);
    BidAskMatrix m(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j)
          m.at(i, j) = v[static_cast<size_t>(j)] / v[static_cast<size_t>(i)] *
                       (1.0 + rng.uniform(0.05, 0.5));
    pi.at(n) = triangle_closure(m);
  }

  InstanceBundle b{std::move(tree), std::move(pi), detail::random_endowment(rng, d),
                   detail::random_spec(rng, d)};
  b.lambda_grid = weight_grid(d, 5);
  b.seed = seed;
  b.kind = "free";
  return b;
}

inline InstanceBundle generate_instance(const std::string& kind, std::uint64_t seed, int d,
                                        int horizon, int branching) {
  if (kind == "roundtrip") return generate_roundtrip_instance(seed, d, horizon, branching);
  if (kind == "arbitrage") return generate_arbitrage_instance(seed, d, horizon, branching);
  if (kind == "boundary") return generate_boundary_instance(seed, d, horizon, branching);
  if (kind == "free") return generate_free_instance(seed, d, horizon, branching);
  throw std::invalid_argument("unknown instance kind: " + kind);
}

}  // namespace conemkt
