#pragma once

// Shared instance builders for the test suite.

#include <vector>

#include "conemkt/market_cones.hpp"
#include "conemkt/random.hpp"
#include "conemkt/scenario_tree.hpp"

namespace fixtures {

inline conemkt::ScenarioTree two_leaf_tree(double pu = 0.5, double pd = 0.5) {
  return conemkt::ScenarioTree::build(1, {{"root", 0, "", 1.0},
                                          {"u", 1, "root", pu},
                                          {"d", 1, "root", pd}});
}

inline conemkt::ScenarioTree path_tree(int horizon) {
  std::vector<conemkt::NodeSpec> specs{{"n0", 0, "", 1.0}};
  for (int t = 1; t <= horizon; ++t)
    specs.push_back({"n" + std::to_string(t), t, "n" + std::to_string(t - 1), 1.0});
  return conemkt::ScenarioTree::build(horizon, specs);
}

// Frictionless bid-ask process from per-node price vectors: pi(i,j) = S_j/S_i.
inline conemkt::BidAskProcess frictionless_from_prices(
    const conemkt::ScenarioTree& tree, const std::vector<std::vector<double>>& prices) {
  const int d = static_cast<int>(prices.at(0).size());
  conemkt::BidAskProcess out;
  out.d = d;
  out.matrices = conemkt::AdaptedProcess<conemkt::BidAskMatrix>(tree.size());
  for (int n = 0; n < tree.size(); ++n) {
    conemkt::BidAskMatrix m(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j) m.at(i, j) = prices[n][j] / prices[n][i];
    out.matrices[n] = m;
  }
  return out;
}

// Price process with proportional spreads: pi(i,j) = (S_j/S_i) * (1 + s),
// one s for the whole process. s = 0 reduces to the frictionless case.
inline conemkt::BidAskProcess spread_from_prices(const conemkt::ScenarioTree& tree,
                                                 const std::vector<std::vector<double>>& prices,
                                                 double s) {
  const int d = static_cast<int>(prices.at(0).size());
  conemkt::BidAskProcess out;
  out.d = d;
  out.matrices = conemkt::AdaptedProcess<conemkt::BidAskMatrix>(tree.size());
  for (int n = 0; n < tree.size(); ++n) {
    conemkt::BidAskMatrix m(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j) m.at(i, j) = prices[n][j] / prices[n][i] * (1.0 + s);
    out.matrices[n] = m;
  }
  return out;
}

// The classic two-point example: S_0 = (1,1), S_1 in {(1,up),(1,down)}.
inline conemkt::BidAskProcess two_point_market(const conemkt::ScenarioTree& tree, double up,
                                               double down, double spread = 0.0) {
  return spread_from_prices(tree, {{1.0, 1.0}, {1.0, up}, {1.0, down}}, spread);
}

// Random valid bid-ask matrix: plant a positive value vector, add spreads per
// ordered pair, close; strictly positive spreads keep every pair nondegenerate.
inline conemkt::BidAskMatrix random_matrix(conemkt::Rng& rng, int d, double s_lo = 0.05,
                                           double s_hi = 0.5) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.uniform(0.5, 2.0);
  conemkt::BidAskMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) m.at(i, j) = v[j] / v[i] * (1.0 + rng.uniform(s_lo, s_hi));
  return conemkt::triangle_closure(m);
}

// The planted value vector and a matrix built around it (for strict tests).
struct PlantedMatrix {
  conemkt::BidAskMatrix pi;
  std::vector<double> value;
};

inline PlantedMatrix random_planted_matrix(conemkt::Rng& rng, int d, double s_lo = 0.05,
                                           double s_hi = 0.5) {
  PlantedMatrix out;
  out.value.resize(d);
  for (double& x : out.value) x = rng.uniform(0.5, 2.0);
  conemkt::BidAskMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) m.at(i, j) = out.value[j] / out.value[i] * (1.0 + rng.uniform(s_lo, s_hi));
  out.pi = conemkt::triangle_closure(m);
  return out;
}

}  // namespace fixtures
