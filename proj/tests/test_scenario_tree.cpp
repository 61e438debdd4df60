#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "conemkt/scenario_tree.hpp"
#include "support/fixtures.hpp"

using namespace conemkt;
using Catch::Approx;

TEST_CASE("two-leaf tree validates") {
  ScenarioTree t = fixtures::two_leaf_tree();
  ValidationReport r = validate_tree(t);
  REQUIRE(r.ok);
  REQUIRE(t.horizon() == 1);
  REQUIRE(t.size() == 3);
  REQUIRE(t.leaves().size() == 2);
}

TEST_CASE("probability mass must sum to one") {
  ScenarioTree t = fixtures::two_leaf_tree(0.7, 0.2);
  ValidationReport r = validate_tree(t);
  REQUIRE_FALSE(r.ok);
  REQUIRE(r.violations.size() == 1);
  REQUIRE(r.violations[0].where == "root");
  REQUIRE(r.violations[0].rule.find("0.9") != std::string::npos);
}

TEST_CASE("time gaps are flagged") {
  ScenarioTree t = ScenarioTree::build(2, {{"root", 0, "", 1.0}, {"a", 2, "root", 1.0}});
  ValidationReport r = validate_tree(t);
  REQUIRE_FALSE(r.ok);
  bool found = false;
  for (const auto& v : r.violations)
    if (v.rule.find("time gap") != std::string::npos) found = true;
  REQUIRE(found);
}

TEST_CASE("nonpositive transition probabilities are flagged") {
  ScenarioTree t = fixtures::two_leaf_tree(1.0, 0.0);
  ValidationReport r = validate_tree(t);
  REQUIRE_FALSE(r.ok);
}

TEST_CASE("node probabilities multiply along paths") {
  ScenarioTree t = ScenarioTree::build(2, {{"r", 0, "", 1.0},
                                           {"u", 1, "r", 0.5},
                                           {"d", 1, "r", 0.5},
                                           {"uu", 2, "u", 0.5},
                                           {"ud", 2, "u", 0.5},
                                           {"du", 2, "d", 0.5},
                                           {"dd", 2, "d", 0.5}});
  REQUIRE(validate_tree(t).ok);
  REQUIRE(t.node_probability(t.root()) == 1.0);
  REQUIRE(t.node_probability(t.node_index("uu")) == Approx(0.25));
  double mass = 0.0;
  for (int leaf : t.leaves()) mass += t.node_probability(leaf);
  REQUIRE(mass == Approx(1.0).margin(1e-12));
}

TEST_CASE("conditional expectation matches hand computation") {
  ScenarioTree t = fixtures::two_leaf_tree();
  std::vector<double> terminal{0.0, 2.0, 4.0};
  auto at0 = conditional_expectation(t, terminal, 0);
  REQUIRE(at0.size() == 1);
  REQUIRE(at0[0] == Approx(3.0));
  auto at1 = conditional_expectation(t, terminal, 1);
  REQUIRE(at1 == std::vector<double>{2.0, 4.0});
}

TEST_CASE("constant terminal has constant expectation") {
  ScenarioTree t = ScenarioTree::build(1, {{"r", 0, "", 1.0},
                                           {"a", 1, "r", 0.2},
                                           {"b", 1, "r", 0.3},
                                           {"c", 1, "r", 0.5}});
  REQUIRE(validate_tree(t).ok);
  std::vector<double> terminal(static_cast<size_t>(t.size()), 1.0);
  REQUIRE(conditional_expectation(t, terminal, 0)[0] == Approx(1.0));
}

TEST_CASE("tower property is exact by construction") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    ScenarioTree t = generate_random_tree(seed, 2 + static_cast<int>(seed % 2), 2 + static_cast<int>(seed % 2));
    Rng rng(seed + 1000);
    std::vector<double> terminal(static_cast<size_t>(t.size()), 0.0);
    for (int leaf : t.leaves()) terminal[static_cast<size_t>(leaf)] = rng.uniform(-3.0, 3.0);
    std::vector<double> all = condexp_all(t, terminal);
    for (int n = 0; n < t.size(); ++n) {
      if (t.is_leaf(n)) continue;
      double s = 0.0;
      for (int c : t.node(n).children) s += t.node(c).prob * all[static_cast<size_t>(c)];
      REQUIRE(all[static_cast<size_t>(n)] == s);  // identical summation order: bit-exact
    }
  }
}

TEST_CASE("generated trees validate and are deterministic") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ScenarioTree a = generate_random_tree(seed, 3, 3);
    ScenarioTree b = generate_random_tree(seed, 3, 3);
    REQUIRE(validate_tree(a).ok);
    REQUIRE(a.size() == b.size());
    for (int n = 0; n < a.size(); ++n) {
      REQUIRE(a.node(n).id == b.node(n).id);
      REQUIRE(a.node(n).prob == b.node(n).prob);
      REQUIRE(a.node(n).parent == b.node(n).parent);
    }
    double mass = 0.0;
    for (int leaf : a.leaves()) mass += a.node_probability(leaf);
    REQUIRE(mass == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("branching one gives a deterministic path") {
  ScenarioTree t = generate_random_tree(5, 1, 4);
  REQUIRE(t.size() == 5);
  REQUIRE(t.leaves().size() == 1);
  for (int n = 0; n < t.size(); ++n) REQUIRE(t.node(n).prob == 1.0);
}

TEST_CASE("build rejects malformed structure") {
  REQUIRE_THROWS_AS(ScenarioTree::build(1, {{"a", 0, "", 1.0}, {"a", 1, "a", 1.0}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ScenarioTree::build(1, {{"a", 0, "", 1.0}, {"b", 1, "zz", 1.0}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ScenarioTree::build(1, {{"a", 1, "b", 1.0}, {"b", 1, "a", 1.0}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ScenarioTree::build(1, {{"a", 0, "", 1.0}, {"b", 0, "", 1.0}}),
                    std::invalid_argument);
}

TEST_CASE("adapted process is node indexed") {
  ScenarioTree t = fixtures::two_leaf_tree();
  AdaptedProcess<double> p(t.size(), 7.0);
  REQUIRE(p.size() == 3);
  p[1] = 9.0;
  REQUIRE(p[0] == 7.0);
  REQUIRE(p[1] == 9.0);
}
