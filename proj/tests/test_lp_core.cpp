#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "conemkt/lp_core.hpp"
#include "conemkt/random.hpp"
#include "support/lp_oracle.hpp"

using namespace conemkt;
using Catch::Approx;

TEST_CASE("one variable, one row") {
  LinearProgram lp;
  lp.add_var(0.0, kInf, 1.0);
  lp.add_row(RowSense::LE, 1.0, {1.0});
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  REQUIRE(r.objective == Approx(1.0));
  REQUIRE(r.primal[0] == Approx(1.0));
}

TEST_CASE("simplex walks to the right vertex") {
  LinearProgram lp;
  lp.maximize = true;
  lp.add_var(0.0, kInf, 3.0);
  lp.add_var(0.0, kInf, 2.0);
  lp.add_row(RowSense::LE, 4.0, {1.0, 1.0});
  lp.add_row(RowSense::LE, 2.0, {1.0, 0.0});
  lp.add_row(RowSense::LE, 3.0, {0.0, 1.0});
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  REQUIRE(r.objective == Approx(10.0));
  REQUIRE(r.primal[0] == Approx(2.0));
  REQUIRE(r.primal[1] == Approx(2.0));
  REQUIRE(r.dual[0] == Approx(2.0));
  REQUIRE(r.dual[1] == Approx(1.0));
  REQUIRE(r.dual[2] == Approx(0.0).margin(1e-12));
  REQUIRE(r.feasibility_residual <= 1e-8);
  REQUIRE(r.duality_residual <= 1e-7);
  REQUIRE(r.comp_slackness_residual <= 1e-7);
}

TEST_CASE("bound-only optimum") {
  LinearProgram lp;
  lp.add_var(0.0, 1.0, 1.0);
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  REQUIRE(r.objective == Approx(1.0));
}

TEST_CASE("negative lower bounds") {
  LinearProgram lp;
  lp.maximize = true;
  lp.add_var(-5.0, 5.0, -1.0);
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  REQUIRE(r.primal[0] == Approx(-5.0));
  REQUIRE(r.objective == Approx(5.0));
}

TEST_CASE("equality row") {
  LinearProgram lp;
  lp.add_var(0.0, 1.0, 1.0);
  lp.add_var(0.0, 1.0, 1.0);
  lp.add_row(RowSense::EQ, 0.5, {1.0, 1.0});
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  REQUIRE(r.objective == Approx(0.5));
}

TEST_CASE("minimization with a greater-equal row") {
  LinearProgram lp;
  lp.maximize = false;
  lp.add_var(0.0, 1.0, 1.0);
  lp.add_row(RowSense::GE, 0.3, {1.0});
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  REQUIRE(r.objective == Approx(0.3));
}

TEST_CASE("infeasible system") {
  LinearProgram lp;
  lp.add_var(0.0, kInf, 1.0);
  lp.add_row(RowSense::LE, -1.0, {1.0});
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Infeasible);
}

TEST_CASE("unbounded with improving ray") {
  LinearProgram lp;
  lp.maximize = true;
  lp.add_var(0.0, kInf, 1.0);
  LpOutcome r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Unbounded);
  REQUIRE(r.ray.size() == 1);
  REQUIRE(r.ray[0] == Approx(1.0));
}

TEST_CASE("free variables are rejected") {
  LinearProgram lp;
  lp.add_var(-kInf, kInf, 1.0);
  REQUIRE_THROWS_AS(solve_lp(lp), std::invalid_argument);
}

TEST_CASE("deterministic across repeat solves") {
  LinearProgram lp;
  lp.maximize = true;
  lp.add_var(0.0, 2.0, 1.0);
  lp.add_var(0.0, 2.0, 1.0);
  lp.add_var(0.0, 2.0, 1.0);
  lp.add_row(RowSense::LE, 3.0, {1.0, 1.0, 1.0});
  lp.add_row(RowSense::LE, 2.5, {1.0, 1.0, 0.0});
  LpOutcome a = solve_lp(lp);
  LpOutcome b = solve_lp(lp);
  REQUIRE(a.status == b.status);
  REQUIRE(a.primal == b.primal);
  REQUIRE(a.dual == b.dual);
}

TEST_CASE("margin variable finds the deepest point") {
  LinearProgram lp;
  lp.add_var(-5.0, 5.0, 0.0);
  lp.add_row(RowSense::LE, 1.0, {1.0});
  lp.add_row(RowSense::LE, 0.0, {-1.0});
  MarginResult m = feasibility_with_margin(lp, {0, 1});
  REQUIRE(m.status == LpStatus::Optimal);
  REQUIRE(m.epsilon == Approx(0.5));
  REQUIRE(m.point[0] == Approx(0.5));
}

TEST_CASE("margin zero when pinned to a face") {
  LinearProgram lp;
  lp.add_var(-5.0, 5.0, 0.0);
  lp.add_row(RowSense::LE, 0.0, {1.0});
  lp.add_row(RowSense::LE, 0.0, {-1.0});
  MarginResult m = feasibility_with_margin(lp, {0, 1});
  REQUIRE(m.status == LpStatus::Optimal);
  REQUIRE(m.epsilon == Approx(0.0).margin(1e-9));
}

TEST_CASE("margin on infeasible base system reports infeasible") {
  LinearProgram lp;
  lp.add_var(-5.0, 5.0, 0.0);
  lp.add_row(RowSense::LE, -1.0, {1.0});
  lp.add_row(RowSense::LE, 0.0, {-1.0});
  MarginResult m = feasibility_with_margin(lp, {0, 1});
  REQUIRE(m.status == LpStatus::Infeasible);
}

TEST_CASE("margin rejects non-LE designated rows") {
  LinearProgram lp;
  lp.add_var(0.0, 1.0, 0.0);
  lp.add_row(RowSense::EQ, 0.5, {1.0});
  REQUIRE_THROWS_AS(feasibility_with_margin(lp, {0}), std::invalid_argument);
}

namespace {

LinearProgram random_lp(Rng& rng, int n, int m) {
  LinearProgram lp;
  lp.maximize = rng.uniform() < 0.5;
  for (int j = 0; j < n; ++j) {
    double lo = rng.uniform(-2.0, 0.0);
    double up = lo + rng.uniform(0.5, 3.0);
    lp.add_var(lo, up, rng.uniform(-2.0, 2.0));
  }
  // a reference point inside the box steers rhs choices toward feasibility
  std::vector<double> x0(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) x0[static_cast<size_t>(j)] = lp.lower[j] + rng.uniform(0.2, 0.8) * (lp.upper[j] - lp.lower[j]);
  for (int r = 0; r < m; ++r) {
    std::vector<double> a(static_cast<size_t>(n));
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    double ax = 0.0;
    for (int j = 0; j < n; ++j) ax += a[static_cast<size_t>(j)] * x0[static_cast<size_t>(j)];
    double roll = rng.uniform();
    if (r == 0 && n >= 2 && roll < 0.3) {
      double shift = rng.uniform() < 0.5 ? 0.0 : (rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.05, 0.2);
      lp.add_row(RowSense::EQ, ax + shift, a);
    } else if (roll < 0.75) {
      double mag = rng.uniform(0.05, 1.0);
      lp.add_row(RowSense::LE, ax + (rng.uniform() < 0.85 ? mag : -mag), a);
    } else {
      double mag = rng.uniform(0.05, 1.0);
      lp.add_row(RowSense::GE, ax - (rng.uniform() < 0.85 ? mag : -mag), a);
    }
  }
  return lp;
}

}  // namespace

TEST_CASE("agreement with vertex enumeration on 500 random small LPs") {
  Rng rng(31337);
  int optimal_seen = 0, infeasible_seen = 0;
  for (int t = 0; t < 500; ++t) {
    const int n = t < 480 ? 1 + static_cast<int>(rng.uniform_int(0, 5)) : 7 + static_cast<int>(rng.uniform_int(0, 1));
    const int m = t < 480 ? 1 + static_cast<int>(rng.uniform_int(0, 7)) : 1 + static_cast<int>(rng.uniform_int(0, 3));
    LinearProgram lp = random_lp(rng, n, m);
    LpOutcome got = solve_lp(lp);
    lp_oracle::OracleResult want = lp_oracle::enumerate_lp(lp);
    INFO("case " << t << " n=" << n << " m=" << m);
    REQUIRE(got.status == want.status);
    if (got.status == LpStatus::Optimal) {
      ++optimal_seen;
      REQUIRE(std::abs(got.objective - want.objective) <=
              1e-6 * std::max(1.0, std::abs(want.objective)));
      REQUIRE(got.feasibility_residual <= 1e-8);
      REQUIRE(got.duality_residual <= 1e-7);
    } else {
      ++infeasible_seen;
    }
  }
  // the generator must exercise both outcomes
  REQUIRE(optimal_seen >= 100);
  REQUIRE(infeasible_seen >= 20);
}
