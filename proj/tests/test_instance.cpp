#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "conemkt/arbitrage.hpp"
#include "conemkt/instance.hpp"

using namespace conemkt;

namespace {

bool processes_identical(const BidAskProcess& a, const BidAskProcess& b) {
  if (a.d != b.d || a.matrices.size() != b.matrices.size()) return false;
  for (int n = 0; n < a.matrices.size(); ++n)
    for (int i = 0; i < a.d; ++i)
      for (int j = 0; j < a.d; ++j)
        if (a.at(n).at(i, j) != b.at(n).at(i, j)) return false;
  return true;
}

}  // namespace

TEST_CASE("generators are deterministic in the seed") {
  for (const char* kind : {"roundtrip", "arbitrage", "boundary", "free"}) {
    InstanceBundle a = generate_instance(kind, 99, 3, 2, 3);
    InstanceBundle b = generate_instance(kind, 99, 3, 2, 3);
    REQUIRE(a.tree.size() == b.tree.size());
    REQUIRE(processes_identical(a.pi, b.pi));
    REQUIRE(a.x == b.x);
    InstanceBundle c = generate_instance(kind, 100, 3, 2, 3);
    REQUIRE_FALSE(processes_identical(a.pi, c.pi));
  }
  REQUIRE_THROWS_AS(generate_instance("bogus", 1, 2, 1, 2), std::invalid_argument);
}

TEST_CASE("generated instances pass the validators") {
  for (const char* kind : {"roundtrip", "arbitrage", "boundary", "free"}) {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      InstanceBundle b = generate_instance(kind, seed, 2 + static_cast<int>(seed % 2), 2, 2);
      REQUIRE(validate_tree(b.tree).ok);
      REQUIRE(validate_bid_ask(b.pi, b.tree).ok);
      REQUIRE(static_cast<int>(b.x.size()) == b.pi.d);
      REQUIRE(b.spec.dim() == b.pi.d);
      for (double v : b.x) REQUIRE(v > 0.0);
      REQUIRE_FALSE(b.lambda_grid.empty());
    }
  }
}

TEST_CASE("roundtrip instances satisfy the strict no-arbitrage condition") {
  for (int rep = 0; rep < 25; ++rep) {
    const int d = 2 + rep % 2;
    const int horizon = 1 + rep % 2;
    const int branching = 2 + rep % 2;
    InstanceBundle b = generate_roundtrip_instance(7000 + static_cast<std::uint64_t>(rep), d,
                                                   horizon, branching);
    NarResult nar = check_nar(b.tree, b.pi);
    REQUIRE(nar.holds);
    REQUIRE(nar.margin > 1e-7);
  }
}

TEST_CASE("arbitrage instances fail the no-arbitrage condition") {
  for (int rep = 0; rep < 15; ++rep) {
    const int d = 2 + rep % 3;
    InstanceBundle b = generate_arbitrage_instance(8000 + static_cast<std::uint64_t>(rep), d,
                                                   1 + rep % 2, 2);
    NaResult na = check_na(b.tree, b.pi);
    REQUIRE_FALSE(na.holds);
    REQUIRE(na.certificate.has_value());
    REQUIRE(certificate_valid(*na.certificate, b.tree, b.pi));
  }
}

TEST_CASE("boundary instances separate the two conditions") {
  for (int rep = 0; rep < 15; ++rep) {
    const int d = 2 + rep % 3;
    InstanceBundle b = generate_boundary_instance(9000 + static_cast<std::uint64_t>(rep), d,
                                                  1 + rep % 2, 2);
    NaResult na = check_na(b.tree, b.pi);
    NarResult nar = check_nar(b.tree, b.pi);
    REQUIRE(na.holds);
    REQUIRE_FALSE(nar.holds);
  }
}

TEST_CASE("free instances never produce contradictory verdicts") {
  for (int rep = 0; rep < 20; ++rep) {
    InstanceBundle b = generate_free_instance(10000 + static_cast<std::uint64_t>(rep),
                                              2 + rep % 3, 1 + rep % 2, 2);
    NaResult na = check_na(b.tree, b.pi);
    NarResult nar = check_nar(b.tree, b.pi);
    REQUIRE_FALSE((!na.holds && nar.holds));
  }
}
