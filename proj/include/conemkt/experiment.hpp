#pragma once

// The equivalence experiment: for stratified seeded instances, compare the
// linear-programming verdict of robust no-arbitrage on Pi against the
// constructive verdict obtained by shrinking spreads and exhibiting a
// verified Pareto maximizer. Records are JSON, one per seed, append-only.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conemkt/arbitrage.hpp"
#include "conemkt/instance.hpp"
#include "conemkt/json_io.hpp"
#include "conemkt/market_cones.hpp"
#include "conemkt/pricing.hpp"
#include "conemkt/utility.hpp"

namespace conemkt {

inline constexpr const char* kToolVersion = "0.1.0";

// 50% round-trip, 25% arbitrage, 25% boundary.
inline std::string kind_for_seed(unsigned seed) {
  switch (seed % 4u) {
    case 2u:
      return "arbitrage";
    case 3u:
      return "boundary";
    default:
      return "roundtrip";
  }
}

struct EquivalenceParams {
  unsigned seed_begin = 0;
  unsigned seed_end = 0;  // inclusive
  // 0 = derive per seed: d in {2,3}, T in {1,2}, branching in {2,3}
  int d = 0;
  int horizon = 0;
  int branching = 0;
  double theta = 0.5;
  std::string out_dir;  // empty = no files written
  Tolerances tol = Tolerances::defaults();
};

struct SeedOutcome {
  unsigned seed = 0;
  std::string kind;
  bool nar = false;
  bool constructive = false;
  bool agree = false;
  Json record;
};

struct EquivalenceResult {
  std::vector<SeedOutcome> outcomes;
  int disagreements = 0;
  Json summary;
};

namespace detail {

inline void append_jsonl(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump() << "\n";
}

inline std::filesystem::path fresh_path(const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::path p = dir / (stem + ".json");
  for (int k = 2; std::filesystem::exists(p); ++k)
    p = dir / (stem + "_" + std::to_string(k) + ".json");
  return p;
}

}  // namespace detail

// One seed end to end. The constructive verdict asserts all three stages: the
// shrunk market is arbitrage-free (no improvement rays exist, so the box in
// the attainable-set skeleton contains the true maximizer), the scalarized
// solve converged, and the solution passed the maximality check.
inline SeedOutcome run_equivalence_seed(unsigned seed, const EquivalenceParams& params) {
  const auto start = std::chrono::steady_clock::now();
  SeedOutcome out;
  out.seed = seed;
  out.kind = kind_for_seed(seed);

  const int d = params.d > 0 ? params.d : 2 + static_cast<int>(seed % 2u);
  const int horizon = params.horizon > 0 ? params.horizon : 1 + static_cast<int>((seed / 2u) % 2u);
  const int branching = params.branching > 0 ? params.branching : 2 + static_cast<int>((seed / 4u) % 2u);

  Json rec;
  rec["seed"] = seed;
  rec["kind"] = out.kind;
  rec["sizes"] = Json{{"d", d}, {"T", horizon}, {"branching", branching}};
  rec["theta"] = params.theta;
  rec["tool_version"] = kToolVersion;

  InstanceBundle b = generate_instance(out.kind, seed, d, horizon, branching);
  rec["digest"] = fnv1a_digest(instance_to_json(b));

  const NaResult na = check_na(b.tree, b.pi, params.tol);
  rec["na"] = Json{{"holds", na.holds}, {"value", na.value}};
  const NarResult nar = check_nar(b.tree, b.pi, params.tol);
  rec["nar"] = Json{{"holds", nar.holds}, {"margin", nar.margin}};
  out.nar = nar.holds;

  const BidAskProcess shrunk = shrink_spreads(b.pi, params.theta);
  const NaResult na_shrunk = check_na(b.tree, shrunk, params.tol);
  rec["shrunk_na"] = Json{{"holds", na_shrunk.holds}, {"value", na_shrunk.value}};

  Json constructive;
  constructive["shrunk_na_holds"] = na_shrunk.holds;
  out.constructive = false;
  if (na_shrunk.holds) {
    try {
      const std::vector<double> uniform(static_cast<size_t>(b.spec.dim()), 1.0);
      ParetoSolution sol =
          solve_scalarized(b.tree, shrunk, b.x, b.spec, uniform, params.tol.fw_gap, params.tol);
      constructive["converged"] = sol.converged;
      constructive["gap"] = sol.gap;
      if (sol.converged) {
        ParetoCheck chk = is_pareto_maximal(b.tree, shrunk, b.x, b.spec, sol.terminal,
                                            params.tol.pareto, params.tol, &sol.plan);
        constructive["maximal"] = chk.maximal;
        constructive["resolved"] = chk.resolved;
        out.constructive = chk.maximal;
      }
    } catch (const std::exception& e) {
      constructive["error"] = e.what();
    }
  }
  rec["constructive"] = std::move(constructive);
  out.agree = (out.nar == out.constructive);
  rec["agree"] = out.agree;

  if (out.agree && out.nar) {
    Json sweep = Json::array();
    for (const SweepEntry& entry :
         pareto_front_sweep(b.tree, shrunk, b.x, b.spec, b.lambda_grid, params.tol.fw_gap, params.tol)) {
      Json js;
      js["lambda"] = entry.lambda;
      if (entry.solution) {
        js["utilities"] = entry.solution->utilities;
        js["gap"] = entry.solution->gap;
        js["converged"] = entry.solution->converged;
      } else {
        js["error"] = entry.error;
      }
      sweep.push_back(std::move(js));
    }
    rec["sweep"] = std::move(sweep);

    try {
      const std::vector<double> ones(static_cast<size_t>(b.spec.dim()), 1.0);
      const std::vector<double> delta(static_cast<size_t>(b.spec.dim()), 1e-3);
      StrictPipeline run =
          strict_pipeline(b.tree, b.pi, params.theta, b.x, b.spec, ones, delta, params.tol);
      rec["pricing"] = Json{{"verdict", to_string(run.report.verdict)},
                            {"min_strict_margin", run.report.min_strict_margin},
                            {"max_polar_slack", run.report.max_polar_slack},
                            {"max_martingale_residual", run.report.max_martingale_residual},
                            {"floor_met", run.report.floor_met}};
    } catch (const std::exception& e) {
      rec["pricing"] = Json{{"error", e.what()}};
    }
  }

  const auto elapsed = std::chrono::steady_clock::now() - start;
  rec["elapsed_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  out.record = std::move(rec);
  return out;
}

inline EquivalenceResult run_equivalence(const EquivalenceParams& params) {
  if (params.seed_end < params.seed_begin)
    throw std::invalid_argument("run_equivalence: empty seed range");
  if (params.d > 4 || params.horizon > 3 || params.branching > 3)
    throw std::invalid_argument("run_equivalence: sizes exceed desk scale (d<=4, T<=3, b<=3)");
  if (!(params.theta > 0.0) || !(params.theta < 1.0))
    throw std::invalid_argument("run_equivalence: theta must lie in (0,1)");

  const bool write = !params.out_dir.empty();
  std::filesystem::path dir(params.out_dir);
  if (write) std::filesystem::create_directories(dir);

  EquivalenceResult result;
  Json by_kind = Json::object();
  int nar_count = 0, strict_count = 0, floor_unmet = 0;
  for (unsigned seed = params.seed_begin; seed <= params.seed_end; ++seed) {
    SeedOutcome outcome;
    try {
      outcome = run_equivalence_seed(seed, params);
    } catch (const std::exception& e) {
      outcome.seed = seed;
      outcome.kind = kind_for_seed(seed);
      outcome.agree = false;
      outcome.record = Json{{"seed", seed}, {"kind", outcome.kind}, {"error", e.what()}};
    }
    if (!outcome.agree) {
      ++result.disagreements;
      if (write) {
        Json forensic = outcome.record;
        try {
          const int d = params.d > 0 ? params.d : 2 + static_cast<int>(seed % 2u);
          const int horizon =
              params.horizon > 0 ? params.horizon : 1 + static_cast<int>((seed / 2u) % 2u);
          const int branching =
              params.branching > 0 ? params.branching : 2 + static_cast<int>((seed / 4u) % 2u);
          forensic["instance"] =
              instance_to_json(generate_instance(outcome.kind, seed, d, horizon, branching));
        } catch (...) {
          // generation already failed; the record's error string stands
        }
        detail::append_jsonl(detail::fresh_path(dir, "forensic_" + std::to_string(seed)), forensic);
      }
    }
    const std::string kind = outcome.kind;
    by_kind[kind] = by_kind.value(kind, 0) + 1;
    if (outcome.nar) ++nar_count;
    if (outcome.record.contains("pricing") && outcome.record["pricing"].contains("verdict")) {
      if (outcome.record["pricing"]["verdict"] == "strictly consistent") ++strict_count;
      if (outcome.record["pricing"].contains("floor_met") &&
          !outcome.record["pricing"]["floor_met"].get<bool>())
        ++floor_unmet;
    }
    if (write) detail::append_jsonl(dir / "records.jsonl", outcome.record);
    result.outcomes.push_back(std::move(outcome));
  }

  result.summary = Json{{"seeds", result.outcomes.size()},
                        {"disagreements", result.disagreements},
                        {"by_kind", std::move(by_kind)},
                        {"nar_holds", nar_count},
                        {"strictly_consistent", strict_count},
                        {"floor_unmet", floor_unmet},
                        {"theta", params.theta},
                        {"tool_version", kToolVersion}};
  if (write) detail::append_jsonl(dir / "summary.jsonl", result.summary);
  return result;
}

}  // namespace conemkt
