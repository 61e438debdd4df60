#pragma once

// JSON serialization for every artifact the tool reads or writes, plus the
// content digest that ties solution files to the instance they were computed
// from. All writers emit canonical JSON (sorted keys, lossless doubles), so
// identical objects produce identical bytes and digests.

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "conemkt/arbitrage.hpp"
#include "conemkt/attainable.hpp"
#include "conemkt/instance.hpp"
#include "conemkt/market_cones.hpp"
#include "conemkt/pricing.hpp"
#include "conemkt/scenario_tree.hpp"
#include "conemkt/utility.hpp"

namespace conemkt {

using Json = nlohmann::json;

// Invalid content in a well-formed file; parse errors stay json exceptions.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require_valid(const ValidationReport& rep, const std::string& what) {
  if (rep.ok) return;
  std::string msg = what + ":";
  for (const auto& [where, rule] : rep.violations) msg += " [" + where + "] " + rule + ";";
  throw ValidationError(msg);
}

}  // namespace detail

inline std::string fnv1a_digest(const Json& j) {
  const std::string bytes = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[static_cast<size_t>(k)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

inline Json tree_to_json(const ScenarioTree& tree) {
  Json nodes = Json::array();
  for (int n = 0; n < tree.size(); ++n) {
    const TreeNode& tn = tree.node(n);
    Json jn;
    jn["id"] = tn.id;
    jn["t"] = tn.time;
    if (tn.parent < 0) {
      jn["parent"] = nullptr;
      jn["p"] = nullptr;
    } else {
      jn["parent"] = tree.node(tn.parent).id;
      jn["p"] = tn.prob;
    }
    nodes.push_back(std::move(jn));
  }
  return Json{{"T", tree.horizon()}, {"nodes", std::move(nodes)}};
}

inline ScenarioTree tree_from_json(const Json& j) {
  const int horizon = j.at("T").get<int>();
  std::vector<NodeSpec> specs;
  for (const Json& jn : j.at("nodes")) {
    NodeSpec s;
    s.id = jn.at("id").get<std::string>();
    s.time = jn.at("t").get<int>();
    if (!jn.at("parent").is_null()) {
      s.parent = jn.at("parent").get<std::string>();
      s.prob = jn.at("p").get<double>();
    }
    specs.push_back(std::move(s));
  }
  ScenarioTree tree = ScenarioTree::build(horizon, specs);
  detail::require_valid(validate_tree(tree), "invalid tree");
  return tree;
}

inline Json market_to_json(const BidAskProcess& pi, const ScenarioTree& tree) {
  Json out = Json::array();
  for (int n = 0; n < tree.size(); ++n) {
    const BidAskMatrix& m = pi.at(n);
    Json rows = Json::array();
    for (int i = 0; i < pi.d; ++i) {
      Json row = Json::array();
      for (int c = 0; c < pi.d; ++c) row.push_back(m(i, c));
      rows.push_back(std::move(row));
    }
    out.push_back(Json{{"node", tree.node(n).id}, {"pi", std::move(rows)}});
  }
  return out;
}

inline BidAskProcess market_from_json(const Json& j, const ScenarioTree& tree) {
  if (static_cast<int>(j.size()) != tree.size())
    throw ValidationError("market entry count does not match the tree");
  BidAskProcess pi;
  pi.matrices = AdaptedProcess<BidAskMatrix>(tree.size());
  for (const Json& jn : j) {
    const int n = tree.node_index(jn.at("node").get<std::string>());
    pi.at(n) = BidAskMatrix::from_rows(jn.at("pi").get<std::vector<std::vector<double>>>());
  }
  pi.d = pi.at(tree.root()).dim();
  detail::require_valid(validate_bid_ask(pi, tree), "invalid bid-ask process");
  return pi;
}

inline std::string family_name(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::Exponential:
      return "exp";
    case UtilityFamily::Hyperbolic:
      return "hyp";
    default:
      return "powasym";
  }
}

inline UtilityFamily family_from_name(const std::string& name) {
  if (name == "exp") return UtilityFamily::Exponential;
  if (name == "hyp") return UtilityFamily::Hyperbolic;
  if (name == "powasym") return UtilityFamily::PowerAsymptote;
  throw ValidationError("unknown utility family: " + name);
}

inline Json utility_to_json(const UtilitySpec& spec) {
  Json assets = Json::array();
  for (const AssetUtility& a : spec.assets)
    assets.push_back(Json{{"family", family_name(a.family)}, {"param", a.param}});
  return Json{{"assets", std::move(assets)}};
}

inline UtilitySpec utility_from_json(const Json& j) {
  UtilitySpec spec;
  for (const Json& ja : j.at("assets")) {
    AssetUtility a;
    a.family = family_from_name(ja.at("family").get<std::string>());
    a.param = ja.at("param").get<double>();
    if (!(a.param > 0.0)) throw ValidationError("utility parameter must be positive");
    spec.assets.push_back(a);
  }
  if (spec.assets.empty()) throw ValidationError("utility spec has no assets");
  return spec;
}

inline Json instance_to_json(const InstanceBundle& b) {
  Json out;
  out["kind"] = b.kind;
  out["seed"] = b.seed;
  out["theta"] = b.theta;
  out["x"] = b.x;
  out["lambda_grid"] = b.lambda_grid;
  out["tree"] = tree_to_json(b.tree);
  out["market"] = market_to_json(b.pi, b.tree);
  out["utility"] = utility_to_json(b.spec);
  return out;
}

inline InstanceBundle instance_from_json(const Json& j) {
  ScenarioTree tree = tree_from_json(j.at("tree"));
  BidAskProcess pi = market_from_json(j.at("market"), tree);
  std::vector<double> x = j.at("x").get<std::vector<double>>();
  UtilitySpec spec = utility_from_json(j.at("utility"));
  if (static_cast<int>(x.size()) != pi.d || spec.dim() != pi.d)
    throw ValidationError("endowment/utility dimension does not match the market");
  InstanceBundle b{std::move(tree), std::move(pi), std::move(x), std::move(spec)};
  b.theta = j.at("theta").get<double>();
  b.lambda_grid = j.at("lambda_grid").get<std::vector<std::vector<double>>>();
  b.seed = j.at("seed").get<unsigned>();
  b.kind = j.at("kind").get<std::string>();
  return b;
}

// Plan entries use 1-based "i,j" keys matching the superscript convention;
// zero transfers are omitted, disposals are written in full.
inline Json plan_to_json(const TransferPlan& plan, const ScenarioTree& tree) {
  const int d = plan.layout.d;
  Json out = Json::array();
  for (int n = 0; n < tree.size(); ++n) {
    Json a = Json::object();
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < d; ++c) {
        if (i == c) continue;
        const double amt = plan.transfer(n, i, c);
        if (amt != 0.0)
          a[std::to_string(i + 1) + "," + std::to_string(c + 1)] = amt;
      }
    Json dsp = Json::array();
    for (int i = 0; i < d; ++i) dsp.push_back(plan.disposal(n, i));
    out.push_back(Json{{"node", tree.node(n).id}, {"a", std::move(a)}, {"dsp", std::move(dsp)}});
  }
  return out;
}

inline TransferPlan plan_from_json(const Json& j, const ScenarioTree& tree) {
  if (j.empty()) throw ValidationError("plan has no node entries");
  const int d = static_cast<int>(j.at(0).at("dsp").size());
  TransferPlan plan(d, tree.size());
  for (const Json& jn : j) {
    const int n = tree.node_index(jn.at("node").get<std::string>());
    for (const auto& [key, amt] : jn.at("a").items()) {
      const size_t comma = key.find(',');
      if (comma == std::string::npos) throw ValidationError("bad transfer key: " + key);
      const int i = std::stoi(key.substr(0, comma)) - 1;
      const int c = std::stoi(key.substr(comma + 1)) - 1;
      if (i < 0 || c < 0 || i >= d || c >= d || i == c)
        throw ValidationError("transfer key out of range: " + key);
      plan.transfer(n, i, c) = amt.get<double>();
    }
    const Json& dsp = jn.at("dsp");
    if (static_cast<int>(dsp.size()) != d) throw ValidationError("disposal length mismatch");
    for (int i = 0; i < d; ++i) plan.disposal(n, i) = dsp.at(static_cast<size_t>(i)).get<double>();
  }
  return plan;
}

inline Json solution_to_json(const ParetoSolution& sol, const ScenarioTree& tree,
                             const std::string& instance_digest) {
  Json terminal = Json::array();
  for (int leaf : tree.leaves())
    terminal.push_back(
        Json{{"node", tree.node(leaf).id}, {"x", sol.terminal[static_cast<size_t>(leaf)]}});
  Json out;
  out["instance_digest"] = instance_digest;
  out["lambda_raw"] = sol.lambda_raw;
  out["lambda"] = sol.lambda;
  out["plan"] = plan_to_json(sol.plan, tree);
  out["terminal"] = std::move(terminal);
  out["utilities"] = sol.utilities;
  out["gap"] = sol.gap;
  out["converged"] = sol.converged;
  out["iterations"] = sol.iterations;
  return out;
}

inline ParetoSolution solution_from_json(const Json& j, const ScenarioTree& tree) {
  ParetoSolution sol;
  sol.lambda_raw = j.at("lambda_raw").get<std::vector<double>>();
  sol.lambda = j.at("lambda").get<std::vector<double>>();
  sol.plan = plan_from_json(j.at("plan"), tree);
  sol.terminal.assign(static_cast<size_t>(tree.size()), {});
  for (const Json& jt : j.at("terminal")) {
    const int n = tree.node_index(jt.at("node").get<std::string>());
    sol.terminal[static_cast<size_t>(n)] = jt.at("x").get<std::vector<double>>();
  }
  sol.utilities = j.at("utilities").get<std::vector<double>>();
  sol.gap = j.at("gap").get<double>();
  sol.converged = j.at("converged").get<bool>();
  sol.iterations = j.at("iterations").get<int>();
  return sol;
}

inline Json price_to_json(const PriceProcess& z, const ScenarioTree& tree) {
  Json out = Json::array();
  for (int n = 0; n < tree.size(); ++n)
    out.push_back(Json{{"node", tree.node(n).id}, {"z", z.at(n)}});
  return out;
}

inline PriceProcess price_from_json(const Json& j, const ScenarioTree& tree) {
  if (static_cast<int>(j.size()) != tree.size())
    throw ValidationError("price entry count does not match the tree");
  PriceProcess z;
  z.values = AdaptedProcess<std::vector<double>>(tree.size());
  for (const Json& jn : j) {
    const int n = tree.node_index(jn.at("node").get<std::string>());
    z.at(n) = jn.at("z").get<std::vector<double>>();
  }
  z.d = static_cast<int>(z.at(tree.root()).size());
  return z;
}

inline Json certificate_to_json(const ArbitrageCertificate& cert, const ScenarioTree& tree) {
  Json positives = Json::array();
  for (const ViolationEntry& e : cert.positive_entries)
    positives.push_back(Json{{"leaf", tree.node(e.leaf).id}, {"asset", e.asset + 1}, {"value", e.value}});
  Json terminal = Json::array();
  for (int leaf : tree.leaves())
    terminal.push_back(
        Json{{"node", tree.node(leaf).id}, {"x", cert.terminal[static_cast<size_t>(leaf)]}});
  return Json{{"plan", plan_to_json(cert.plan, tree)},
              {"terminal", std::move(terminal)},
              {"positive_entries", std::move(positives)}};
}

inline Json report_to_json(const ConsistencyReport& rep, const ScenarioTree& tree) {
  Json nodes = Json::array();
  for (int n = 0; n < tree.size(); ++n) {
    Json jn;
    jn["node"] = tree.node(n).id;
    jn["martingale_residual"] = rep.martingale_residual[static_cast<size_t>(n)];
    jn["polar_slack"] = rep.polar_slack[static_cast<size_t>(n)];
    if (rep.strict_checked) jn["strict_margin"] = rep.strict_margin[static_cast<size_t>(n)];
    nodes.push_back(std::move(jn));
  }
  Json out;
  out["verdict"] = to_string(rep.verdict);
  out["strict_checked"] = rep.strict_checked;
  out["max_martingale_residual"] = rep.max_martingale_residual;
  out["max_polar_slack"] = rep.max_polar_slack;
  if (rep.strict_checked) out["min_strict_margin"] = rep.min_strict_margin;
  out["floor_checked"] = rep.floor_checked;
  if (rep.floor_checked) out["floor_met"] = rep.floor_met;
  out["zero_assets"] = rep.zero_assets;
  out["failures"] = rep.failures;
  out["nodes"] = std::move(nodes);
  return out;
}

}  // namespace conemkt
