// conemkt: command-line front end for scenario-tree markets with
// proportional transaction costs.
//
// Subcommands: validate, check, maximize, price, equivalence, gen.
// Exit codes: 0 success / verdict holds, 1 validation failure or internal
// error, 2 parse or input error, 3 verdict fails, 4 precondition unmet,
// 5 equivalence disagreement. The last stdout line of every run is a JSON
// object; nonzero exits carry a "reason" field there.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "conemkt/experiment.hpp"
#include "conemkt/json_io.hpp"

namespace {

using conemkt::Json;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kInputError = 2;
constexpr int kVerdictFails = 3;
constexpr int kPrecondition = 4;
constexpr int kDisagreement = 5;

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  return Json::parse(in);
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// dir/name.json + ".na_certificate.json" -> dir/name.na_certificate.json
std::filesystem::path sibling(const std::string& instance_path, const std::string& suffix) {
  const std::filesystem::path p(instance_path);
  return p.parent_path() / (p.stem().string() + suffix);
}

int emit(const std::string& command, int code, Json payload) {
  payload["command"] = command;
  payload["ok"] = code == kOk;
  payload["exit"] = code;
  std::cout << payload.dump() << "\n";
  return code;
}

int fail(const std::string& command, int code, const std::string& reason,
         Json payload = Json::object()) {
  payload["reason"] = reason;
  return emit(command, code, payload);
}

Json finite_or_text(double v) { return std::isfinite(v) ? Json(v) : Json("unbounded"); }

// Solution files carry a hash of their own remaining content so edits after
// the fact are caught, not just instance swaps.
Json seal_solution(Json j) {
  j["self_digest"] = conemkt::fnv1a_digest(j);
  return j;
}

bool seal_intact(const Json& j) {
  if (!j.contains("self_digest")) return true;  // foreign files are accepted unsealed
  Json body = j;
  body.erase("self_digest");
  return j["self_digest"] == conemkt::fnv1a_digest(body);
}

conemkt::InstanceBundle load_instance(const std::string& path) {
  return conemkt::instance_from_json(load_json(path));
}

int cmd_validate(const std::string& path, const std::string& report_path) {
  Json report;
  report["instance"] = path;
  int code = kOk;
  try {
    const Json j = load_json(path);
    const conemkt::InstanceBundle b = conemkt::instance_from_json(j);
    report["valid"] = true;
    report["digest"] = conemkt::fnv1a_digest(conemkt::instance_to_json(b));
    report["nodes"] = b.tree.size();
    report["d"] = b.pi.d;
    report["horizon"] = b.tree.horizon();
  } catch (const Json::parse_error& e) {
    code = kInputError;
    report["valid"] = false;
    report["reason"] = std::string("parse error: ") + e.what();
  } catch (const std::exception& e) {
    code = kInvalid;
    report["valid"] = false;
    report["reason"] = e.what();
  }
  if (!report_path.empty()) write_json(report_path, report);
  return emit("validate", code, report);
}

int cmd_check(const std::string& path, const std::string& mode, std::string out_path) {
  const conemkt::InstanceBundle b = load_instance(path);
  const conemkt::Tolerances tol = conemkt::Tolerances::defaults();
  Json payload;
  payload["instance"] = path;
  payload["mode"] = mode;

  if (mode == "na") {
    const conemkt::NaResult r = conemkt::check_na(b.tree, b.pi, tol);
    payload["holds"] = r.holds;
    payload["value"] = finite_or_text(r.value);
    if (r.holds) return emit("check", kOk, payload);
    if (out_path.empty()) out_path = sibling(path, ".na_certificate.json").string();
    Json cert = conemkt::certificate_to_json(*r.certificate, b.tree);
    cert["value"] = finite_or_text(r.value);
    write_json(out_path, cert);
    payload["certificate"] = out_path;
    return fail("check", kVerdictFails, "no-arbitrage fails: certificate written", payload);
  }

  const conemkt::NarResult r = conemkt::check_nar(b.tree, b.pi, tol);
  payload["holds"] = r.holds;
  payload["margin"] = r.margin;
  if (r.holds) {
    if (out_path.empty()) out_path = sibling(path, ".nar_price.json").string();
    write_json(out_path, Json{{"margin", r.margin},
                              {"z", conemkt::price_to_json(*r.certificate, b.tree)}});
    payload["price_process"] = out_path;
    return emit("check", kOk, payload);
  }
  // distinguish outright arbitrage from the NA-without-NA^r boundary
  const conemkt::NaResult na = conemkt::check_na(b.tree, b.pi, tol);
  payload["na_holds"] = na.holds;
  if (out_path.empty()) out_path = sibling(path, ".nar_verdict.json").string();
  write_json(out_path, Json{{"holds", false}, {"margin", r.margin}, {"na_holds", na.holds}});
  payload["verdict_file"] = out_path;
  return fail("check", kVerdictFails,
              na.holds ? "robust no-arbitrage fails while plain no-arbitrage holds"
                       : "robust no-arbitrage fails: market admits arbitrage",
              payload);
}

int cmd_maximize(const std::string& path, const std::vector<double>& lambda, int sweep,
                 const std::string& out, const std::string& csv, double gap_tol) {
  const conemkt::InstanceBundle b = load_instance(path);
  const conemkt::Tolerances tol = conemkt::Tolerances::defaults();
  const int d = b.pi.d;
  Json payload;
  payload["instance"] = path;

  if (!lambda.empty()) {
    if (static_cast<int>(lambda.size()) != d)
      return fail("maximize", kInputError,
                  "expected " + std::to_string(d) + " weights, got " +
                      std::to_string(lambda.size()),
                  payload);
    for (double w : lambda)
      if (!(w > 0.0))
        return fail("maximize", kInputError, "weights must be strictly positive", payload);
  }

  const conemkt::NaResult na = conemkt::check_na(b.tree, b.pi, tol);
  if (!na.holds) {
    const auto cert_path = sibling(path, ".na_certificate.json");
    write_json(cert_path, conemkt::certificate_to_json(*na.certificate, b.tree));
    payload["certificate"] = cert_path.string();
    // demonstrate on the no-trade candidate that the certificate improves it
    const std::vector<std::vector<double>> candidate(static_cast<size_t>(b.tree.size()), b.x);
    const auto improved = conemkt::improvement_from_arbitrage(b.tree, b.pi, b.x, b.spec,
                                                              candidate, *na.certificate, tol);
    payload["utilities_no_trade"] = conemkt::expected_vector_utility(b.tree, candidate, b.spec);
    payload["utilities_improved"] = conemkt::expected_vector_utility(b.tree, improved, b.spec);
    return fail("maximize", kVerdictFails,
                "no-arbitrage fails: maximization refused, certificate improves the no-trade "
                "candidate",
                payload);
  }

  const std::string digest = conemkt::fnv1a_digest(conemkt::instance_to_json(b));
  payload["digest"] = digest;

  if (sweep > 0) {
    const auto grid = conemkt::weight_grid(d, sweep);
    const auto entries = conemkt::pareto_front_sweep(b.tree, b.pi, b.x, b.spec, grid, gap_tol, tol);
    Json files = Json::array();
    int solved = 0, errors = 0;
    for (size_t k = 0; k < entries.size(); ++k) {
      if (!entries[k].solution) {
        ++errors;
        files.push_back(Json{{"error", entries[k].error}});
        continue;
      }
      ++solved;
      const auto f = sibling(path, ".solution_" + std::to_string(k + 1) + ".json");
      write_json(f, seal_solution(conemkt::solution_to_json(*entries[k].solution, b.tree, digest)));
      files.push_back(f.string());
    }
    if (!csv.empty()) {
      std::ofstream cs(csv);
      if (!cs) throw std::runtime_error("cannot write " + csv);
      cs << std::setprecision(17);
      for (int i = 0; i < d; ++i) cs << "lambda_" << i + 1 << ",";
      for (int i = 0; i < d; ++i) cs << "eu_" << i + 1 << (i + 1 < d ? "," : "\n");
      for (const auto& e : entries) {
        if (!e.solution) continue;
        for (double w : e.lambda) cs << w << ",";
        const auto& u = e.solution->utilities;
        for (int i = 0; i < d; ++i) cs << u[static_cast<size_t>(i)] << (i + 1 < d ? "," : "\n");
      }
      payload["csv"] = csv;
    }
    payload["sweep"] = sweep;
    payload["solved"] = solved;
    payload["errors"] = errors;
    payload["files"] = std::move(files);
    return emit("maximize", kOk, payload);
  }

  const auto sol = conemkt::solve_scalarized(b.tree, b.pi, b.x, b.spec, lambda, gap_tol, tol);
  const auto f = out.empty() ? sibling(path, ".solution.json") : std::filesystem::path(out);
  write_json(f, seal_solution(conemkt::solution_to_json(sol, b.tree, digest)));
  payload["file"] = f.string();
  payload["gap"] = sol.gap;
  payload["converged"] = sol.converged;
  payload["iterations"] = sol.iterations;
  payload["utilities"] = sol.utilities;
  return emit("maximize", kOk, payload);
}

int cmd_price(const std::string& path, const std::string& sol_path, bool strict, double theta,
              double delta, const std::string& out) {
  const conemkt::InstanceBundle b = load_instance(path);
  const conemkt::Tolerances tol = conemkt::Tolerances::defaults();
  const int d = b.pi.d;
  Json payload;
  payload["instance"] = path;
  payload["solution"] = sol_path;

  const Json sj = load_json(sol_path);
  if (!seal_intact(sj))
    return fail("price", kInputError, "solution file content does not match its own digest",
                payload);
  const std::string digest = conemkt::fnv1a_digest(conemkt::instance_to_json(b));
  const std::string claimed = sj.value("instance_digest", "");
  if (claimed != digest) {
    payload["instance_digest"] = digest;
    payload["solution_digest"] = claimed;
    return fail("price", kInputError, "solution does not match the instance digest", payload);
  }
  const conemkt::ParetoSolution sol = conemkt::solution_from_json(sj, b.tree);
  const auto out_path = out.empty() ? sibling(path, ".price_report.json")
                                    : std::filesystem::path(out);
  payload["report"] = out_path.string();

  if (strict) {
    if (delta < 0.0) delta = 1e-3;
    payload["theta"] = theta;
    payload["delta"] = delta;
    const conemkt::NarResult nar = conemkt::check_nar(b.tree, b.pi, tol);
    if (!nar.holds) {
      write_json(out_path, Json{{"verdict", "failed"},
                                {"nar_margin", nar.margin},
                                {"reason", "robust no-arbitrage fails"}});
      return fail("price", kPrecondition,
                  "robust no-arbitrage fails: strict pricing precondition unmet", payload);
    }
    const std::vector<double> floor(static_cast<size_t>(d), delta);
    const auto pipe =
        conemkt::strict_pipeline(b.tree, b.pi, theta, b.x, b.spec, sol.lambda_raw, floor, tol);
    Json rep = conemkt::report_to_json(pipe.report, b.tree);
    rep["z"] = conemkt::price_to_json(pipe.z, b.tree);
    rep["nar_margin"] = pipe.nar.margin;
    rep["gap"] = pipe.solution.gap;
    rep["converged"] = pipe.solution.converged;
    write_json(out_path, rep);
    payload["verdict"] = conemkt::to_string(pipe.report.verdict);
    // an unmet floor voids the hypothesis, so it outranks the verdict: exit 3
    // is reserved for "floor met, strictness still failed"
    if (pipe.report.floor_checked && !pipe.report.floor_met)
      return fail("price", kPrecondition,
                  "terminal floor not met: the strict guarantee does not apply", payload);
    if (!pipe.report.strictly_consistent())
      return fail("price", kVerdictFails, "strict consistency not met", payload);
    return emit("price", kOk, payload);
  }

  const conemkt::PriceProcess z = conemkt::price_from_maximizer(b.tree, b.spec, sol);
  std::vector<double> floor;
  const std::vector<double>* floor_ptr = nullptr;
  if (delta > 0.0) {
    floor.assign(static_cast<size_t>(d), delta);
    floor_ptr = &floor;
    payload["delta"] = delta;
  }
  const auto rep =
      conemkt::verify_consistency(z, b.tree, b.pi, floor_ptr, &sol.terminal, false, tol);
  Json rj = conemkt::report_to_json(rep, b.tree);
  rj["z"] = conemkt::price_to_json(z, b.tree);
  write_json(out_path, rj);
  payload["verdict"] = conemkt::to_string(rep.verdict);
  if (rep.floor_checked && !rep.floor_met)
    return fail("price", kPrecondition, "terminal floor not met", payload);
  if (!rep.consistent()) return fail("price", kVerdictFails, "consistency not met", payload);
  return emit("price", kOk, payload);
}

int cmd_equivalence(const std::string& seeds, int d, int horizon, int branching, double theta,
                    const std::string& out_dir) {
  conemkt::EquivalenceParams p;
  const auto dots = seeds.find("..");
  try {
    if (dots == std::string::npos) {
      p.seed_begin = p.seed_end = static_cast<unsigned>(std::stoul(seeds));
    } else {
      p.seed_begin = static_cast<unsigned>(std::stoul(seeds.substr(0, dots)));
      p.seed_end = static_cast<unsigned>(std::stoul(seeds.substr(dots + 2)));
    }
  } catch (const std::exception&) {
    return fail("equivalence", kInputError, "--seeds expects s0..s1 or a single seed");
  }
  p.d = d;
  p.horizon = horizon;
  p.branching = branching;
  p.theta = theta;
  p.out_dir = out_dir;
  p.tol = conemkt::Tolerances::defaults();

  const conemkt::EquivalenceResult res = conemkt::run_equivalence(p);

  std::cout << "equivalence over seeds " << p.seed_begin << ".." << p.seed_end << " (theta "
            << theta << ")\n";
  std::cout << "  kind counts:";
  for (const auto& [kind, count] : res.summary["by_kind"].items())
    std::cout << " " << kind << "=" << count.get<int>();
  std::cout << "\n";
  std::cout << "  robust no-arbitrage holds: " << res.summary["nar_holds"].get<int>() << "/"
            << res.outcomes.size() << "\n";
  std::cout << "  strictly consistent prices: " << res.summary["strictly_consistent"].get<int>()
            << ", floor unmet: " << res.summary["floor_unmet"].get<int>() << "\n";
  std::cout << "  disagreements: " << res.disagreements << "\n";

  Json payload;
  payload["summary"] = res.summary;
  if (!out_dir.empty()) payload["records"] = (std::filesystem::path(out_dir) / "records.jsonl").string();
  if (res.disagreements == 0) return emit("equivalence", kOk, payload);
  Json bad = Json::array();
  for (const auto& o : res.outcomes)
    if (!o.agree) bad.push_back(o.seed);
  payload["disagreeing_seeds"] = std::move(bad);
  return fail("equivalence", kDisagreement,
              "verdicts disagree on " + std::to_string(res.disagreements) +
                  " seed(s); forensic dumps written",
              payload);
}

int cmd_gen(unsigned long long seed, const std::string& kind, int d, int horizon, int branching,
            const std::string& out) {
  const conemkt::InstanceBundle b = conemkt::generate_instance(kind, seed, d, horizon, branching);
  const Json j = conemkt::instance_to_json(b);
  const std::string path =
      out.empty() ? "instance_" + kind + "_" + std::to_string(seed) + ".json" : out;
  write_json(path, j);
  Json payload;
  payload["file"] = path;
  payload["kind"] = kind;
  payload["seed"] = seed;
  payload["digest"] = conemkt::fnv1a_digest(j);
  return emit("gen", kOk, payload);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenario-tree markets with proportional transaction costs"};
  app.require_subcommand(1);

  std::string instance_path, report_path, mode, out_path, csv_path, seeds, kind = "roundtrip";
  std::string solution_path, out_dir;
  std::vector<double> lambda;
  int sweep = 0, d = 0, horizon = 0, branching = 0;
  double theta = 0.5, delta = -1.0, gap_tol = -1.0;
  bool strict = false;
  unsigned long long seed = 0;

  auto* validate = app.add_subcommand("validate", "run all instance validators");
  validate->add_option("instance", instance_path, "instance JSON file")->required();
  validate->add_option("--report", report_path, "write the validation report here");

  auto* check = app.add_subcommand("check", "decide no-arbitrage or its robust variant");
  check->add_option("instance", instance_path, "instance JSON file")->required();
  check->add_option("--mode", mode, "na or nar")
      ->required()
      ->check(CLI::IsMember({"na", "nar"}));
  check->add_option("--out", out_path, "certificate / price-process file");

  auto* maximize = app.add_subcommand("maximize", "scalarized expected-utility maximization");
  maximize->add_option("instance", instance_path, "instance JSON file")->required();
  auto* lam = maximize->add_option("--lambda", lambda, "weights w1,...,wd")->delimiter(',');
  auto* swp = maximize->add_option("--sweep", sweep, "solve over an n-point weight grid")
                  ->check(CLI::PositiveNumber);
  lam->excludes(swp);
  swp->excludes(lam);
  maximize->add_option("--out", out_path, "solution file (single-weight mode)");
  maximize->add_option("--csv", csv_path, "emit frontier points as CSV (sweep mode)");
  maximize->add_option("--gap-tol", gap_tol, "Frank-Wolfe gap tolerance");

  auto* price = app.add_subcommand("price", "price a maximizer and verify consistency");
  price->add_option("instance", instance_path, "instance JSON file")->required();
  price->add_option("solution", solution_path, "solution JSON file")->required();
  price->add_flag("--strict", strict, "run the shrink-solve-price pipeline");
  price->add_option("--theta", theta, "spread shrink factor in (0,1)");
  price->add_option("--delta", delta, "terminal floor (default 1e-3 in strict mode)");
  price->add_option("--out", out_path, "report file");

  auto* equivalence =
      app.add_subcommand("equivalence", "robust no-arbitrage vs constructive maximizer verdicts");
  equivalence->add_option("--seeds", seeds, "seed range s0..s1")->required();
  equivalence->add_option("--d", d, "assets (0 = per-seed)");
  equivalence->add_option("--T", horizon, "horizon (0 = per-seed)");
  equivalence->add_option("--branching", branching, "branching (0 = per-seed)");
  equivalence->add_option("--theta", theta, "spread shrink factor");
  equivalence->add_option("--out-dir", out_dir, "record directory (append-only)");

  auto* gen = app.add_subcommand("gen", "write a deterministic instance");
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--kind", kind, "free, arbitrage, boundary, or roundtrip")
      ->check(CLI::IsMember({"free", "arbitrage", "boundary", "roundtrip"}));
  gen->add_option("--d", d, "assets")->check(CLI::PositiveNumber);
  gen->add_option("--T", horizon, "horizon")->check(CLI::PositiveNumber);
  gen->add_option("--branching", branching, "branching")->check(CLI::PositiveNumber);
  gen->add_option("--out", out_path, "instance file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cout << Json{{"ok", false},
                      {"exit", kInputError},
                      {"reason", std::string("argument error: ") + e.what()}}
                     .dump()
              << "\n";
    return kInputError;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (validate->parsed()) return cmd_validate(instance_path, report_path);
    if (check->parsed()) return cmd_check(instance_path, mode, out_path);
    if (maximize->parsed()) {
      if (lambda.empty() && sweep == 0)
        return fail("maximize", kInputError, "one of --lambda or --sweep is required");
      return cmd_maximize(instance_path, lambda, sweep, out_path, csv_path, gap_tol);
    }
    if (price->parsed())
      return cmd_price(instance_path, solution_path, strict, theta, delta, out_path);
    if (equivalence->parsed())
      return cmd_equivalence(seeds, d, horizon, branching, theta, out_dir);
    if (gen->parsed()) {
      if (d == 0) d = 2;
      if (horizon == 0) horizon = 1;
      if (branching == 0) branching = 2;
      return cmd_gen(seed, kind, d, horizon, branching, out_path);
    }
    return fail(cmd, kInputError, "unknown subcommand");
  } catch (const Json::parse_error& e) {
    return fail(cmd, kInputError, std::string("parse error: ") + e.what());
  } catch (const conemkt::ValidationError& e) {
    return fail(cmd, kInputError, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(cmd, kInputError, e.what());
  } catch (const std::exception& e) {
    return fail(cmd, kInvalid, e.what());
  }
}
