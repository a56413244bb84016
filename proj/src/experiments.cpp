#include "aoisched/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "aoisched/csv.hpp"
#include "aoisched/fluid.hpp"
#include "aoisched/policy_core.hpp"
#include "aoisched/relaxed_solver.hpp"
#include "aoisched/sim.hpp"
#include "parallel_for.hpp"

namespace aoisched {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

void check_keys(const ordered_json& obj, const std::string& ctx,
                const std::vector<std::string>& allowed) {
  if (!obj.is_object()) fail(ctx + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      fail(ctx + ": unknown key '" + item.key() + "'");
    }
  }
}

const ordered_json& need(const ordered_json& obj, const std::string& ctx, const char* key) {
  if (!obj.contains(key)) fail(ctx + ": missing key '" + std::string(key) + "'");
  return obj.at(key);
}

double need_number(const ordered_json& obj, const std::string& ctx, const char* key) {
  const ordered_json& v = need(obj, ctx, key);
  if (!v.is_number()) fail(ctx + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t need_integer(const ordered_json& obj, const std::string& ctx, const char* key) {
  const ordered_json& v = need(obj, ctx, key);
  if (!v.is_number_integer()) fail(ctx + ": '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

struct CheckCollector {
  bool enabled = false;
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (enabled && !ok) failures.push_back(what);
  }
  bool passed() const { return failures.empty(); }
  ordered_json to_json() const {
    ordered_json j;
    j["enabled"] = enabled;
    j["passed"] = passed();
    j["failures"] = failures;
    return j;
  }
};

}  // namespace

const std::vector<BalphaReferenceRow>& balpha_reference_rows() {
  static const std::vector<BalphaReferenceRow> rows = {
      {0.1, 0.2, 0.7034}, {0.2, 0.4, 0.6250}, {0.3, 0.5, 0.4711}, {0.4, 0.6, 0.3556},
      {0.4, 0.8, 0.5328}, {0.5, 0.8, 0.3612}, {0.5, 1.0, 0.5000}, {0.6, 0.9, 0.2893},
      {0.7, 0.9, 0.1675}, {0.8, 0.9, 0.1351},
  };
  return rows;
}

SystemConfig parse_system(const ordered_json& system) {
  check_keys(system, "system", {"classes", "alpha"});
  const ordered_json& classes = need(system, "system", "classes");
  if (!classes.is_array() || classes.empty()) fail("system: 'classes' must be a non-empty array");
  std::vector<ClassSpec> specs;
  for (const ordered_json& c : classes) {
    check_keys(c, "system.classes[]", {"p", "share"});
    specs.push_back({need_number(c, "class", "p"), need_number(c, "class", "share")});
  }
  return SystemConfig(std::move(specs), need_number(system, "system", "alpha"));
}

std::vector<std::vector<double>> read_proportions_csv(const std::string& path,
                                                      std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) fail("cannot open proportions file: " + path);
  std::vector<std::vector<double>> z(num_classes);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "class,age,mass") {
        fail(path + ":" + std::to_string(line_no) + ": expected header 'class,age,mass'");
      }
      saw_header = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    long cls = 0, age = 0;
    double mass = 0.0;
    try {
      if (!std::getline(row, cell, ',')) throw std::invalid_argument("missing class");
      cls = std::stol(cell);
      if (!std::getline(row, cell, ',')) throw std::invalid_argument("missing age");
      age = std::stol(cell);
      if (!std::getline(row, cell, ',')) throw std::invalid_argument("missing mass");
      mass = std::stod(cell);
    } catch (const std::exception& e) {
      fail(path + ":" + std::to_string(line_no) + ": bad row (" + e.what() + ")");
    }
    if (cls < 1 || static_cast<std::size_t>(cls) > num_classes) {
      fail(path + ":" + std::to_string(line_no) + ": class out of range");
    }
    if (age < 1) fail(path + ":" + std::to_string(line_no) + ": age must be >= 1");
    if (!(mass >= 0.0)) fail(path + ":" + std::to_string(line_no) + ": mass must be >= 0");
    std::vector<double>& cl = z[static_cast<std::size_t>(cls - 1)];
    if (cl.size() < static_cast<std::size_t>(age)) cl.resize(static_cast<std::size_t>(age), 0.0);
    cl[static_cast<std::size_t>(age - 1)] += mass;
  }
  if (!saw_header) fail(path + ":1: empty proportions file");
  return z;
}

void validate_experiment(const ordered_json& spec) {
  if (!spec.is_object()) fail("experiment spec must be a JSON object");
  const ordered_json& kind_v = need(spec, "spec", "kind");
  if (!kind_v.is_string()) fail("spec: 'kind' must be a string");
  const std::string kind = kind_v.get<std::string>();
  if (kind == "balpha_table") {
    check_keys(spec, "balpha_table", {"kind", "paper", "pairs"});
    const bool paper = spec.value("paper", false);
    if (paper == spec.contains("pairs")) {
      fail("balpha_table: give either \"paper\": true or a \"pairs\" array");
    }
    if (spec.contains("pairs")) {
      for (const ordered_json& pr : spec.at("pairs")) {
        if (!pr.is_array() || pr.size() != 2 || !pr[0].is_number() || !pr[1].is_number()) {
          fail("balpha_table: each pair must be [p_lo, p_hi]");
        }
        if (!(pr[0].get<double>() < pr[1].get<double>())) {
          fail("balpha_table: pairs need distinct probabilities, smaller first");
        }
      }
    }
  } else if (kind == "relaxed_solve") {
    check_keys(spec, "relaxed_solve", {"kind", "system"});
    parse_system(need(spec, "relaxed_solve", "system"));
  } else if (kind == "fluid_run") {
    check_keys(spec, "fluid_run", {"kind", "system", "init", "horizon", "tol", "seed",
                                   "truncation_eps"});
    parse_system(need(spec, "fluid_run", "system"));
    const ordered_json& init = need(spec, "fluid_run", "init");
    if (init.is_string()) {
      const std::string s = init.get<std::string>();
      if (s != "zstar" && s != "all_age_one" && s != "random") {
        fail("fluid_run: init must be zstar | all_age_one | random | {\"file\": path}");
      }
    } else if (init.is_object()) {
      check_keys(init, "fluid_run.init", {"file"});
      if (!need(init, "init", "file").is_string()) fail("fluid_run: init.file must be a string");
    } else {
      fail("fluid_run: bad init");
    }
    if (need_integer(spec, "fluid_run", "horizon") < 1) fail("fluid_run: horizon must be >= 1");
    if (!(need_number(spec, "fluid_run", "tol") > 0.0)) fail("fluid_run: tol must be > 0");
  } else if (kind == "sim_sweep") {
    check_keys(spec, "sim_sweep", {"kind", "system", "n_list", "horizon", "seeds", "policy",
                                   "burn_in", "seed", "record_proportions"});
    parse_system(need(spec, "sim_sweep", "system"));
    const ordered_json& n_list = need(spec, "sim_sweep", "n_list");
    if (!n_list.is_array() || n_list.empty()) fail("sim_sweep: n_list must be non-empty");
    if (need_integer(spec, "sim_sweep", "horizon") < 1) fail("sim_sweep: horizon must be >= 1");
    if (need_integer(spec, "sim_sweep", "seeds") < 1) fail("sim_sweep: seeds must be >= 1");
    if (spec.contains("policy")) policy_from_name(spec.at("policy").get<std::string>());
  } else if (kind == "kurtz") {
    check_keys(spec, "kurtz", {"kind", "system", "n_list", "horizon", "seeds", "mu", "seed",
                               "init_file"});
    parse_system(need(spec, "kurtz", "system"));
    const ordered_json& n_list = need(spec, "kurtz", "n_list");
    if (!n_list.is_array() || n_list.empty()) fail("kurtz: n_list must be non-empty");
    if (need_integer(spec, "kurtz", "horizon") < 1) fail("kurtz: horizon must be >= 1");
    if (need_integer(spec, "kurtz", "seeds") < 1) fail("kurtz: seeds must be >= 1");
    const ordered_json& mu = need(spec, "kurtz", "mu");
    if (!(mu.is_number() || (mu.is_string() && mu.get<std::string>() == "auto"))) {
      fail("kurtz: mu must be a number or \"auto\"");
    }
  } else {
    fail("unknown experiment kind: " + kind);
  }
}

ordered_json parse_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open experiment spec: " + path);
  ordered_json spec;
  try {
    spec = ordered_json::parse(in);
  } catch (const std::exception& e) {
    fail(path + ": invalid JSON (" + e.what() + ")");
  }
  validate_experiment(spec);
  return spec;
}

namespace {

std::uint64_t base_seed_of(const ordered_json& spec, const RunOptions& opt) {
  if (opt.seed) return *opt.seed;
  if (spec.contains("seed")) return spec.at("seed").get<std::uint64_t>();
  return 0;
}

ExperimentResult run_balpha(const ordered_json& spec, const RunOptions& opt) {
  const bool paper = spec.value("paper", false);
  ExperimentResult res;
  CheckCollector checks;
  checks.enabled = opt.check;

  std::vector<std::string> header = {"p_lo", "p_hi", "d_value", "b_alpha"};
  if (paper) {
    header.push_back("printed_b_alpha");
    header.push_back("match");
  }
  CsvWriter csv(join_path(opt.out_dir, "balpha.csv"), header, !opt.no_timestamp);
  ordered_json rows = ordered_json::array();
  int matches = 0;

  auto emit = [&](double lo, double hi, std::optional<double> printed) {
    const double d = compute_D(hi, lo);
    const double b = assumption_bound(hi, lo);
    ordered_json row;
    row["p_lo"] = lo;
    row["p_hi"] = hi;
    row["d_value"] = d;
    row["b_alpha"] = b;
    std::vector<std::string> cells = {format_double(lo), format_double(hi),
                                      format_fixed(d, 4), format_fixed(b, 4)};
    if (printed) {
      const bool match = std::abs(b - *printed) <= 5e-4;
      matches += match ? 1 : 0;
      row["printed_b_alpha"] = *printed;
      row["match"] = match;
      cells.push_back(format_fixed(*printed, 4));
      cells.push_back(match ? "match" : "mismatch");
    }
    csv.row(cells);
    rows.push_back(row);
  };

  if (paper) {
    for (const BalphaReferenceRow& r : balpha_reference_rows()) emit(r.p_lo, r.p_hi, r.printed);
    checks.expect(matches == 9, "expected exactly 9 of 10 reference rows to match");
    for (const ordered_json& row : rows) {
      const bool is_odd_row = row["p_lo"].get<double>() == 0.8 && row["p_hi"].get<double>() == 0.9;
      if (is_odd_row) {
        checks.expect(!row["match"].get<bool>(), "the (0.8, 0.9) row unexpectedly matches");
        checks.expect(std::abs(row["b_alpha"].get<double>() - 0.0720) <= 5e-4,
                      "the (0.8, 0.9) row is not 0.0720");
      }
    }
  } else {
    for (const ordered_json& pr : spec.at("pairs")) {
      emit(pr[0].get<double>(), pr[1].get<double>(), std::nullopt);
    }
  }
  csv.write();
  res.output_files.push_back(csv.path());

  res.summary["kind"] = "balpha_table";
  if (!opt.no_timestamp) res.summary["generated_at"] = timestamp_utc();
  res.summary["rows"] = rows;
  if (paper) res.summary["matches"] = matches;
  res.summary["outputs"] = res.output_files;
  res.summary["checks"] = checks.to_json();
  res.checks_passed = checks.passed();
  return res;
}

ordered_json solution_to_json(const RelaxedSolution& sol) {
  ordered_json j;
  ordered_json classes = ordered_json::array();
  for (const ClassSpec& c : sol.classes) {
    classes.push_back({{"p", c.p}, {"share", c.share}});
  }
  j["system"] = {{"classes", classes}, {"alpha", sol.alpha}};
  j["w_star"] = sol.w_star;
  j["theta"] = sol.theta;
  j["c_rp"] = sol.c_rp;
  j["l1"] = sol.l1;
  j["l2"] = sol.l2;
  j["critical_class"] = sol.critical_class < 0 ? -1 : sol.critical_class + 1;
  j["f1"] = sol.f1;
  j["f2"] = sol.f2;
  ordered_json zs = ordered_json::array();
  for (std::size_t k = 0; k < sol.z_star.mass.size(); ++k) {
    zs.push_back({{"mass", sol.z_star.mass[k]},
                  {"tail_mass", sol.z_star.tail_mass[k]},
                  {"tail_first_moment", sol.z_star.tail_first_moment[k]}});
  }
  j["z_star"] = zs;
  return j;
}

ExperimentResult run_relaxed(const ordered_json& spec, const RunOptions& opt) {
  const SystemConfig system = parse_system(spec.at("system"));
  const RelaxedSolution sol = solve_relaxed(system);
  const double residual =
      std::abs(sol.theta * sol.f1 + (1.0 - sol.theta) * sol.f2 - system.alpha());

  ExperimentResult res;
  CheckCollector checks;
  checks.enabled = opt.check;
  checks.expect(residual < 1e-12, "activity constraint residual " + format_double(residual));
  checks.expect(sol.theta > 0.0 && sol.theta <= 1.0, "theta outside (0, 1]");
  for (std::size_t k = 0; k < system.num_classes(); ++k) {
    const int diff = sol.l1[k] - sol.l2[k];
    checks.expect(diff == 0 || diff == 1, "threshold pair differs by more than one");
    checks.expect((diff == 1) == (static_cast<int>(k) == sol.critical_class),
                  "threshold split away from the critical class");
    double mass = sol.z_star.tail_mass[k];
    for (double v : sol.z_star.mass[k]) mass += v;
    checks.expect(std::abs(mass - system.cls(k).share) < 1e-12,
                  "z* class mass does not add up to the share");
  }

  ordered_json sol_json = solution_to_json(sol);
  sol_json["residual"] = residual;
  sol_json["relaxed_cost_by_summation"] = relaxed_cost(sol);
  if (!opt.no_timestamp) sol_json["generated_at"] = timestamp_utc();
  const std::string out = join_path(opt.out_dir, "relaxed.json");
  write_file_atomic(out, sol_json.dump(2) + "\n");
  res.output_files.push_back(out);

  res.summary = sol_json;
  res.summary.erase("z_star");  // keep the console summary short
  res.summary["kind"] = "relaxed_solve";
  res.summary["outputs"] = res.output_files;
  res.summary["checks"] = checks.to_json();
  res.checks_passed = checks.passed();
  return res;
}

ordered_json audit_to_json(const AuditReport& a) {
  ordered_json j;
  j["assertions_enabled"] = a.assertions_enabled;
  j["t_f"] = a.t_f;
  j["t0"] = a.t0;
  j["slots_audited"] = a.slots_audited;
  j["violations"] = a.violation_count;
  ordered_json details = ordered_json::array();
  for (const AuditViolation& v : a.violations) {
    details.push_back({{"slot", v.slot}, {"what", v.what}});
  }
  j["violation_details"] = details;
  j["case_counts"] = {a.case_counts[0], a.case_counts[1], a.case_counts[2], a.case_counts[3],
                      a.case_counts[4]};
  j["final_a1_spread"] = a.final_a1_spread;
  j["max_threshold_seen"] = a.max_threshold_seen;
  return j;
}

ExperimentResult run_fluid_exp(const ordered_json& spec, const RunOptions& opt) {
  const SystemConfig system = parse_system(spec.at("system"));
  const std::int64_t horizon = spec.at("horizon").get<std::int64_t>();
  const double tol = spec.at("tol").get<double>();
  const std::uint64_t seed = base_seed_of(spec, opt);

  FluidState z0 = FluidState::all_age_one(system);
  std::string init_name;
  const ordered_json& init = spec.at("init");
  if (init.is_string()) {
    init_name = init.get<std::string>();
    if (init_name == "zstar") {
      z0 = FluidState::from_fixed_point(system, fixed_point(system));
    } else if (init_name == "random") {
      z0 = FluidState::random(system, seed);
    }
  } else {
    init_name = "file";
    const std::string path = init.at("file").get<std::string>();
    z0.mass = read_proportions_csv(path, system.num_classes());
    z0.lost_mass.assign(system.num_classes(), 0.0);
    for (std::size_t k = 0; k < system.num_classes(); ++k) {
      if (std::abs(z0.class_mass(k) - system.cls(k).share) > 1e-9) {
        fail(path + ": class " + std::to_string(k + 1) + " mass does not equal its share");
      }
    }
  }
  if (spec.contains("truncation_eps")) z0.truncation_eps = spec.at("truncation_eps").get<double>();

  FluidRunOptions fopt;
  fopt.record_decisions = true;
  fopt.record_states = true;
  FluidRunReport report = run_fluid(std::move(z0), system, horizon, tol, fopt);

  CsvWriter csv(join_path(opt.out_dir, "fluid_trajectory.csv"),
                {"t", "class", "age", "mass", "alpha_1", "alpha_2", "l_1", "l_2", "beta", "gamma",
                 "norm_to_zstar"},
                !opt.no_timestamp);
  const std::size_t k_count = system.num_classes();
  for (std::size_t t = 0; t < report.states.size(); ++t) {
    const ScheduleDecision& d = report.decisions[t];
    const std::string a1 = format_double(d.alpha_k[0]);
    const std::string a2 = k_count > 1 ? format_double(d.alpha_k[1]) : "";
    const std::string l1 = std::to_string(d.threshold[0]);
    const std::string l2 = k_count > 1 ? std::to_string(d.threshold[1]) : "";
    const std::string beta = format_double(d.idle_share[0]);
    const std::string gamma = k_count > 1 ? format_double(d.idle_share[1]) : "";
    const std::string norm = format_double(report.distance[t]);
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t i = 0; i < report.states[t][k].size(); ++i) {
        csv.row({std::to_string(t), std::to_string(k + 1), std::to_string(i + 1),
                 format_double(report.states[t][k][i]), a1, a2, l1, l2, beta, gamma, norm});
      }
    }
  }
  csv.write();

  ExperimentResult res;
  CheckCollector checks;
  checks.enabled = opt.check;
  checks.expect(report.converged_at >= 0, "distance never fell below tol");
  if (report.certificate && report.certificate->assumption_ok) {
    checks.expect(report.audit.violation_count == 0, "monotonicity audit found violations");
    checks.expect(report.certificate->alternation_ok, "index alternation fails below t_max+1");
  }

  ordered_json j;
  j["kind"] = "fluid_run";
  if (!opt.no_timestamp) j["generated_at"] = timestamp_utc();
  j["init"] = init_name;
  j["horizon"] = horizon;
  j["tol"] = tol;
  j["converged_at"] = report.converged_at;
  j["monotone_from"] = report.monotone_from;
  j["final_distance"] = report.distance.back();
  if (report.certificate) {
    j["certificate"] = {{"d_value", report.certificate->d_value},
                        {"b_alpha", report.certificate->b_alpha},
                        {"assumption_ok", report.certificate->assumption_ok},
                        {"t_max", report.certificate->t_max},
                        {"alternation_ok", report.certificate->alternation_ok}};
    j["audit"] = audit_to_json(report.audit);
  }
  const std::string report_path = join_path(opt.out_dir, "fluid_report.json");
  write_file_atomic(report_path, j.dump(2) + "\n");
  res.output_files.push_back(csv.path());
  res.output_files.push_back(report_path);

  res.summary = j;
  res.summary["outputs"] = res.output_files;
  res.summary["checks"] = checks.to_json();
  res.checks_passed = checks.passed();
  return res;
}

std::string plot_stub() {
  return R"PY(#!/usr/bin/env python3
"""Static plot of the per-N optimality gap produced by the sweep command.

Reads sim_gap.csv from the directory given as the first argument (default:
the script's own directory) and writes gap.png next to it.
"""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

base = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
rows = []
with open(os.path.join(base, "sim_gap.csv")) as fh:
    for row in csv.DictReader(r for r in fh if not r.startswith("#")):
        rows.append(row)

n = [int(r["n"]) for r in rows]
mean = [float(r["mean_avg_age"]) for r in rows]
se = [float(r["std_err"]) for r in rows]
c_rp = float(rows[0]["c_rp"])

fig, ax = plt.subplots(figsize=(6, 4))
ax.errorbar(n, mean, yerr=[3 * s for s in se], marker="o", label="index policy")
ax.axhline(c_rp, color="k", linestyle="--", label="relaxed optimum")
ax.set_xscale("log", base=2)
ax.set_xlabel("number of users N")
ax.set_ylabel("average age per user")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(base, "gap.png"), dpi=150)
print("wrote", os.path.join(base, "gap.png"))
)PY";
}

ExperimentResult run_sweep(const ordered_json& spec, const RunOptions& opt) {
  const SystemConfig system = parse_system(spec.at("system"));
  std::vector<std::int64_t> n_list;
  for (const ordered_json& v : spec.at("n_list")) n_list.push_back(v.get<std::int64_t>());
  const std::int64_t horizon = spec.at("horizon").get<std::int64_t>();
  const int seeds = static_cast<int>(spec.at("seeds").get<std::int64_t>());
  const Policy policy = policy_from_name(spec.value("policy", std::string("whittle")));
  const double burn_in = spec.value("burn_in", 0.1);
  const bool record = spec.value("record_proportions", false);
  const std::uint64_t base_seed = base_seed_of(spec, opt);

  const RelaxedSolution sol = solve_relaxed(system);

  std::vector<SimMetrics> metrics(n_list.size() * static_cast<std::size_t>(seeds));
  detail::parallel_for(metrics.size(), opt.threads, [&](std::size_t task) {
    const std::size_t ni = task / static_cast<std::size_t>(seeds);
    const std::size_t run = task % static_cast<std::size_t>(seeds);
    SimConfig cfg{system};
    cfg.n_users = n_list[ni];
    cfg.horizon = horizon;
    cfg.seed = derive_run_seed(base_seed, static_cast<std::uint64_t>(n_list[ni]),
                               static_cast<std::uint64_t>(run));
    cfg.policy = policy;
    if (policy == Policy::kMixedThreshold) cfg.relaxed = sol;
    cfg.burn_in_frac = burn_in;
    cfg.require_integral_budget = true;
    if (record && task == 0) {
      cfg.record_proportions = true;
      cfg.proportion_stride = std::max<std::int64_t>(1, horizon / 256);
      cfg.z_star = &sol.z_star;
    }
    metrics[task] = simulate(cfg);
  });

  ExperimentResult res;
  CsvWriter per_seed(join_path(opt.out_dir, "sim_metrics.csv"),
                     {"n", "seed", "policy", "horizon", "avg_age_per_user",
                      "avg_age_per_user_raw", "c_rp", "gap", "exceed_prob"},
                     !opt.no_timestamp);
  CsvWriter gap_csv(join_path(opt.out_dir, "sim_gap.csv"),
                    {"n", "seeds", "mean_avg_age", "std_err", "c_rp", "gap_abs", "gap_rel"},
                    !opt.no_timestamp);

  ordered_json per_n = ordered_json::array();
  std::vector<double> gap_means, gap_ses;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    double sum = 0.0, sum_sq = 0.0;
    for (int run = 0; run < seeds; ++run) {
      const SimMetrics& m = metrics[ni * static_cast<std::size_t>(seeds) +
                                    static_cast<std::size_t>(run)];
      per_seed.row({std::to_string(m.n_users), std::to_string(m.seed), m.policy,
                    std::to_string(m.horizon), format_double(m.avg_age_per_user_burned),
                    format_double(m.avg_age_per_user), format_double(sol.c_rp),
                    format_double(m.avg_age_per_user_burned - sol.c_rp), ""});
      sum += m.avg_age_per_user_burned;
      sum_sq += m.avg_age_per_user_burned * m.avg_age_per_user_burned;
    }
    const double mean = sum / seeds;
    const double var = seeds > 1 ? std::max(0.0, (sum_sq - sum * sum / seeds) / (seeds - 1)) : 0.0;
    const double se = seeds > 1 ? std::sqrt(var / seeds) : 0.0;
    gap_csv.row({std::to_string(n_list[ni]), std::to_string(seeds), format_double(mean),
                 format_double(se), format_double(sol.c_rp), format_double(mean - sol.c_rp),
                 format_double((mean - sol.c_rp) / sol.c_rp)});
    per_n.push_back({{"n", n_list[ni]},
                     {"mean_avg_age", mean},
                     {"std_err", se},
                     {"gap", mean - sol.c_rp}});
    gap_means.push_back(mean - sol.c_rp);
    gap_ses.push_back(se);
  }
  per_seed.write();
  gap_csv.write();
  write_file_atomic(join_path(opt.out_dir, "plot_gap.py"), plot_stub());
  res.output_files = {per_seed.path(), gap_csv.path(), join_path(opt.out_dir, "plot_gap.py")};

  if (record && !metrics.empty() && !metrics[0].snapshots.empty()) {
    CsvWriter snaps(join_path(opt.out_dir, "sim_snapshots.csv"),
                    {"t", "class", "age", "mass", "alpha_1", "alpha_2", "l_1", "l_2", "beta",
                     "gamma", "norm_to_zstar"},
                    !opt.no_timestamp);
    std::size_t norm_idx = 0;
    for (const auto& [slot, snap] : metrics[0].snapshots) {
      std::string norm;
      while (norm_idx < metrics[0].norm_to_zstar.size() &&
             metrics[0].norm_to_zstar[norm_idx].first < slot) {
        ++norm_idx;
      }
      if (norm_idx < metrics[0].norm_to_zstar.size() &&
          metrics[0].norm_to_zstar[norm_idx].first == slot) {
        norm = format_double(metrics[0].norm_to_zstar[norm_idx].second);
      }
      for (std::size_t k = 0; k < snap.size(); ++k) {
        for (std::size_t i = 0; i < snap[k].size(); ++i) {
          if (snap[k][i] == 0.0) continue;
          snaps.row({std::to_string(slot), std::to_string(k + 1), std::to_string(i + 1),
                     format_double(snap[k][i]), "", "", "", "", "", "", norm});
        }
      }
    }
    snaps.write();
    res.output_files.push_back(snaps.path());
  }

  CheckCollector checks;
  checks.enabled = opt.check;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    checks.expect(gap_means[ni] >= -3.0 * gap_ses[ni],
                  "N=" + std::to_string(n_list[ni]) + ": mean age fell below C^RP - 3 SE");
  }
  if (n_list.size() >= 2) {
    checks.expect(gap_means.back() < gap_means.front(),
                  "gap at the largest N is not below the gap at the smallest N");
    int inversions = 0;
    for (std::size_t i = 0; i + 1 < gap_means.size(); ++i) {
      if (gap_means[i + 1] > gap_means[i]) {
        ++inversions;
        const double noise = std::sqrt(gap_ses[i] * gap_ses[i] + gap_ses[i + 1] * gap_ses[i + 1]);
        checks.expect(gap_means[i + 1] - gap_means[i] <= noise,
                      "gap inversion beyond one combined standard error");
      }
    }
    checks.expect(inversions <= 1, "more than one adjacent gap inversion");
  }

  res.summary["kind"] = "sim_sweep";
  if (!opt.no_timestamp) res.summary["generated_at"] = timestamp_utc();
  res.summary["policy"] = policy_name(policy);
  res.summary["horizon"] = horizon;
  res.summary["seeds"] = seeds;
  res.summary["c_rp"] = sol.c_rp;
  res.summary["per_n"] = per_n;
  res.summary["rng_algorithm"] = kRngAlgorithm;
  res.summary["outputs"] = res.output_files;
  res.summary["checks"] = checks.to_json();
  res.checks_passed = checks.passed();
  return res;
}

ExperimentResult run_kurtz(const ordered_json& spec, const RunOptions& opt) {
  const SystemConfig system = parse_system(spec.at("system"));
  std::vector<std::int64_t> n_list;
  for (const ordered_json& v : spec.at("n_list")) n_list.push_back(v.get<std::int64_t>());
  const std::int64_t horizon = spec.at("horizon").get<std::int64_t>();
  const int seeds = static_cast<int>(spec.at("seeds").get<std::int64_t>());
  const std::uint64_t base_seed = base_seed_of(spec, opt);
  std::optional<double> mu;
  if (spec.at("mu").is_number()) mu = spec.at("mu").get<double>();
  std::optional<std::vector<std::vector<double>>> init;
  if (spec.contains("init_file")) {
    init = read_proportions_csv(spec.at("init_file").get<std::string>(), system.num_classes());
  }

  const KurtzTable table =
      kurtz_experiment(system, n_list, horizon, seeds, mu, base_seed, opt.threads, init);

  ExperimentResult res;
  CsvWriter csv(join_path(opt.out_dir, "kurtz.csv"),
                {"n", "seeds", "mu", "exceed_prob", "n_times_prob", "median_sup_dev",
                 "max_sup_dev"},
                !opt.no_timestamp);
  ordered_json rows = ordered_json::array();
  for (const KurtzRow& r : table.rows) {
    csv.row({std::to_string(r.n), std::to_string(r.seeds), format_double(table.mu),
             format_double(r.exceed_prob), format_double(r.n_times_prob),
             format_double(r.median_sup), format_double(r.max_sup)});
    rows.push_back({{"n", r.n},
                    {"exceed_prob", r.exceed_prob},
                    {"n_times_prob", r.n_times_prob},
                    {"median_sup_dev", r.median_sup},
                    {"max_sup_dev", r.max_sup}});
  }
  csv.write();
  res.output_files.push_back(csv.path());

  CheckCollector checks;
  checks.enabled = opt.check;
  std::vector<std::pair<std::int64_t, double>> by_n;
  for (const KurtzRow& r : table.rows) by_n.emplace_back(r.n, r.exceed_prob);
  std::sort(by_n.begin(), by_n.end());
  for (std::size_t i = 0; i + 1 < by_n.size(); ++i) {
    checks.expect(by_n[i + 1].second <= by_n[i].second,
                  "exceedance probability increased from N=" + std::to_string(by_n[i].first) +
                      " to N=" + std::to_string(by_n[i + 1].first));
  }

  res.summary["kind"] = "kurtz";
  if (!opt.no_timestamp) res.summary["generated_at"] = timestamp_utc();
  res.summary["mu"] = table.mu;
  res.summary["mu_was_auto"] = table.mu_was_auto;
  res.summary["horizon"] = horizon;
  res.summary["seeds"] = seeds;
  res.summary["rows"] = rows;
  res.summary["rng_algorithm"] = kRngAlgorithm;
  res.summary["outputs"] = res.output_files;
  res.summary["checks"] = checks.to_json();
  res.checks_passed = checks.passed();
  return res;
}

}  // namespace

ExperimentResult run_experiment(const ordered_json& spec, const RunOptions& options) {
  validate_experiment(spec);
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "balpha_table") return run_balpha(spec, options);
  if (kind == "relaxed_solve") return run_relaxed(spec, options);
  if (kind == "fluid_run") return run_fluid_exp(spec, options);
  if (kind == "sim_sweep") return run_sweep(spec, options);
  return run_kurtz(spec, options);
}

ExperimentResult run_experiment_file(const std::string& path, const RunOptions& options) {
  return run_experiment(parse_experiment_file(path), options);
}

}  // namespace aoisched
