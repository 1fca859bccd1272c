#include "teamsort/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "teamsort/empirics.hpp"
#include "teamsort/errors.hpp"
#include "teamsort/figure_fixture.hpp"
#include "teamsort/inference.hpp"
#include "teamsort/matchset.hpp"
#include "teamsort/numeric.hpp"
#include "teamsort/verify.hpp"

namespace teamsort::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string summary;
};

struct Outcome {
  json results = json::object();
  std::vector<std::string> outputs;
  int code = kOk;
  std::string status = "ok";
  std::string message;
};

void write_text(const std::string& path, const std::string& text, Outcome& o) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path);
  f << text;
  if (!f) throw FormatError("failed writing " + path);
  o.outputs.push_back(path);
}

// Output files go into an existing directory; figures create theirs.
void check_output_file(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw FormatError("output directory does not exist: " + parent.string());
  }
}

void check_input_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw FormatError("input file does not exist: " + path);
}

std::string num(double v) { return numeric::format_number(v); }

std::string summary_path(const std::string& command, const Common& c) {
  if (!c.summary.empty()) return c.summary;
  if (command == "figures") return (fs::path(c.out) / "summary.json").string();
  return fs::path(c.out).replace_extension(".summary.json").string();
}

json row_json(const Row& r) { return json(r); }

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string dist = "uniform";
  int n_w = 2;
  double C_w = 0.0;
  std::optional<double> min_wage;
};

EquilibriumSolution solve_with_policy(const TypeDistribution& d, int n_w, double C_w,
                                      std::optional<double> min_wage) {
  auto eq = EquilibriumSolution::solve(d, n_w, C_w);
  // wages fall with the level, so the smallest wage sits at the top of the support
  if (min_wage) eq = eq.with_wage_constant(*min_wage - eq.integral_m(d.hi()));
  return eq;
}

json equilibrium_summary(const EquilibriumSolution& eq) {
  json j;
  j["dist"] = eq.dist().describe();
  j["n_w"] = eq.n_w();
  j["p_low"] = eq.p_low();
  j["p_high"] = eq.p_high();
  j["C"] = eq.C();
  j["C_w"] = eq.C_w();
  j["C_v"] = eq.C_v();
  j["level_low"] = eq.level_low();
  j["level_high"] = eq.level_high();
  j["degenerate"] = eq.degenerate();
  j["planner_output"] = eq.planner_output();
  j["min_wage"] = eq.wage(eq.dist().hi());
  const auto& a = eq.assumptions();
  j["assumptions"] = {{"xfx_monotone", a.xfx_monotone},
                      {"xfx_monotone_on_middle", a.xfx_monotone_on_middle},
                      {"L_concave_on_third", a.L_concave_on_third}};
  const auto ex = check_existence(eq);
  j["existence"] = {{"vacuous", ex.vacuous}, {"holds", ex.holds}};
  return j;
}

Outcome do_solve(const SolveArgs& a, const Common& c) {
  Outcome o;
  check_output_file(c.out);
  const auto eq = solve_with_policy(parse_dist_spec(a.dist), a.n_w, a.C_w, a.min_wage);
  write_text(c.out, eq.to_json(), o);
  o.results = equilibrium_summary(eq);
  o.message = "p_low=" + num(eq.p_low()) + " C=" + num(eq.C()) + " C_w=" + num(eq.C_w());
  return o;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string eq;
  int m = 3000;
  double tol_mix = 1e-3;
  int max_sweeps = 200;
};

Outcome do_sample(const SampleArgs& a, const Common& c) {
  Outcome o;
  check_input_file(a.eq);
  check_output_file(c.out);
  const auto eq = EquilibriumSolution::load_json(a.eq);
  const auto s = sample_assignment(eq, a.m, c.seed, {a.tol_mix, a.max_sweeps});
  write_text(c.out, s.to_csv(), o);
  o.results["mixing"] = json::parse(s.diagnostics_json());
  o.results["max_ks"] = s.max_ks(eq.dist());
  o.message = std::to_string(s.triplets.size()) + " triplets, log spread " + num(s.mixing.log_spread);
  return o;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string eq;
  std::string sample;
  int m = 3000;
  int grid = 64;
  std::optional<double> tol_surplus;
  double tol_gap = 1e-3;
};

AssignmentSample sample_or_load(const EquilibriumSolution& eq, const std::string& path, int m,
                                std::uint64_t seed) {
  if (path.empty()) return sample_assignment(eq, m, seed);
  auto s = AssignmentSample::load_csv(path);
  if (s.n_w != eq.n_w()) throw FormatError("sample team size does not match the equilibrium");
  return s;
}

Outcome do_verify(const VerifyArgs& a, const Common& c) {
  Outcome o;
  check_input_file(a.eq);
  if (!a.sample.empty()) check_input_file(a.sample);
  check_output_file(c.out);
  const auto eq = EquilibriumSolution::load_json(a.eq);
  const auto s = sample_or_load(eq, a.sample, a.m, c.seed);
  CertificateOptions opts;
  opts.tol_surplus = a.tol_surplus;
  opts.tol_gap = a.tol_gap;
  const auto rep = verify_certificate(eq, s, a.grid, opts);
  write_text(c.out, rep.to_json(), o);
  o.results = json::parse(rep.to_json());
  o.message = std::string(rep.pass ? "certificate passes" : "certificate FAILS") + ": grid surplus " +
              num(rep.max_surplus_on_grid) + ", gap " + num(rep.duality_gap);
  if (!rep.pass) {
    o.code = kSolverFailure;
    o.status = "certificate_failed";
  }
  return o;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string earnings;
  std::optional<double> ode_eps;
  int ode_steps = 20000;
  std::string eq_out;
};

Outcome do_infer(const InferArgs& a, const Common& c) {
  Outcome o;
  check_input_file(a.earnings);
  check_output_file(c.out);
  if (!a.eq_out.empty()) check_output_file(a.eq_out);
  const auto profile = EarningsProfile::load_csv(a.earnings);
  const auto shape = check_earnings_shape(profile);
  const auto r = infer_distribution(profile);
  write_text(c.out, r.dist.to_csv(), o);
  o.results = json::parse(r.to_json());
  o.results["shape"] = {{"monotone", shape.monotone},
                        {"convex", shape.convex},
                        {"worst_convexity", shape.worst_convexity}};
  if (a.ode_eps) {
    const auto ode = infer_distribution_ode(profile, *a.ode_eps, a.ode_steps);
    o.results["ode"] = {{"epsilon", ode.epsilon},
                        {"steps", ode.steps},
                        {"p_low", ode.p_low},
                        {"u_at_zero", ode.u_at_zero},
                        {"sup_deviation", ode.sup_deviation}};
  }
  if (!a.eq_out.empty()) {
    const auto eq = EquilibriumSolution::solve(r.dist, 2, r.C_w);
    write_text(a.eq_out, eq.to_json(), o);
  }
  o.message = "C_w=" + num(r.C_w) + " p_low=" + num(r.p_low) + " C=" + num(r.C);
  return o;
}

// ---------------------------------------------------------------- earnings

struct EarningsArgs {
  std::string eq;
  int points = 2001;
};

Outcome do_earnings(const EarningsArgs& a, const Common& c) {
  Outcome o;
  check_input_file(a.eq);
  check_output_file(c.out);
  const auto eq = EquilibriumSolution::load_json(a.eq);
  const auto profile = EarningsProfile::from_equilibrium(eq, a.points);
  write_text(c.out, profile.to_csv(), o);
  o.results["points"] = profile.p.size();
  o.results["top_earnings"] = profile.e.front();
  o.results["bottom_earnings"] = profile.e.back();
  o.message = std::to_string(profile.p.size()) + " percentiles";
  return o;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string eq;
  std::string sample;
  int m = 3000;
};

Outcome do_simulate(const SimulateArgs& a, const Common& c) {
  Outcome o;
  check_input_file(a.eq);
  if (!a.sample.empty()) check_input_file(a.sample);
  check_output_file(c.out);
  const auto eq = EquilibriumSolution::load_json(a.eq);
  const auto panel = simulate_panel(eq, sample_or_load(eq, a.sample, a.m, c.seed));
  write_text(c.out, panel.to_csv(), o);
  const auto d = variance_decomposition(panel);
  o.results["records"] = panel.records.size();
  o.results["decomposition"] = json::parse(d.to_json());
  o.message = std::to_string(panel.records.size()) + " firm records";
  return o;
}

// ---------------------------------------------------------------- decompose

struct DecomposeArgs {
  std::string panel;
  std::string coworkers;
  std::vector<double> percentiles{10, 25, 50, 75, 90};
};

Outcome do_decompose(const DecomposeArgs& a, const Common& c) {
  Outcome o;
  check_input_file(a.panel);
  check_output_file(c.out);
  if (!a.coworkers.empty()) check_output_file(a.coworkers);
  const auto panel = MatchedPanel::load_csv(a.panel);
  const auto d = variance_decomposition(panel);
  write_text(c.out, d.to_json(), o);
  o.results = json::parse(d.to_json());
  if (!a.coworkers.empty()) {
    std::ostringstream csv;
    csv << "percentile,own_mean_log,coworker_mean_log,half_width,workers,widened\n";
    json rows = json::array();
    for (const auto& r : coworker_table(panel, a.percentiles)) {
      csv << num(r.percentile) << ',' << num(r.own_mean_log) << ',' << num(r.coworker_mean_log) << ','
          << num(r.half_width) << ',' << r.workers << ',' << (r.widened ? 1 : 0) << '\n';
      if (r.widened) rows.push_back(r.percentile);
    }
    write_text(a.coworkers, csv.str(), o);
    o.results["widened_bands"] = rows;
  }
  o.message = "within share " + num(d.within_share());
  return o;
}

// ---------------------------------------------------------------- counterfactual

struct CounterfactualArgs {
  std::string workers;
  std::string firms;
  int n_w = 2;
  std::size_t n_s = 1000;
  double C_w = 1.0;
  int max_sweeps = 200;
  std::string panel_out;
};

Outcome do_counterfactual(const CounterfactualArgs& a, const Common& c) {
  Outcome o;
  check_output_file(c.out);
  if (!a.panel_out.empty()) check_output_file(a.panel_out);
  CounterfactualOptions opts;
  opts.n_w = a.n_w;
  opts.n_s = a.n_s;
  opts.seed = c.seed;
  opts.max_sweeps = a.max_sweeps;
  const auto r = counterfactual(parse_dist_spec(a.workers), parse_dist_spec(a.firms), a.C_w, opts);
  json j = json::parse(r.decomposition.to_json());
  j["aggregate_output"] = r.aggregate_output;
  j["stable"] = r.stable;
  j["stability_violations"] = r.stability_violations;
  j["sweeps"] = r.sweeps;
  j["optimality"] = "heuristic; certified only by pairwise stability";
  write_text(c.out, j.dump(2), o);
  if (!a.panel_out.empty()) write_text(a.panel_out, r.panel.to_csv(), o);
  o.results = j;
  o.message = "within share " + num(r.decomposition.within_share()) + (r.stable ? ", stable" : ", NOT stable");
  if (!r.stable) {
    o.code = kSolverFailure;
    o.status = "unstable_assignment";
  }
  return o;
}

// ---------------------------------------------------------------- figures

struct FiguresArgs {
  std::string eq;
  std::string dist = "figure1";
  int n_w = 2;
  double C_w = 0.0;
  int m = 2000;
  int points = 201;
  int branch_points = 50;
};

std::string figure_one_csv(const EquilibriumSolution& eq, int points) {
  const auto& d = eq.dist();
  std::vector<double> grid;
  for (int k = 0; k < points; ++k) grid.push_back(static_cast<double>(k) / (points - 1));
  grid.push_back(eq.p_low());
  grid.push_back(eq.p_high());
  grid = numeric::sorted_unique(std::move(grid));

  std::ostringstream out;
  out << "p_z,z,region,x_low,x_high,p_x_low,p_x_high\n";
  for (double pz : grid) {
    double lo = 0.0, hi = 0.0;
    std::string region;
    if (pz < eq.p_low()) {
      const auto t = matching_set_point(eq, 2, pz);
      lo = hi = t.levels[0];
      region = "Mz";
    } else if (pz <= eq.p_high()) {
      std::tie(lo, hi) = employable_bounds(eq, d.quantile(pz));
      region = "Mixed";
    } else {
      // the project is the partner on a worker branch
      const auto t = matching_set_point(eq, 0, (1.0 - pz) / 2.0);
      lo = std::min(t.levels[0], t.levels[1]);
      hi = std::max(t.levels[0], t.levels[1]);
      region = "Mx";
    }
    out << num(pz) << ',' << num(d.quantile(pz)) << ',' << region << ',' << num(lo) << ',' << num(hi)
        << ',' << num(d.cdf(lo)) << ',' << num(d.cdf(hi)) << '\n';
  }
  return out.str();
}

std::string figure_two_csv(const EquilibriumSolution& eq, const AssignmentSample& s, int branch_points) {
  const int n = eq.n_w();
  std::ostringstream out;
  for (int i = 0; i < n; ++i) out << "p_x" << i + 1 << ',';
  out << "p_z,";
  for (int i = 0; i < n; ++i) out << 'x' << i + 1 << ',';
  out << "z,branch\n";
  auto emit = [&](const MatchTriplet& t) {
    for (double p : t.percentiles) out << num(p) << ',';
    for (double x : t.levels) out << num(x) << ',';
    out << branch_name(t.branch, n) << '\n';
  };
  for (int b = 0; b <= n; ++b) {
    for (int k = 0; k <= branch_points; ++k) {
      const double p = k == branch_points ? eq.p_low() : eq.p_low() * k / branch_points;
      emit(matching_set_point(eq, b, p));
    }
  }
  for (const auto& t : s.triplets) {
    if (t.branch == kMixedBranch) emit(t);
  }
  return out.str();
}

Outcome do_figures(const FiguresArgs& a, const Common& c) {
  Outcome o;
  if (!a.eq.empty()) check_input_file(a.eq);
  fs::create_directories(c.out);
  const auto eq = a.eq.empty() ? EquilibriumSolution::solve(parse_dist_spec(a.dist), a.n_w, a.C_w)
                               : EquilibriumSolution::load_json(a.eq);
  const auto s = sample_assignment(eq, a.m, c.seed);
  if (eq.n_w() == 2) {
    write_text((fs::path(c.out) / "figure1.csv").string(), figure_one_csv(eq, a.points), o);
  } else {
    o.results["figure1"] = "skipped: employable bands are defined for two-worker teams";
  }
  write_text((fs::path(c.out) / "figure2.csv").string(), figure_two_csv(eq, s, a.branch_points), o);
  double worst = 0.0;
  for (const auto& t : s.triplets) {
    if (t.branch == kMixedBranch) worst = std::max(worst, std::abs(t.loss() - eq.C()));
  }
  o.results["C"] = eq.C();
  o.results["p_low"] = eq.p_low();
  o.results["p_high"] = eq.p_high();
  o.results["max_mixed_loss_deviation"] = worst;
  o.message = "figures written to " + c.out;
  return o;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  std::string problem;
  bool three_team = false;
  std::string objective = "submodular";
};

json assignment_json(const DiscreteProblem& prob, const DiscreteAssignment& a) {
  const auto rows = a.rows(prob);
  json j;
  j["aggregate_output"] = a.aggregate_output;
  j["aggregate_loss"] = a.aggregate_loss;
  j["sigma"] = a.sigma;
  json r = json::array();
  for (const auto& row : rows) r.push_back(row_json(row));
  j["rows"] = r;
  j["stable"] = check_stability(rows).empty();
  j["product_countermonotonic"] = check_product_countermonotonic(rows).ok;
  j["completely_mixed"] = check_complete_mixing(rows, 1e-12).mixed;
  return j;
}

Outcome do_oracle(const OracleArgs& a, const Common& c) {
  Outcome o;
  if (a.three_team == !a.problem.empty()) throw DomainError("give exactly one of --problem or --three-team");
  if (!a.problem.empty()) check_input_file(a.problem);
  check_output_file(c.out);
  const auto prob = a.three_team ? DiscreteProblem::make({0.1, 0.2, 0.4}, {0.1, 0.2, 0.4}, {0.1, 0.2, 0.4})
                               : DiscreteProblem::load_csv(a.problem);
  const Objective obj = a.objective == "supermodular" ? Objective::Supermodular : Objective::Submodular;
  const auto best = brute_force_oracle(prob, obj);
  json j = assignment_json(prob, best);
  j["objective"] = a.objective;
  if (obj == Objective::Submodular) {
    // first worker ascending against everyone else descending
    auto ref = guided_initial(prob, 0.0);
    score(prob, ref);
    json r = assignment_json(prob, ref);
    r["suboptimal"] = ref.aggregate_output < best.aggregate_output - 1e-12;
    r["shortfall"] = best.aggregate_output - ref.aggregate_output;
    j["countermonotone_reference"] = r;
  }
  write_text(c.out, j.dump(2), o);
  o.results = j;
  o.message = "optimal output " + num(best.aggregate_output);
  return o;
}

// ---------------------------------------------------------------- driver

int exit_for(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const ConfigurationError*>(&e) || dynamic_cast<const CapacityError*>(&e) ||
      dynamic_cast<const InvalidTechnologyError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kValidation;
  }
  return kSolverFailure;
}

// Used when argument parsing itself fails, before option values exist.
std::string fallback_summary(const std::vector<std::string>& args) {
  std::string out, summary, command;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& s = args[i];
    auto value = [&](const std::string& flag) -> std::optional<std::string> {
      if (s == flag && i + 1 < args.size()) return args[i + 1];
      if (s.rfind(flag + "=", 0) == 0) return s.substr(flag.size() + 1);
      return std::nullopt;
    };
    if (auto v = value("--summary")) summary = *v;
    if (auto v = value("--out")) out = *v;
    if (command.empty() && !s.empty() && s[0] != '-') command = s;
  }
  if (!summary.empty()) return summary;
  if (out.empty()) return "teamsort.summary.json";
  if (command == "figures") return (fs::path(out) / "summary.json").string();
  return fs::path(out).replace_extension(".summary.json").string();
}

void write_summary(const std::string& path, const std::string& command, const Outcome& o, std::ostream& err) {
  json j;
  j["command"] = command;
  j["status"] = o.status;
  j["exit_code"] = o.code;
  j["message"] = o.message;
  j["outputs"] = o.outputs;
  j["results"] = o.results;
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    err << "warning: cannot write summary " << path << '\n';
    return;
  }
  f << j.dump(2) << '\n';
}

}  // namespace

TypeDistribution parse_dist_spec(const std::string& spec) {
  auto params = [&](const std::string& body) {
    std::vector<double> v;
    std::stringstream ss(body);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DomainError("bad number in distribution spec: " + spec);
      }
    }
    if (v.size() != 2) throw DomainError("distribution spec needs two parameters: " + spec);
    return v;
  };
  if (spec == "uniform") return TypeDistribution::uniform();
  if (spec == "figure1") return figure_one_distribution();
  if (spec.rfind("uniform:", 0) == 0) {
    const auto v = params(spec.substr(8));
    return TypeDistribution::uniform(v[0], v[1]);
  }
  if (spec.rfind("beta:", 0) == 0) {
    const auto v = params(spec.substr(5));
    return TypeDistribution::beta(v[0], v[1]);
  }
  if (!fs::is_regular_file(spec)) {
    throw DomainError("unknown distribution '" + spec + "' (uniform[:a,b], beta:a,b, figure1, or a p,I CSV)");
  }
  return TypeDistribution::load_csv(spec);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Team sorting with submodular production: equilibrium, certificates, inference, empirics"};
  app.name("teamsort");
  app.set_config("--config", "", "TOML/INI config; [subcommand] sections, flags override");
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::map<std::string, Common> common;
  auto add_common = [&](CLI::App* sub, const std::string& default_out) {
    Common& c = common[sub->get_name()];
    c.out = default_out;
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--out", c.out, "primary output path")->capture_default_str();
    sub->add_option("--summary", c.summary, "summary JSON path (default: next to --out)");
  };
  const auto positive = CLI::PositiveNumber;

  SolveArgs solve;
  auto* s_solve = app.add_subcommand("solve", "solve the closed-form equilibrium");
  s_solve->add_option("--dist", solve.dist, "uniform[:a,b] | beta:a,b | figure1 | knots CSV")->capture_default_str();
  s_solve->add_option("--nw", solve.n_w, "workers per team")->check(CLI::Range(2, 8))->capture_default_str();
  auto* cw_opt = s_solve->add_option("--cw", solve.C_w, "wage of the best worker type")->capture_default_str();
  s_solve->add_option("--min-wage", solve.min_wage, "set C_w so the lowest wage equals this")->excludes(cw_opt);
  add_common(s_solve, "equilibrium.json");

  SampleArgs sample;
  auto* s_sample = app.add_subcommand("sample", "draw an assignment from the matching set");
  s_sample->add_option("--eq", sample.eq, "equilibrium JSON")->required();
  s_sample->add_option("--m", sample.m, "sample size")->check(CLI::Range(10, 10000000))->capture_default_str();
  s_sample->add_option("--tol-mix", sample.tol_mix, "mixing tolerance")->check(positive)->capture_default_str();
  s_sample->add_option("--max-sweeps", sample.max_sweeps)->check(CLI::Range(1, 100000))->capture_default_str();
  add_common(s_sample, "sample.csv");

  VerifyArgs verify;
  auto* s_verify = app.add_subcommand("verify", "check the dual certificate");
  s_verify->add_option("--eq", verify.eq, "equilibrium JSON")->required();
  s_verify->add_option("--sample", verify.sample, "sample CSV (default: draw one)");
  s_verify->add_option("--m", verify.m, "sample size when drawing")->check(CLI::Range(10, 10000000))->capture_default_str();
  s_verify->add_option("--grid", verify.grid, "lattice points per axis")->check(CLI::Range(2, 4096))->capture_default_str();
  s_verify->add_option("--tol-surplus", verify.tol_surplus, "surplus tolerance")->check(positive);
  s_verify->add_option("--tol-gap", verify.tol_gap, "duality gap tolerance")->check(positive)->capture_default_str();
  add_common(s_verify, "certificate.json");

  InferArgs infer;
  auto* s_infer = app.add_subcommand("infer", "recover the type distribution from earnings");
  s_infer->add_option("--earnings", infer.earnings, "p,earnings CSV")->required();
  s_infer->add_option("--ode-eps", infer.ode_eps, "also run the ODE cross-check with this I(0)")->check(positive);
  s_infer->add_option("--ode-steps", infer.ode_steps)->check(CLI::Range(100, 10000000))->capture_default_str();
  s_infer->add_option("--eq-out", infer.eq_out, "write the equilibrium implied by the inferred distribution");
  add_common(s_infer, "inferred_dist.csv");

  EarningsArgs earn;
  auto* s_earn = app.add_subcommand("earnings", "earnings by percentile implied by an equilibrium");
  s_earn->add_option("--eq", earn.eq, "equilibrium JSON")->required();
  s_earn->add_option("--points", earn.points)->check(CLI::Range(3, 10000000))->capture_default_str();
  add_common(s_earn, "earnings.csv");

  SimulateArgs simulate;
  auto* s_sim = app.add_subcommand("simulate", "price a sample into a matched panel");
  s_sim->add_option("--eq", simulate.eq, "equilibrium JSON")->required();
  s_sim->add_option("--sample", simulate.sample, "sample CSV (default: draw one)");
  s_sim->add_option("--m", simulate.m, "sample size when drawing")->check(CLI::Range(10, 10000000))->capture_default_str();
  add_common(s_sim, "panel.csv");

  DecomposeArgs decompose;
  auto* s_dec = app.add_subcommand("decompose", "within/between-firm variance of log earnings");
  s_dec->add_option("--panel", decompose.panel, "panel CSV")->required();
  s_dec->add_option("--coworkers", decompose.coworkers, "also write a coworker table CSV here");
  s_dec->add_option("--percentiles", decompose.percentiles, "coworker table percentiles")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 100.0));
  add_common(s_dec, "decomposition.json");

  CounterfactualArgs cf;
  auto* s_cf = app.add_subcommand("counterfactual", "decomposition under swapped marginals");
  s_cf->add_option("--workers", cf.workers, "worker distribution spec")->required();
  s_cf->add_option("--firms", cf.firms, "project distribution spec")->required();
  s_cf->add_option("--nw", cf.n_w)->check(CLI::Range(2, 8))->capture_default_str();
  s_cf->add_option("--ns", cf.n_s, "teams in the discrete problem")->check(CLI::Range(2, 1000000))->capture_default_str();
  s_cf->add_option("--cw", cf.C_w, "wage at the bottom of the worker support")->capture_default_str();
  s_cf->add_option("--max-sweeps", cf.max_sweeps)->check(CLI::Range(1, 100000))->capture_default_str();
  s_cf->add_option("--panel-out", cf.panel_out, "also write the counterfactual panel");
  add_common(s_cf, "counterfactual.json");

  FiguresArgs fig;
  auto* s_fig = app.add_subcommand("figures", "write figure1.csv and figure2.csv");
  s_fig->add_option("--eq", fig.eq, "equilibrium JSON (default: solve --dist)");
  s_fig->add_option("--dist", fig.dist, "distribution spec when solving")->capture_default_str();
  s_fig->add_option("--nw", fig.n_w)->check(CLI::Range(2, 8))->capture_default_str();
  s_fig->add_option("--cw", fig.C_w)->capture_default_str();
  s_fig->add_option("--m", fig.m, "mixed sample size")->check(CLI::Range(10, 10000000))->capture_default_str();
  s_fig->add_option("--points", fig.points, "project percentiles in figure1")->check(CLI::Range(2, 100000))->capture_default_str();
  add_common(s_fig, ".");

  OracleArgs oracle;
  auto* s_or = app.add_subcommand("oracle", "exact discrete assignment by enumeration");
  s_or->add_option("--problem", oracle.problem, "x1,x2,...,z CSV");
  s_or->add_flag("--three-team", oracle.three_team, "the three-team sample {0.1,0.2,0.4}");
  s_or->add_option("--objective", oracle.objective)
      ->check(CLI::IsMember({"submodular", "supermodular"}))
      ->capture_default_str();
  add_common(s_or, "oracle.json");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    Outcome o;
    o.code = kValidation;
    o.status = "validation_error";
    o.message = e.what();
    write_summary(fallback_summary(args), "", o, err);
    return kValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Common& c = common[command];
  Outcome o;
  try {
    if (command == "solve") o = do_solve(solve, c);
    if (command == "sample") o = do_sample(sample, c);
    if (command == "verify") o = do_verify(verify, c);
    if (command == "infer") o = do_infer(infer, c);
    if (command == "earnings") o = do_earnings(earn, c);
    if (command == "simulate") o = do_simulate(simulate, c);
    if (command == "decompose") o = do_decompose(decompose, c);
    if (command == "counterfactual") o = do_counterfactual(cf, c);
    if (command == "figures") o = do_figures(fig, c);
    if (command == "oracle") o = do_oracle(oracle, c);
    out << command << ": " << o.message << '\n';
    if (o.code != kOk) err << "error: " << o.message << '\n';
  } catch (const std::exception& e) {
    o = Outcome{};
    o.code = exit_for(e);
    o.status = o.code == kValidation ? "validation_error" : "solver_error";
    o.message = e.what();
    if (const auto* se = dynamic_cast<const SolverError*>(&e)) o.results["diagnostics"] = se->diagnostics();
    err << "error: " << e.what() << '\n';
  }
  write_summary(summary_path(command, c), command, o, err);
  return o.code;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace teamsort::cli
