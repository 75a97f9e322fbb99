// Command-line front end: solve models, report analytic thresholds, run
// parameter sweeps and verification campaigns.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridstore/analytic.hpp"
#include "gridstore/model_io.hpp"
#include "gridstore/sweep.hpp"

namespace {

using namespace gridstore;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Cap parse_cap_arg(const std::string& text) {
  if (text == "inf") return Cap::unbounded();
  size_t pos = 0;
  const double v = std::stod(text, &pos);
  if (pos != text.size()) throw CliError("not a number: \"" + text + "\"");
  return Cap::finite(v);
}

// f:A-B=VALUE or g:K=VALUE, with VALUE a number or "inf"
void apply_override(ProblemSpec& spec, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || text.size() < 4 || text[1] != ':')
    throw CliError("override must look like f:1-2=9.5 or g:1=10, got \"" + text + "\"");
  const Cap value = parse_cap_arg(text.substr(eq + 1));
  const std::string target = text.substr(2, eq - 2);
  if (text[0] == 'f') {
    const auto dash = target.find('-');
    if (dash == std::string::npos) throw CliError("line override needs two bus ids: " + text);
    const int a = std::stoi(target.substr(0, dash));
    const int b = std::stoi(target.substr(dash + 1));
    spec.line_cap_overrides[{std::min(a, b), std::max(a, b)}] = value;
  } else if (text[0] == 'g') {
    spec.gen_cap_overrides[std::stoi(target)] = value;
  } else {
    throw CliError("override must start with f: or g:, got \"" + text + "\"");
  }
}

std::vector<int> parse_id_list(const std::string& text) {
  std::vector<int> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) ids.push_back(std::stoi(item));
  return ids;
}

// LO:HI:STEP or a comma-separated list
Vec parse_grid(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    std::stringstream ss(text);
    std::string lo_s, hi_s, step_s;
    std::getline(ss, lo_s, ':');
    std::getline(ss, hi_s, ':');
    std::getline(ss, step_s, ':');
    const double lo = std::stod(lo_s), hi = std::stod(hi_s), step = std::stod(step_s);
    if (!(step > 0) || hi < lo) throw CliError("bad grid range: " + text);
    std::vector<double> v;
    for (double x = lo; x <= hi + 1e-12 * (hi - lo + 1); x += step) v.push_back(x);
    return Eigen::Map<const Vec>(v.data(), v.size());
  }
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) v.push_back(std::stod(item));
  if (v.empty()) throw CliError("empty grid");
  return Eigen::Map<const Vec>(v.data(), v.size());
}

SweepParameter parse_sweep_param(const std::string& text) {
  if (text == "budget") return SweepParameter::budget();
  if (text.rfind("f:", 0) == 0) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) throw CliError("sweep line parameter needs f:A-B");
    return SweepParameter::line_cap(std::stoi(text.substr(2, dash - 2)),
                                    std::stoi(text.substr(dash + 1)));
  }
  if (text.rfind("g:", 0) == 0) return SweepParameter::gen_cap(std::stoi(text.substr(2)));
  throw CliError("sweep parameter must be budget, f:A-B, or g:K");
}

std::string fmt12(Real v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw CliError("cannot open output file: " + path);
  return file;
}

std::pair<Network, DemandSeries> load_model(const std::string& path) {
  auto model = load_network_file(path);
  const ValidationReport rep = validate(model.first, model.second);
  if (!rep.ok()) throw CliError("invalid model:\n" + rep.to_string());
  return model;
}

void print_infeasibility_hints(const Network& net, const DemandSeries& demand,
                               const ProblemSpec& spec, std::ostream& err) {
  try {
    const AnalyticReport rep = analyze(net, demand, spec);
    if (rep.f_min) err << "hint: f_min = " << fmt12(*rep.f_min) << "\n";
    if (rep.h_min) err << "hint: h_min = " << fmt12(*rep.h_min) << "\n";
    if (rep.infeasible_for_all_budgets)
      err << "hint: cap below the peak prefix average; infeasible for every budget\n";
  } catch (const std::exception&) {
    // topology or assumptions outside the analytic results; no hints
  }
}

int run_solve(const std::string& model_path, const ProblemSpec& spec, bool csv,
              const std::string& out_path, const std::string& dump_path,
              const SolverConfig& scfg) {
  const auto [net, demand] = load_model(model_path);
  const ConvexProgram prog = build(net, demand, spec);
  if (!dump_path.empty()) {
    std::ofstream dump(dump_path, std::ios::binary);
    if (!dump) throw CliError("cannot open dump file: " + dump_path);
    dump_program(prog, dump);
  }
  const Solution sol = solve(prog, scfg);

  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  const std::string variant =
      spec.pinned_zero.empty() ? "P" : [&] {
        std::string s = "Pi_";
        for (size_t i = 0; i < spec.pinned_zero.size(); ++i)
          s += (i ? "+" : "") + std::to_string(spec.pinned_zero[i]);
        return s;
      }();
  if (csv) {
    os << "param,variant,status,objective,iters,max_residual\n";
    os << (spec.budget.is_finite() ? fmt12(spec.budget.value()) : "inf") << "," << variant
       << "," << to_string(sol.status) << "," << fmt12(sol.objective) << ","
       << sol.iterations << "," << fmt12(sol.primal_residual) << "\n";
  } else {
    os << "status: " << to_string(sol.status) << "\n";
    if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::IterLimit) {
      os << "objective: " << fmt12(sol.objective) << "\n";
      os << "gap: " << fmt12(sol.gap) << "\n";
      os << "max residual: " << fmt12(sol.primal_residual) << "\n";
      const BusPartition part = classify_buses(net);
      const VariableLayout& v = prog.vars;
      os << "storage capacities:\n";
      for (const Bus& b : net.buses)
        os << "  b[" << b.id << "] = " << fmt12(sol.x[v.storage_cap(b.id)]) << "\n";
      os << "generation profiles:\n";
      for (int id : part.generators) {
        os << "  g[" << id << "] =";
        for (int t = 0; t < demand.period; ++t) os << " " << fmt12(sol.x[v.generation(id, t)]);
        os << "\n";
      }
    }
  }
  if (sol.status == SolveStatus::Infeasible) {
    std::cerr << "model infeasible at the given budget/caps\n";
    print_infeasibility_hints(net, demand, spec, std::cerr);
    return kExitInfeasible;
  }
  return kExitOk;
}

int run_analytic(const std::string& model_path, const ProblemSpec& spec, bool csv,
                 const std::string& out_path) {
  const auto [net, demand] = load_model(model_path);
  const AnalyticReport rep = analyze(net, demand, spec);

  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("topology", rep.topology == Topology::SGSL ? "sgsl" : "star");
  if (rep.f_min) rows.emplace_back("f_min", fmt12(*rep.f_min));
  if (rep.infeasible_for_all_budgets) rows.emplace_back("h_min", "infeasible-for-all-budgets");
  if (rep.h_min) rows.emplace_back("h_min", fmt12(*rep.h_min));
  if (rep.h_sat_value) rows.emplace_back("h_sat", fmt12(*rep.h_sat_value));
  if (rep.tau) {
    std::string bp;
    for (size_t i = 0; i < rep.tau->breakpoints.size(); ++i)
      bp += (i ? " " : "") + std::to_string(rep.tau->breakpoints[i]);
    rows.emplace_back("tau", bp);
    std::string av;
    for (Index i = 0; i < rep.tau->averages.size(); ++i)
      av += (i ? " " : "") + fmt12(rep.tau->averages[i]);
    rows.emplace_back("segment_averages", av);
  }
  if (rep.dispatch) {
    std::string g;
    for (Index i = 0; i < rep.dispatch->size(); ++i)
      g += (i ? " " : "") + fmt12((*rep.dispatch)[i]);
    rows.emplace_back("g_unconstrained", g);
  }
  if (csv) {
    os << "key,value\n";
    for (const auto& [k, val] : rows) os << k << "," << val << "\n";
  } else {
    for (const auto& [k, val] : rows) os << k << " = " << val << "\n";
  }
  return rep.infeasible_for_all_budgets ? kExitInfeasible : kExitOk;
}

int run_sweep_cmd(const std::string& model_path, const ProblemSpec& base,
                  const std::string& param, const std::string& grid,
                  const std::vector<std::string>& variant_args, bool csv,
                  const std::string& out_path, const SolverConfig& scfg) {
  const auto [net, demand] = load_model(model_path);
  SweepPlan plan;
  plan.param = parse_sweep_param(param);
  plan.grid = parse_grid(grid);
  plan.solver = scfg;
  for (const std::string& v : variant_args) {
    if (v == "none")
      plan.variants.push_back({});
    else if (v == "single-gens")
      plan.variants.push_back(classify_buses(net).single_connection_generators);
    else if (v.rfind("pin:", 0) == 0) {
      std::vector<int> ids;
      std::stringstream ss(v.substr(4));
      std::string item;
      while (std::getline(ss, item, '+')) ids.push_back(std::stoi(item));
      plan.variants.push_back(ids);
    } else {
      throw CliError("variant must be none, single-gens, or pin:1+2, got \"" + v + "\"");
    }
  }
  if (plan.variants.empty()) plan.variants.push_back({});

  const SweepResult result = run_sweep(net, demand, base, plan);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  if (csv) {
    write_csv(result, os);
  } else {
    for (size_t vi = 0; vi < result.points.size(); ++vi) {
      os << "variant " << result.variant_names[vi] << ":\n";
      for (Index gi = 0; gi < result.grid.size(); ++gi) {
        const SweepPoint& pt = result.points[vi][gi];
        os << "  " << result.param_name << " = " << fmt12(result.grid[gi]) << "  "
           << to_string(pt.status);
        if (pt.status == SolveStatus::Optimal) os << "  objective " << fmt12(pt.objective);
        os << "\n";
      }
    }
  }
  return kExitOk;
}

int run_campaign(const CampaignConfig& cfg, bool csv, const std::string& out_path) {
  const CampaignReport rep = verify_theorem1(cfg);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  if (csv) {
    os << "trial,outcome,p_star,pi_star,detail\n";
    for (const TrialOutcome& t : rep.trials)
      os << t.trial << "," << (t.skipped ? "skipped" : t.passed ? "pass" : "FAIL") << ","
         << fmt12(t.p_star) << "," << fmt12(t.pi_star) << "," << t.detail << "\n";
  } else {
    os << "trials: " << rep.trials.size() << "  passed: " << rep.passed
       << "  skipped: " << rep.skipped << "  failed: " << rep.failed << "\n";
    for (const TrialOutcome& t : rep.trials)
      if (!t.passed && !t.skipped)
        os << "  trial " << t.trial << ": " << t.detail << "\n";
  }
  return rep.ok() ? kExitOk : kExitUsage;
}

int run_counterexample() {
  const CounterexampleReport rep = verify_counterexample();
  std::cout << rep.detail << "\n";
  if (!rep.pass) {
    std::cerr << "counterexample check FAILED\n";
    return kExitUsage;
  }
  std::cout << "counterexample check passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"storage placement on DC power-flow networks"};
  app.require_subcommand(1);

  std::string model_path, budget_arg = "inf", out_path, dump_path, grid_arg, param_arg;
  std::string pin_arg;
  std::string format = "text";
  std::vector<std::string> override_args, variant_args;
  SolverConfig scfg;
  CampaignConfig campaign;

  const auto add_common = [&](CLI::App* cmd, bool with_model) {
    if (with_model) cmd->add_option("model", model_path, "network JSON file")->required();
    cmd->add_option("--format", format, "text or csv")
        ->check(CLI::IsMember({"text", "csv"}));
    cmd->add_option("--output,-o", out_path, "write the report to a file");
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve the placement problem");
  add_common(solve_cmd, true);
  solve_cmd->add_option("--budget", budget_arg, "storage budget h (number or \"inf\")");
  solve_cmd->add_option("--pin-zero", pin_arg, "comma-separated generator ids with b=0");
  solve_cmd->add_option("--override", override_args, "cap override, e.g. f:1-2=9.5 or g:1=10");
  solve_cmd->add_option("--dump-program", dump_path, "write the QP in triplet form");
  solve_cmd->add_option("--tol-gap", scfg.tol_gap, "relative duality-gap tolerance");
  solve_cmd->add_option("--tol-feas", scfg.tol_feas, "feasibility tolerance");

  CLI::App* analytic_cmd =
      app.add_subcommand("analytic", "closed-form thresholds for sgsl/star models");
  add_common(analytic_cmd, true);
  analytic_cmd->add_option("--budget", budget_arg, "storage budget h (number or \"inf\")");
  analytic_cmd->add_option("--override", override_args, "cap override");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "solve across a parameter grid");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--param", param_arg, "budget, f:A-B, or g:K")->required();
  sweep_cmd->add_option("--grid", grid_arg, "LO:HI:STEP or comma-separated values")->required();
  sweep_cmd->add_option("--variant", variant_args,
                        "none, single-gens, or pin:1+2 (repeatable)");
  sweep_cmd->add_option("--budget", budget_arg, "base storage budget");
  sweep_cmd->add_option("--override", override_args, "base cap override");

  CLI::App* verify_cmd =
      app.add_subcommand("verify-theorem1", "random-network equal-cost campaign");
  add_common(verify_cmd, false);
  verify_cmd->add_option("--trials", campaign.trials, "number of instances");
  verify_cmd->add_option("--seed", campaign.seed, "campaign seed");
  verify_cmd->add_option("--max-buses", campaign.max_buses, "bus count bound");
  verify_cmd->add_option("--max-period", campaign.max_period, "cycle length bound");

  CLI::App* counter_cmd =
      app.add_subcommand("counterexample", "reproduce the 3-bus star gap");
  (void)counter_cmd;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    ProblemSpec spec;
    spec.budget = parse_cap_arg(budget_arg);
    if (spec.budget.is_finite() && spec.budget.value() < 0)
      throw CliError("budget must be nonnegative");
    if (!pin_arg.empty()) spec.pinned_zero = parse_id_list(pin_arg);
    for (const std::string& o : override_args) apply_override(spec, o);
    const bool csv = format == "csv";

    if (solve_cmd->parsed())
      return run_solve(model_path, spec, csv, out_path, dump_path, scfg);
    if (analytic_cmd->parsed()) return run_analytic(model_path, spec, csv, out_path);
    if (sweep_cmd->parsed())
      return run_sweep_cmd(model_path, spec, param_arg, grid_arg, variant_args, csv,
                           out_path, scfg);
    if (verify_cmd->parsed()) return run_campaign(campaign, csv, out_path);
    return run_counterexample();
  } catch (const ParseError& e) {
    std::cerr << "parse error";
    if (e.line > 0) std::cerr << " (line " << e.line << ", column " << e.column << ")";
    std::cerr << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
