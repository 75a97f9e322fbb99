#include "gridstore/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "gridstore/analytic.hpp"

namespace gridstore {

std::string SweepParameter::name() const {
  switch (kind) {
    case Kind::Budget: return "budget";
    case Kind::LineCap: return "f:" + std::to_string(from) + "-" + std::to_string(to);
    case Kind::GenCap: return "g:" + std::to_string(bus);
  }
  return "?";
}

int resolve_threads(int requested) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("GRIDSTORE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

namespace {

/// Runs tasks 0..count-1 on a small pool; results land by index.
void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  threads = std::min(std::max(threads, 1), std::max(count, 1));
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
    });
  for (auto& th : pool) th.join();
}

std::string variant_label(const std::vector<int>& pinned) {
  if (pinned.empty()) return "P";
  std::vector<int> k = pinned;
  std::sort(k.begin(), k.end());
  std::string s = "Pi_";
  for (size_t i = 0; i < k.size(); ++i) {
    if (i) s += "+";
    s += std::to_string(k[i]);
  }
  return s;
}

std::string fmt12(Real v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

SweepResult run_sweep(const Network& net, const DemandSeries& demand,
                      const ProblemSpec& base, const SweepPlan& plan) {
  for (Index i = 0; i + 1 < plan.grid.size(); ++i)
    if (!(plan.grid[i] < plan.grid[i + 1]))
      throw std::invalid_argument("sweep grid must be strictly increasing");

  SweepResult result;
  result.param_name = plan.param.name();
  result.grid = plan.grid;
  const int variants = std::max<size_t>(plan.variants.size(), 1);
  const std::vector<std::vector<int>> pin_sets =
      plan.variants.empty() ? std::vector<std::vector<int>>{{}} : plan.variants;
  for (const auto& k : pin_sets) result.variant_names.push_back(variant_label(k));
  result.points.assign(variants, std::vector<SweepPoint>(plan.grid.size()));

  const int total = variants * static_cast<int>(plan.grid.size());
  std::mutex error_lock;
  std::string error;
  parallel_for(total, resolve_threads(plan.threads), [&](int idx) {
    try {
      const int vi = idx / static_cast<int>(plan.grid.size());
      const int gi = idx % static_cast<int>(plan.grid.size());
      ProblemSpec spec = base;
      spec.pinned_zero = pin_sets[vi];
      const Real value = plan.grid[gi];
      switch (plan.param.kind) {
        case SweepParameter::Kind::Budget:
          spec.budget = Cap::finite(value);
          break;
        case SweepParameter::Kind::LineCap:
          spec.line_cap_overrides[std::pair<int, int>(
              std::min(plan.param.from, plan.param.to),
              std::max(plan.param.from, plan.param.to))] = Cap::finite(value);
          break;
        case SweepParameter::Kind::GenCap:
          spec.gen_cap_overrides[plan.param.bus] = Cap::finite(value);
          break;
      }
      const ConvexProgram prog = build(net, demand, spec);
      const Solution sol = solve(prog, plan.solver);
      SweepPoint& pt = result.points[vi][gi];
      pt.status = sol.status;
      pt.iterations = sol.iterations;
      if (sol.status == SolveStatus::Optimal) {
        pt.objective = sol.objective;
        pt.max_residual = sol.primal_residual;
      } else if (sol.status == SolveStatus::Infeasible && sol.certificate) {
        pt.max_residual = sol.certificate->support;
      } else {
        pt.max_residual = sol.primal_residual;
      }
    } catch (const std::exception& e) {
      const std::lock_guard<std::mutex> hold(error_lock);
      if (error.empty()) error = e.what();
    }
  });
  if (!error.empty()) throw std::invalid_argument("sweep: " + error);
  return result;
}

std::optional<int> SweepResult::first_feasible(int variant) const {
  const auto& row = points.at(variant);
  for (size_t i = 0; i < row.size(); ++i)
    if (row[i].status == SolveStatus::Optimal) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> SweepResult::plateau_index(int variant, Real rel_tol) const {
  const auto& row = points.at(variant);
  if (row.empty() || row.back().status != SolveStatus::Optimal) return std::nullopt;
  const Real last = row.back().objective;
  int idx = static_cast<int>(row.size()) - 1;
  while (idx > 0 && row[idx - 1].status == SolveStatus::Optimal &&
         std::abs(row[idx - 1].objective - last) <= rel_tol * (1 + std::abs(last)))
    --idx;
  return idx;
}

int SweepResult::convexity_violations(int variant, Real rel_tol) const {
  const auto& row = points.at(variant);
  int count = 0;
  for (size_t i = 1; i + 1 < row.size(); ++i) {
    if (row[i - 1].status != SolveStatus::Optimal ||
        row[i].status != SolveStatus::Optimal ||
        row[i + 1].status != SolveStatus::Optimal)
      continue;
    const Real xl = grid[i - 1], xm = grid[i], xr = grid[i + 1];
    const Real lam = (xr - xm) / (xr - xl);
    const Real bound = lam * row[i - 1].objective + (1 - lam) * row[i + 1].objective;
    if (row[i].objective > bound + rel_tol * (1 + std::abs(row[i].objective))) ++count;
  }
  return count;
}

int SweepResult::nonincreasing_violations(int variant, Real rel_tol) const {
  const auto& row = points.at(variant);
  int count = 0;
  for (size_t i = 0; i + 1 < row.size(); ++i) {
    if (row[i].status != SolveStatus::Optimal ||
        row[i + 1].status != SolveStatus::Optimal)
      continue;
    if (row[i + 1].objective > row[i].objective + rel_tol * (1 + std::abs(row[i].objective)))
      ++count;
  }
  return count;
}

void write_csv(const SweepResult& result, std::ostream& os) {
  os << "param,variant,status,objective,iters,max_residual\n";
  for (Index gi = 0; gi < result.grid.size(); ++gi)
    for (size_t vi = 0; vi < result.points.size(); ++vi) {
      const SweepPoint& pt = result.points[vi][gi];
      os << fmt12(result.grid[gi]) << "," << result.variant_names[vi] << ","
         << to_string(pt.status) << "," << fmt12(pt.objective) << "," << pt.iterations
         << "," << fmt12(pt.max_residual) << "\n";
    }
}

namespace {

/// Deterministic uniform helpers on top of the raw 64-bit stream; avoids
/// the implementation-defined std distributions.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  Real uniform() { return static_cast<Real>(gen() >> 11) * 0x1.0p-53; }
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(gen() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(Real p) { return uniform() < p; }
};

}  // namespace

RandomInstance random_instance(std::uint64_t seed, const CampaignConfig& cfg) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 1);
  RandomInstance inst;
  const int n = cfg.max_buses <= 2 ? 2 : rng.uniform_int(2, cfg.max_buses);
  const int T = rng.uniform_int(1, std::max(1, cfg.max_period));
  inst.demand.period = T;

  // random tree on ids 1..n
  std::vector<std::pair<int, int>> edges;
  for (int i = 2; i <= n; ++i) edges.emplace_back(rng.uniform_int(1, i - 1), i);
  std::vector<int> degree(n + 1, 0);
  for (auto [a, b] : edges) {
    ++degree[a];
    ++degree[b];
  }
  // a tree leaf that we reserve as the single-connection generator
  int leaf = n;
  for (int i = n; i >= 1; --i)
    if (degree[i] == 1) {
      leaf = i;
      break;
    }
  // a couple of extra edges, keeping the leaf a leaf
  const int extra = n >= 4 ? rng.uniform_int(0, 2) : 0;
  std::set<std::pair<int, int>> have(edges.begin(), edges.end());
  for (int e = 0; e < extra; ++e)
    for (int attempt = 0; attempt < 8; ++attempt) {
      int a = rng.uniform_int(1, n), b = rng.uniform_int(1, n);
      if (a == b || a == leaf || b == leaf) continue;
      auto key = std::minmax(a, b);
      if (have.count({key.first, key.second})) continue;
      have.insert({key.first, key.second});
      edges.emplace_back(key.first, key.second);
      ++degree[key.first];
      ++degree[key.second];
      break;
    }

  std::vector<bool> is_gen(n + 1, false);
  is_gen[leaf] = true;
  for (int i = 1; i <= n; ++i)
    if (i != leaf) is_gen[i] = rng.chance(0.35);
  bool any_load = false;
  for (int i = 1; i <= n; ++i)
    if (!is_gen[i]) any_load = true;
  if (!any_load) {
    for (auto [a, b] : edges)
      if (a == leaf || b == leaf) {
        is_gen[a == leaf ? b : a] = false;
        break;
      }
  }

  Real total_avg = 0, total_peak = 0;
  int gens = 0;
  for (int i = 1; i <= n; ++i)
    if (is_gen[i]) ++gens;
  for (int i = 1; i <= n; ++i) {
    if (is_gen[i]) continue;
    Vec d(T);
    for (int t = 0; t < T; ++t) d[t] = rng.uniform(cfg.demand_lo, cfg.demand_hi);
    total_avg += d.sum() / T;
    total_peak = std::max(total_peak, d.maxCoeff());
    inst.demand.values[i] = std::move(d);
  }
  if (total_avg <= 0) total_avg = 1;

  for (int i = 1; i <= n; ++i) {
    Bus b;
    b.id = i;
    if (is_gen[i]) {
      b.kind = BusKind::Generator;
      b.gen_cap = rng.chance(0.2)
                      ? Cap::unbounded()
                      : Cap::finite(rng.uniform(0.9, 2.2) * (total_avg / gens) + 0.5);
      b.cost = CostPoly{rng.uniform(cfg.c2_lo, cfg.c2_hi), rng.uniform(0, 1),
                        rng.uniform(0, 0.5)};
    } else {
      b.kind = BusKind::Load;
    }
    inst.net.buses.push_back(b);
  }
  for (auto [a, b] : edges) {
    Line l;
    l.from = a;
    l.to = b;
    l.admittance = rng.uniform(0.5, 2.0);
    l.flow_cap = rng.chance(0.15)
                     ? Cap::unbounded()
                     : Cap::finite(rng.uniform(cfg.cap_factor_lo, cfg.cap_factor_hi) *
                                       total_avg +
                                   0.1);
    inst.net.lines.push_back(l);
  }

  if (rng.chance(0.4)) {
    inst.net.storage = StorageTech{};  // lossless, unit ramps
  } else {
    StorageTech s;
    s.eff_charge = rng.uniform(0.75, 1.0);
    s.eff_discharge = rng.uniform(0.75, 1.0);
    s.ramp_charge = rng.uniform(0.4, 1.0) / s.eff_charge;
    s.ramp_discharge = rng.uniform(0.4, 1.0) * s.eff_discharge;
    inst.net.storage = s;
  }
  inst.net.slack_bus = inst.net.default_slack();
  inst.spec.budget =
      rng.chance(0.15) ? Cap::unbounded() : Cap::finite(rng.uniform(0.0, 0.6 * total_avg));
  return inst;
}

namespace {

void run_trial(const CampaignConfig& cfg, int trial, TrialOutcome& out) {
  const RandomInstance inst = random_instance(cfg.seed + trial, cfg);
  const ValidationReport vr = validate(inst.net, inst.demand);
  if (!vr.ok()) {
    out.detail = "invalid instance: " + vr.to_string();
    return;
  }
  const BusPartition part = classify_buses(inst.net);
  if (part.single_connection_generators.empty()) {
    out.skipped = true;
    out.detail = "no single-connection generator";
    return;
  }

  const ConvexProgram prog_p = build(inst.net, inst.demand, inst.spec);
  const Solution sol_p = solve(prog_p, cfg.solver);
  if (sol_p.status == SolveStatus::Infeasible) {
    out.skipped = true;
    out.detail = "P infeasible";
    return;
  }
  if (sol_p.status != SolveStatus::Optimal) {
    out.detail = std::string("P solve ended ") + to_string(sol_p.status);
    return;
  }
  out.p_star = sol_p.objective;

  ProblemSpec restricted = inst.spec;
  restricted.pinned_zero = part.single_connection_generators;
  const ConvexProgram prog_pi = build(inst.net, inst.demand, restricted);
  const Solution sol_pi = solve(prog_pi, cfg.solver);
  if (sol_pi.status != SolveStatus::Optimal) {
    out.detail = std::string("restricted solve ended ") + to_string(sol_pi.status);
    return;
  }
  out.pi_star = sol_pi.objective;
  if (std::abs(out.p_star - out.pi_star) > cfg.tol_rel * (1 + std::abs(out.p_star))) {
    std::ostringstream os;
    os << "optimal values differ: " << fmt12(out.p_star) << " vs " << fmt12(out.pi_star);
    out.detail = os.str();
    return;
  }

  if (cfg.check_transfer) {
    Solution moved = sol_p;
    for (int bus : part.single_connection_generators) {
      moved = purify(inst.net, inst.demand, inst.spec, moved, bus);
      moved = transfer_storage(inst.net, inst.demand, inst.spec, moved, bus);
      moved.status = SolveStatus::Optimal;
    }
    out.transfer_residual = residuals(prog_pi, moved.x, 0.0).max_violation;
    out.transfer_obj_delta = std::abs(moved.objective - out.p_star);
    if (out.transfer_residual > 1e-8) {
      out.detail = "transferred point violates the restricted program by " +
                   fmt12(out.transfer_residual);
      return;
    }
    if (out.transfer_obj_delta > 1e-9 * (1 + std::abs(out.p_star))) {
      out.detail = "transfer changed the objective by " + fmt12(out.transfer_obj_delta);
      return;
    }
  }
  out.passed = true;
}

}  // namespace

CampaignReport verify_theorem1(const CampaignConfig& cfg) {
  CampaignReport report;
  report.trials.resize(cfg.trials);

  parallel_for(cfg.trials, resolve_threads(cfg.threads), [&](int trial) {
    TrialOutcome& out = report.trials[trial];
    out.trial = trial;
    try {
      run_trial(cfg, trial, out);
    } catch (const std::exception& e) {
      out.passed = false;
      out.skipped = false;
      out.detail = std::string("exception: ") + e.what();
    }
  });

  for (const TrialOutcome& t : report.trials) {
    if (t.skipped)
      ++report.skipped;
    else if (t.passed)
      ++report.passed;
    else
      ++report.failed;
  }
  return report;
}

std::pair<Network, DemandSeries> counterexample_network() {
  Network net;
  Bus gen;
  gen.id = 1;
  gen.kind = BusKind::Generator;
  gen.gen_cap = Cap::unbounded();
  gen.cost = CostPoly{1.0, 0.0, 0.0};
  net.buses.push_back(gen);
  for (int id : {2, 3}) {
    Bus load;
    load.id = id;
    load.kind = BusKind::Load;
    net.buses.push_back(load);
  }
  net.lines.push_back({1, 2, 1.0, Cap::finite(9.5)});
  net.lines.push_back({1, 3, 1.0, Cap::finite(9.5)});
  net.storage = StorageTech{};  // lossless, unit ramps
  net.slack_bus = 1;

  DemandSeries demand;
  demand.period = 4;
  demand.values[2] = (Vec(4) << 9, 10, 0, 10).finished();
  demand.values[3] = (Vec(4) << 0, 10, 10, 10).finished();
  return {std::move(net), std::move(demand)};
}

CounterexampleReport verify_counterexample() {
  CounterexampleReport rep;
  const auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.budget = Cap::finite(5.0);

  const Solution sol_p = solve(build(net, demand, spec));
  ProblemSpec restricted = spec;
  restricted.pinned_zero = {1};
  const Solution sol_pi = solve(build(net, demand, restricted));

  std::ostringstream os;
  if (sol_p.status != SolveStatus::Optimal || sol_pi.status != SolveStatus::Optimal) {
    os << "solves ended " << to_string(sol_p.status) << " / " << to_string(sol_pi.status);
    rep.detail = os.str();
    return rep;
  }
  rep.p_star = sol_p.objective;
  rep.pi_star = sol_pi.objective;
  rep.gap = rep.pi_star - rep.p_star;
  const bool p_ok = std::abs(rep.p_star - 877.0) <= 1e-3;
  const bool pi_ok = std::abs(rep.pi_star - 900.75) <= 1e-3;
  const bool strict = rep.gap > 1e-6;
  rep.pass = p_ok && pi_ok && strict;
  os << "p_* = " << fmt12(rep.p_star) << ", pi_*^{1} = " << fmt12(rep.pi_star)
     << ", gap = " << fmt12(rep.gap);
  if (!rep.pass) os << "  (expected 877 and 900.75 within 1e-3, strict gap)";
  rep.detail = os.str();
  return rep;
}

}  // namespace gridstore
