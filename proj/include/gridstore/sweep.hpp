#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridstore/model.hpp"
#include "gridstore/program.hpp"
#include "gridstore/qp.hpp"

namespace gridstore {

struct SweepParameter {
  enum class Kind { Budget, LineCap, GenCap };
  Kind kind = Kind::Budget;
  int from = -1, to = -1;  // LineCap endpoints
  int bus = -1;            // GenCap bus

  static SweepParameter budget() { return {}; }
  static SweepParameter line_cap(int from, int to) {
    return {Kind::LineCap, from, to, -1};
  }
  static SweepParameter gen_cap(int bus) { return {Kind::GenCap, -1, -1, bus}; }
  std::string name() const;
};

struct SweepPlan {
  SweepParameter param;
  Vec grid;                                // strictly increasing values
  std::vector<std::vector<int>> variants;  // pinned-zero sets; {} is P itself
  SolverConfig solver;
  int threads = 0;  // 0: hardware count; GRIDSTORE_THREADS caps either way
};

struct SweepPoint {
  SolveStatus status = SolveStatus::IterLimit;
  Real objective = std::numeric_limits<Real>::quiet_NaN();
  int iterations = 0;
  Real max_residual = 0;
};

struct SweepResult {
  std::string param_name;
  Vec grid;
  std::vector<std::string> variant_names;
  std::vector<std::vector<SweepPoint>> points;  // [variant][grid index]

  std::optional<int> first_feasible(int variant) const;
  /// First index from which every later objective stays within rel_tol of
  /// the final one (requires the tail to be Optimal).
  std::optional<int> plateau_index(int variant, Real rel_tol) const;
  /// Discrete midpoint-convexity violations beyond rel_tol.
  int convexity_violations(int variant, Real rel_tol) const;
  int nonincreasing_violations(int variant, Real rel_tol) const;
};

/// One cold-start solve per (grid point, variant), run on a work pool;
/// output ordering and content are independent of scheduling.
SweepResult run_sweep(const Network& net, const DemandSeries& demand,
                      const ProblemSpec& base, const SweepPlan& plan);

/// CSV with header param,variant,status,objective,iters,max_residual and
/// floats printed to 12 significant digits.
void write_csv(const SweepResult& result, std::ostream& os);

/// Random-instance campaign settings. Generator ranges are configuration,
/// not code; the default ranges keep most instances feasible.
struct CampaignConfig {
  std::uint64_t seed = 1;
  int trials = 200;
  int max_buses = 8;
  int max_period = 8;
  int threads = 0;
  Real demand_lo = 0.0, demand_hi = 10.0;
  Real c2_lo = 0.5, c2_hi = 2.0;
  Real cap_factor_lo = 0.5, cap_factor_hi = 1.8;
  Real tol_rel = 1e-6;
  bool check_transfer = true;
  SolverConfig solver;
};

struct TrialOutcome {
  int trial = 0;
  bool skipped = false;
  bool passed = false;
  std::string detail;
  Real p_star = std::numeric_limits<Real>::quiet_NaN();
  Real pi_star = std::numeric_limits<Real>::quiet_NaN();
  Real transfer_residual = 0;
  Real transfer_obj_delta = 0;
};

struct CampaignReport {
  std::vector<TrialOutcome> trials;
  int passed = 0, failed = 0, skipped = 0;
  bool ok() const { return failed == 0; }
};

/// Verifies on seeded random networks that pinning zero storage at every
/// single-connection generator never changes the optimal cost, and
/// (optionally) that the purify + transfer rewrite reproduces a feasible
/// point of the restricted problem at identical cost.
CampaignReport verify_theorem1(const CampaignConfig& cfg);

struct RandomInstance {
  Network net;
  DemandSeries demand;
  ProblemSpec spec;
};

/// Deterministic instance generator behind verify_theorem1; exposed for
/// tests. Every instance is valid and has at least one single-connection
/// generator.
RandomInstance random_instance(std::uint64_t seed, const CampaignConfig& cfg);

/// The 3-bus star with step demands, 9.5 p.u. line ratings, and a quadratic
/// generator; its restricted and unrestricted optima differ at budget 5.
std::pair<Network, DemandSeries> counterexample_network();

struct CounterexampleReport {
  Real p_star = 0, pi_star = 0, gap = 0;
  bool pass = false;
  std::string detail;
};

/// Solves both variants of the 3-bus instance at budget 5 and checks the
/// optimal values 877 and 900.75 to 1e-3.
CounterexampleReport verify_counterexample();

/// Worker count after applying the GRIDSTORE_THREADS cap.
int resolve_threads(int requested);

}  // namespace gridstore
