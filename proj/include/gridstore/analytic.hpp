#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "gridstore/model.hpp"
#include "gridstore/program.hpp"
#include "gridstore/qp.hpp"

namespace gridstore {

/// Horizon partition by iterated maximal prefix averages of demand. Segment
/// averages are nonincreasing; argmax ties resolve to the largest time
/// index, giving maximal segments.
struct TauSegmentation {
  std::vector<int> breakpoints;  // tau_0 = 0 < ... < tau_M = T
  Vec averages;                  // a_m per segment

  int segments() const { return static_cast<int>(averages.size()); }
};

TauSegmentation tau_sequence(const Eigen::Ref<const Vec>& d);

/// Optimal generation for the cap- and budget-free single-line problem:
/// constant at the segment average within every tau segment. Requires a
/// strictly convex cost.
Vec unconstrained_dispatch(const Eigen::Ref<const Vec>& d, const CostPoly& cost);

/// Smallest min{gen cap, line cap} at which the single-generator
/// single-load problem is feasible for budget h.
Real f_min_sgsl(const Eigen::Ref<const Vec>& d, Cap h);

/// Smallest feasible storage budget for cap = min{gen cap, line cap}.
/// Empty when the problem is infeasible for every budget, i.e. when the cap
/// is below the peak prefix average of demand.
std::optional<Real> h_min_sgsl(const Eigen::Ref<const Vec>& d, Real cap);

/// Budget beyond which extra storage cannot reduce the production cost;
/// a function of the demand profile alone.
Real h_sat(const Eigen::Ref<const Vec>& d);

struct HypothesisNotMet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Star-network minimum feasible budget: per-branch window maxima summed
/// over branches. Throws HypothesisNotMet unless every branch cap clears
/// its peak prefix average.
Real h_min_star(const std::vector<Vec>& branch_demands,
                const std::vector<Real>& branch_caps);

/// Rewrites an optimal solution at a single-connection generator bus so
/// that no time step charges and discharges while generating, and the
/// generation profile fits under the connecting line's rating. The
/// objective is unchanged; all other buses are untouched.
Solution purify(const Network& net, const DemandSeries& demand, const ProblemSpec& spec,
                const Solution& sol, int bus);

/// Moves the storage capacity and charge/discharge profiles of a
/// single-connection generator bus onto its unique neighbor, adjusting the
/// connecting flow and the bus angle to keep every balance row exact.
/// Requires the purified bound max_t g_i(t) <= f_ij.
Solution transfer_storage(const Network& net, const DemandSeries& demand,
                          const ProblemSpec& spec, const Solution& sol, int bus);

enum class Topology { SGSL, Star, General };
Topology detect_topology(const Network& net);

struct AnalyticReport {
  Topology topology = Topology::General;
  bool infeasible_for_all_budgets = false;
  std::optional<Real> f_min;
  std::optional<Real> h_min;
  std::optional<Real> h_sat_value;
  std::optional<TauSegmentation> tau;
  std::optional<Vec> dispatch;
};

/// Closed-form thresholds for the supported topologies. Enforces the
/// assumptions they rest on (lossless unit-ramp storage, strictly convex
/// cost) and rejects anything else rather than approximating.
AnalyticReport analyze(const Network& net, const DemandSeries& demand,
                       const ProblemSpec& spec);

}  // namespace gridstore
