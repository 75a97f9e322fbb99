#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gridstore/model.hpp"
#include "gridstore/types.hpp"

namespace gridstore {

/// Instance parameters layered on top of a network: the storage budget, the
/// pinned-zero set K defining the restricted problem, and per-element cap
/// overrides used by parameter sweeps.
struct ProblemSpec {
  Cap budget = Cap::unbounded();     // h
  std::vector<int> pinned_zero;      // K, generator bus ids with b_i = 0
  std::map<std::pair<int, int>, Cap> line_cap_overrides;  // unordered (from,to)
  std::map<int, Cap> gen_cap_overrides;

  Cap line_cap(const Line& l) const;
  Cap gen_cap(const Bus& b) const;
};

/// Origin of a constraint row, named after the model relation it encodes.
/// Values 1..10 match the formulation's equation numbering.
enum class RowSource {
  GenBounds = 1,      // 0 <= g <= gbar
  FlowDefinition = 2, // p = y (theta_from - theta_to)
  FlowCap = 3,        // |p| <= f
  StorageBounds = 5,  // 0 <= s(t) <= b, with s expanded per its definition
  Budget = 6,         // sum b <= h
  Ramp = 7,           // 0 <= gamma <= eps_c b, 0 <= delta <= eps_d b
  PowerBalance = 8,   // g - d - gamma + delta = sum of outgoing flows
  Periodicity = 10,   // storage level returns to its initial value
  SlackAngle = 11,    // theta_slack = 0
  PinnedStorage = 12, // b_i = 0 for i in K
  CapNonneg = 13,     // b >= 0
};

const char* to_string(RowSource s);

struct RowTag {
  RowSource source = RowSource::PowerBalance;
  int bus = -1;   // bus id when applicable
  int line = -1;  // index into Network::lines when applicable
  int t = -1;     // 0-based time step when applicable
  int part = 0;   // kLower / kUpper for two-sided constraints

  static constexpr int kLower = 0;
  static constexpr int kUpper = 1;
  // ramp rows distinguish the charge/discharge pair via part as well
  static constexpr int kChargeLower = 0;
  static constexpr int kChargeUpper = 1;
  static constexpr int kDischargeLower = 2;
  static constexpr int kDischargeUpper = 3;

  std::string describe() const;
};

/// Deterministic variable indexing for one (network, horizon) pair. Layout
/// depends only on the model, never on the ProblemSpec, so programs built
/// from the same model share coordinates.
class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(const Network& net, int period);

  Index size() const { return size_; }
  int period() const { return period_; }
  int bus_count() const { return static_cast<int>(bus_ids_.size()); }
  int generator_count() const { return static_cast<int>(gen_offset_.size()); }
  int line_count() const { return line_count_; }
  const std::vector<int>& bus_ids() const { return bus_ids_; }

  Index generation(int bus, int t) const;
  Index charge(int bus, int t) const;
  Index discharge(int bus, int t) const;
  Index angle(int bus, int t) const;
  Index flow(int line_index, int t) const;
  Index storage_cap(int bus) const;

  bool operator==(const VariableLayout& o) const;

 private:
  int position(int bus) const;

  int period_ = 0;
  int line_count_ = 0;
  Index size_ = 0;
  std::vector<int> bus_ids_;
  std::map<int, int> bus_pos_;
  std::map<int, Index> gen_offset_;  // bus id -> first g index
  Index gamma0_ = 0, delta0_ = 0, theta0_ = 0, flow0_ = 0, cap0_ = 0;
};

/// Standard-form convex QP
///   minimize    1/2 x' diag(hessian_diag) x + linear' x + constant
///   subject to  eq_mat x = eq_rhs,  in_mat x <= in_rhs
/// with every row tagged by the model relation it came from.
struct ConvexProgram {
  VariableLayout vars;
  Vec hessian_diag;
  Vec linear;
  Real constant = 0;

  SpMat eq_mat;
  Vec eq_rhs;
  std::vector<RowTag> eq_tags;

  SpMat in_mat;
  Vec in_rhs;
  std::vector<RowTag> in_tags;

  // hand-assembled programs may omit the layout
  Index num_vars() const { return vars.size() ? vars.size() : hessian_diag.size(); }
  Index num_eq() const { return eq_rhs.size(); }
  Index num_in() const { return in_rhs.size(); }

  /// First inequality row matching (source, bus, t, part); -1 if absent.
  Index find_inequality(RowSource source, int bus, int t, int part) const;
};

/// Encodes problem P (or its restriction when spec pins buses) as a
/// standard-form QP. Unbounded caps produce no row.
ConvexProgram build(const Network& net, const DemandSeries& demand,
                    const ProblemSpec& spec);

Real eval_objective(const ConvexProgram& prog, const Eigen::Ref<const Vec>& x);

struct FeasibilityReport {
  struct Entry {
    RowTag tag;
    Index row = 0;
    bool equality = false;
    Real violation = 0;  // signed: eq residual, or amount above the bound
  };
  Real max_violation = 0;
  Real tol = 0;
  bool pass = false;
  std::vector<Entry> violations;  // rows exceeding tol

  bool flags(RowSource source) const;
};

/// Signed per-constraint violations of x, with a max-norm summary and a
/// pass/fail verdict at tol.
FeasibilityReport residuals(const ConvexProgram& prog, const Eigen::Ref<const Vec>& x,
                            Real tol);

/// Debug dump of (Q, A_eq, b_eq, A_in, b_in) in a plain-text
/// "row col value" triplet format, one section per matrix.
void dump_program(const ConvexProgram& prog, std::ostream& os);

}  // namespace gridstore
