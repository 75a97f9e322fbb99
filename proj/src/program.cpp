#include "gridstore/program.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gridstore {

Cap ProblemSpec::line_cap(const Line& l) const {
  auto it = line_cap_overrides.find(std::pair<int, int>(std::min(l.from, l.to), std::max(l.from, l.to)));
  return it == line_cap_overrides.end() ? l.flow_cap : it->second;
}

Cap ProblemSpec::gen_cap(const Bus& b) const {
  auto it = gen_cap_overrides.find(b.id);
  if (it != gen_cap_overrides.end()) return it->second;
  return b.gen_cap.value_or(Cap::unbounded());
}

const char* to_string(RowSource s) {
  switch (s) {
    case RowSource::GenBounds: return "gen bounds (1)";
    case RowSource::FlowDefinition: return "flow definition (2)";
    case RowSource::FlowCap: return "flow cap (3)";
    case RowSource::StorageBounds: return "storage bounds (5)";
    case RowSource::Budget: return "budget (6)";
    case RowSource::Ramp: return "ramp (7)";
    case RowSource::PowerBalance: return "power balance (8)";
    case RowSource::Periodicity: return "periodicity (10)";
    case RowSource::SlackAngle: return "slack angle";
    case RowSource::PinnedStorage: return "pinned storage";
    case RowSource::CapNonneg: return "storage cap sign";
  }
  return "?";
}

std::string RowTag::describe() const {
  std::ostringstream os;
  os << to_string(source);
  if (bus >= 0) os << " bus " << bus;
  if (line >= 0) os << " line#" << line;
  if (t >= 0) os << " t=" << t + 1;
  if (source == RowSource::Ramp) {
    static const char* kind[] = {" [charge lower]", " [charge upper]",
                                 " [discharge lower]", " [discharge upper]"};
    os << kind[part & 3];
  } else if (source == RowSource::StorageBounds || source == RowSource::GenBounds ||
             source == RowSource::FlowCap) {
    os << (part == kLower ? " [lower]" : " [upper]");
  }
  return os.str();
}

VariableLayout::VariableLayout(const Network& net, int period) : period_(period) {
  line_count_ = static_cast<int>(net.lines.size());
  for (const Bus& b : net.buses) {
    bus_pos_[b.id] = static_cast<int>(bus_ids_.size());
    bus_ids_.push_back(b.id);
  }
  const Index T = period;
  Index next = 0;
  for (const Bus& b : net.buses)
    if (b.is_generator()) {
      gen_offset_[b.id] = next;
      next += T;
    }
  gamma0_ = next;
  next += T * bus_ids_.size();
  delta0_ = next;
  next += T * bus_ids_.size();
  theta0_ = next;
  next += T * bus_ids_.size();
  flow0_ = next;
  next += T * line_count_;
  cap0_ = next;
  next += bus_ids_.size();
  size_ = next;
}

int VariableLayout::position(int bus) const {
  auto it = bus_pos_.find(bus);
  if (it == bus_pos_.end()) throw std::invalid_argument("unknown bus id " + std::to_string(bus));
  return it->second;
}

Index VariableLayout::generation(int bus, int t) const {
  auto it = gen_offset_.find(bus);
  if (it == gen_offset_.end())
    throw std::invalid_argument("bus " + std::to_string(bus) + " is not a generator");
  return it->second + t;
}

Index VariableLayout::charge(int bus, int t) const {
  return gamma0_ + Index(position(bus)) * period_ + t;
}

Index VariableLayout::discharge(int bus, int t) const {
  return delta0_ + Index(position(bus)) * period_ + t;
}

Index VariableLayout::angle(int bus, int t) const {
  return theta0_ + Index(position(bus)) * period_ + t;
}

Index VariableLayout::flow(int line_index, int t) const {
  return flow0_ + Index(line_index) * period_ + t;
}

Index VariableLayout::storage_cap(int bus) const { return cap0_ + position(bus); }

bool VariableLayout::operator==(const VariableLayout& o) const {
  return period_ == o.period_ && line_count_ == o.line_count_ && size_ == o.size_ &&
         bus_ids_ == o.bus_ids_ && gen_offset_ == o.gen_offset_;
}

Index ConvexProgram::find_inequality(RowSource source, int bus, int t, int part) const {
  for (size_t i = 0; i < in_tags.size(); ++i) {
    const RowTag& tag = in_tags[i];
    if (tag.source == source && tag.bus == bus && tag.t == t && tag.part == part)
      return static_cast<Index>(i);
  }
  return -1;
}

namespace {

struct RowBuilder {
  std::vector<Triplet> coeffs;
  std::vector<Real> rhs;
  std::vector<RowTag> tags;

  Index rows() const { return static_cast<Index>(rhs.size()); }
  Index open(Real b, RowTag tag) {
    rhs.push_back(b);
    tags.push_back(tag);
    return rows() - 1;
  }
  void add(Index row, Index col, Real v) {
    coeffs.emplace_back(static_cast<int>(row), static_cast<int>(col), v);
  }
  SpMat matrix(Index cols) const {
    SpMat m(rows(), cols);
    m.setFromTriplets(coeffs.begin(), coeffs.end());
    m.makeCompressed();
    return m;
  }
};

}  // namespace

ConvexProgram build(const Network& net, const DemandSeries& demand,
                    const ProblemSpec& spec) {
  const int T = demand.period;
  if (T < 1) throw std::invalid_argument("period must be >= 1");
  if (spec.budget.is_finite() && spec.budget.value() < 0)
    throw std::invalid_argument("budget must be nonnegative");
  for (int id : spec.pinned_zero) {
    const Bus* b = net.find_bus(id);
    if (!b) throw std::invalid_argument("pinned bus " + std::to_string(id) + " unknown");
    if (!b->is_generator())
      throw std::invalid_argument("pinned bus " + std::to_string(id) + " is not a generator");
  }
  for (const auto& [key, cap] : spec.line_cap_overrides) {
    (void)cap;
    bool found = false;
    for (const Line& l : net.lines)
      if (std::pair<int, int>(std::min(l.from, l.to), std::max(l.from, l.to)) == key) found = true;
    if (!found)
      throw std::invalid_argument("override references unknown line " +
                                  std::to_string(key.first) + "-" + std::to_string(key.second));
  }
  for (const auto& [id, cap] : spec.gen_cap_overrides) {
    (void)cap;
    const Bus* b = net.find_bus(id);
    if (!b || !b->is_generator())
      throw std::invalid_argument("override references unknown generator " + std::to_string(id));
  }

  ConvexProgram prog;
  prog.vars = VariableLayout(net, T);
  const VariableLayout& V = prog.vars;
  prog.hessian_diag = Vec::Zero(V.size());
  prog.linear = Vec::Zero(V.size());
  prog.constant = 0;

  const Real ac = net.storage.eff_charge;       // alpha_gamma
  const Real ad = net.storage.eff_discharge;    // alpha_delta
  const Real ec = net.storage.ramp_charge;      // eps_gamma
  const Real ed = net.storage.ramp_discharge;   // eps_delta
  const int slack = net.effective_slack();

  for (const Bus& b : net.buses) {
    if (!b.is_generator()) continue;
    const CostPoly c = b.cost.value_or(CostPoly{});
    for (int t = 0; t < T; ++t) {
      const Index gi = V.generation(b.id, t);
      prog.hessian_diag[gi] = 2 * c.c2;
      prog.linear[gi] = c.c1;
    }
    prog.constant += T * c.c0;
  }

  RowBuilder eq;
  // flow definition: p - y theta_from + y theta_to = 0
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const Line& l = net.lines[li];
    for (int t = 0; t < T; ++t) {
      Index r = eq.open(0, {RowSource::FlowDefinition, -1, static_cast<int>(li), t});
      eq.add(r, V.flow(static_cast<int>(li), t), 1.0);
      eq.add(r, V.angle(l.from, t), -l.admittance);
      eq.add(r, V.angle(l.to, t), l.admittance);
    }
  }
  // power balance: (g) - gamma + delta - sum of signed flows = d
  for (const Bus& b : net.buses) {
    const Vec* d = demand.column(b.id);
    for (int t = 0; t < T; ++t) {
      const Real rhs = (!b.is_generator() && d) ? (*d)[t] : 0.0;
      Index r = eq.open(rhs, {RowSource::PowerBalance, b.id, -1, t});
      if (b.is_generator()) eq.add(r, V.generation(b.id, t), 1.0);
      eq.add(r, V.charge(b.id, t), -1.0);
      eq.add(r, V.discharge(b.id, t), 1.0);
      for (size_t li = 0; li < net.lines.size(); ++li) {
        const Line& l = net.lines[li];
        if (!l.touches(b.id)) continue;
        eq.add(r, V.flow(static_cast<int>(li), t), l.from == b.id ? -1.0 : 1.0);
      }
    }
  }
  // periodicity: storage level after a full cycle returns to s0
  for (const Bus& b : net.buses) {
    Index r = eq.open(0, {RowSource::Periodicity, b.id, -1, -1});
    for (int t = 0; t < T; ++t) {
      eq.add(r, V.charge(b.id, t), ac);
      eq.add(r, V.discharge(b.id, t), -1.0 / ad);
    }
  }
  for (int t = 0; t < T; ++t) {
    Index r = eq.open(0, {RowSource::SlackAngle, slack, -1, t});
    eq.add(r, V.angle(slack, t), 1.0);
  }
  {
    std::vector<int> pinned = spec.pinned_zero;
    std::sort(pinned.begin(), pinned.end());
    pinned.erase(std::unique(pinned.begin(), pinned.end()), pinned.end());
    for (int id : pinned) {
      Index r = eq.open(0, {RowSource::PinnedStorage, id, -1, -1});
      eq.add(r, V.storage_cap(id), 1.0);
    }
  }

  RowBuilder in;
  // generation bounds
  for (const Bus& b : net.buses) {
    if (!b.is_generator()) continue;
    for (int t = 0; t < T; ++t) {
      Index r = in.open(0, {RowSource::GenBounds, b.id, -1, t, RowTag::kLower});
      in.add(r, V.generation(b.id, t), -1.0);
    }
    const Cap cap = spec.gen_cap(b);
    if (cap.is_finite())
      for (int t = 0; t < T; ++t) {
        Index r = in.open(cap.value(), {RowSource::GenBounds, b.id, -1, t, RowTag::kUpper});
        in.add(r, V.generation(b.id, t), 1.0);
      }
  }
  // flow caps
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const Cap cap = spec.line_cap(net.lines[li]);
    if (!cap.is_finite()) continue;
    for (int t = 0; t < T; ++t) {
      Index r = in.open(cap.value(), {RowSource::FlowCap, -1, static_cast<int>(li), t, RowTag::kUpper});
      in.add(r, V.flow(static_cast<int>(li), t), 1.0);
      r = in.open(cap.value(), {RowSource::FlowCap, -1, static_cast<int>(li), t, RowTag::kLower});
      in.add(r, V.flow(static_cast<int>(li), t), -1.0);
    }
  }
  // charge/discharge sign and ramp coupling to the installed capacity
  for (const Bus& b : net.buses) {
    for (int t = 0; t < T; ++t) {
      Index r = in.open(0, {RowSource::Ramp, b.id, -1, t, RowTag::kChargeLower});
      in.add(r, V.charge(b.id, t), -1.0);
      r = in.open(0, {RowSource::Ramp, b.id, -1, t, RowTag::kChargeUpper});
      in.add(r, V.charge(b.id, t), 1.0);
      in.add(r, V.storage_cap(b.id), -ec);
    }
    for (int t = 0; t < T; ++t) {
      Index r = in.open(0, {RowSource::Ramp, b.id, -1, t, RowTag::kDischargeLower});
      in.add(r, V.discharge(b.id, t), -1.0);
      r = in.open(0, {RowSource::Ramp, b.id, -1, t, RowTag::kDischargeUpper});
      in.add(r, V.discharge(b.id, t), 1.0);
      in.add(r, V.storage_cap(b.id), -ed);
    }
  }
  // storage level bounds, with s_k(t) expanded as the running net inflow
  for (const Bus& b : net.buses) {
    for (int t = 0; t < T; ++t) {
      Index r = in.open(0, {RowSource::StorageBounds, b.id, -1, t, RowTag::kLower});
      for (int tau = 0; tau <= t; ++tau) {
        in.add(r, V.charge(b.id, tau), -ac);
        in.add(r, V.discharge(b.id, tau), 1.0 / ad);
      }
      r = in.open(0, {RowSource::StorageBounds, b.id, -1, t, RowTag::kUpper});
      for (int tau = 0; tau <= t; ++tau) {
        in.add(r, V.charge(b.id, tau), ac);
        in.add(r, V.discharge(b.id, tau), -1.0 / ad);
      }
      in.add(r, V.storage_cap(b.id), -1.0);
    }
  }
  for (const Bus& b : net.buses) {
    Index r = in.open(0, {RowSource::CapNonneg, b.id, -1, -1});
    in.add(r, V.storage_cap(b.id), -1.0);
  }
  if (spec.budget.is_finite()) {
    Index r = in.open(spec.budget.value(), {RowSource::Budget, -1, -1, -1});
    for (const Bus& b : net.buses) in.add(r, V.storage_cap(b.id), 1.0);
  }

  prog.eq_mat = eq.matrix(V.size());
  prog.eq_rhs = Eigen::Map<const Vec>(eq.rhs.data(), eq.rhs.size());
  prog.eq_tags = std::move(eq.tags);
  prog.in_mat = in.matrix(V.size());
  prog.in_rhs = Eigen::Map<const Vec>(in.rhs.data(), in.rhs.size());
  prog.in_tags = std::move(in.tags);
  return prog;
}

Real eval_objective(const ConvexProgram& prog, const Eigen::Ref<const Vec>& x) {
  if (x.size() != prog.num_vars())
    throw std::invalid_argument("objective: point has wrong dimension");
  return 0.5 * x.dot(prog.hessian_diag.cwiseProduct(x)) + prog.linear.dot(x) +
         prog.constant;
}

FeasibilityReport residuals(const ConvexProgram& prog, const Eigen::Ref<const Vec>& x,
                            Real tol) {
  if (x.size() != prog.num_vars())
    throw std::invalid_argument("residuals: point has wrong dimension");
  FeasibilityReport rep;
  rep.tol = tol;
  const Vec eq_res = prog.eq_mat * x - prog.eq_rhs;
  const Vec in_res = prog.in_mat * x - prog.in_rhs;
  for (Index i = 0; i < eq_res.size(); ++i) {
    rep.max_violation = std::max(rep.max_violation, std::abs(eq_res[i]));
    if (std::abs(eq_res[i]) > tol)
      rep.violations.push_back({prog.eq_tags[i], i, true, eq_res[i]});
  }
  for (Index i = 0; i < in_res.size(); ++i) {
    rep.max_violation = std::max(rep.max_violation, std::max(in_res[i], 0.0));
    if (in_res[i] > tol)
      rep.violations.push_back({prog.in_tags[i], i, false, in_res[i]});
  }
  rep.pass = rep.max_violation <= tol;
  return rep;
}

bool FeasibilityReport::flags(RowSource source) const {
  for (const Entry& e : violations)
    if (e.tag.source == source) return true;
  return false;
}

namespace {

void dump_sparse(std::ostream& os, const char* name, const SpMat& m) {
  os << "# " << name << " " << m.rows() << " " << m.cols() << "\n";
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

void dump_vec(std::ostream& os, const char* name, const Vec& v) {
  os << "# " << name << " " << v.size() << " 1\n";
  for (Index i = 0; i < v.size(); ++i)
    if (v[i] != 0) os << i << " 0 " << v[i] << "\n";
}

}  // namespace

void dump_program(const ConvexProgram& prog, std::ostream& os) {
  os.precision(17);
  os << "# Q " << prog.num_vars() << " " << prog.num_vars() << "\n";
  for (Index i = 0; i < prog.hessian_diag.size(); ++i)
    if (prog.hessian_diag[i] != 0) os << i << " " << i << " " << prog.hessian_diag[i] << "\n";
  dump_vec(os, "c", prog.linear);
  dump_sparse(os, "A_eq", prog.eq_mat);
  dump_vec(os, "b_eq", prog.eq_rhs);
  dump_sparse(os, "A_in", prog.in_mat);
  dump_vec(os, "b_in", prog.in_rhs);
}

}  // namespace gridstore
