#include "gridstore/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace gridstore {

const Bus* Network::find_bus(int id) const {
  for (const Bus& b : buses)
    if (b.id == id) return &b;
  return nullptr;
}

int Network::bus_position(int id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  return -1;
}

int Network::degree(int id) const {
  int d = 0;
  for (const Line& l : lines)
    if (l.touches(id)) ++d;
  return d;
}

std::vector<int> Network::neighbors(int id) const {
  std::vector<int> out;
  for (const Line& l : lines)
    if (l.touches(id)) out.push_back(l.other(id));
  std::sort(out.begin(), out.end());
  return out;
}

int Network::default_slack() const {
  int best = -1;
  for (const Bus& b : buses)
    if (b.is_generator() && (best < 0 || b.id < best)) best = b.id;
  return best;
}

bool ValidationReport::mentions(const std::string& needle) const {
  for (const std::string& p : problems)
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const std::string& p : problems) os << p << "\n";
  return os.str();
}

namespace {

bool connected(const Network& net) {
  if (net.buses.empty()) return false;
  std::set<int> seen;
  std::vector<int> stack{net.buses.front().id};
  while (!stack.empty()) {
    int k = stack.back();
    stack.pop_back();
    if (!seen.insert(k).second) continue;
    for (const Line& l : net.lines)
      if (l.touches(k)) stack.push_back(l.other(k));
  }
  return seen.size() == net.buses.size();
}

}  // namespace

ValidationReport validate(const Network& net, const DemandSeries& demand) {
  ValidationReport rep;
  auto flag = [&rep](const std::string& msg) { rep.problems.push_back(msg); };

  std::set<int> ids;
  bool any_gen = false, any_load = false;
  for (const Bus& b : net.buses) {
    if (!ids.insert(b.id).second) flag("duplicate bus id " + std::to_string(b.id));
    const std::string tag = "bus " + std::to_string(b.id);
    if (b.is_generator()) {
      any_gen = true;
      if (!b.gen_cap) flag(tag + ": generator without gen_cap");
      if (b.gen_cap && b.gen_cap->is_finite() && b.gen_cap->value() < 0)
        flag(tag + ": negative gen_cap");
      if (!b.cost)
        flag(tag + ": generator without cost");
      else if (!b.cost->nonnegative())
        flag(tag + ": cost coefficients must be nonnegative");
      if (demand.column(b.id)) flag(tag + ": bus kind violation (generator with demand)");
      if (b.renewable) flag(tag + ": renewable flag only applies to loads");
    } else {
      any_load = true;
      if (b.gen_cap || b.cost) flag(tag + ": bus kind violation (load with gen_cap/cost)");
      const Vec* d = demand.column(b.id);
      if (!d) {
        flag(tag + ": load without demand column");
      } else {
        if (d->size() != demand.period)
          flag(tag + ": demand column length " + std::to_string(d->size()) +
               " != period " + std::to_string(demand.period));
        if (!b.renewable && d->size() > 0 && d->minCoeff() < 0)
          flag(tag + ": negative demand on non-renewable load");
      }
    }
  }
  if (!any_gen) flag("no generator bus");
  if (!any_load) flag("no load bus");

  if (demand.period < 1) flag("period must be >= 1");
  for (const auto& [id, col] : demand.values) {
    (void)col;
    if (ids.count(id) == 0) flag("demand column for unknown bus " + std::to_string(id));
  }

  std::set<std::pair<int, int>> pairs;
  for (const Line& l : net.lines) {
    std::string tag = "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
    if (l.from == l.to) flag(tag + ": self loop");
    if (ids.count(l.from) == 0 || ids.count(l.to) == 0) flag(tag + ": unknown endpoint");
    auto key = std::minmax(l.from, l.to);
    if (!pairs.insert(key).second) flag(tag + ": duplicate line for bus pair");
    if (!(l.admittance > 0)) flag(tag + ": admittance must be positive");
    if (l.flow_cap.is_finite() && !(l.flow_cap.value() > 0))
      flag(tag + ": flow_cap must be positive");
  }

  if (!net.buses.empty() && !connected(net)) flag("graph not connected");

  const StorageTech& s = net.storage;
  if (!(s.eff_charge > 0 && s.eff_charge <= 1)) flag("storage: eff_charge outside (0,1]");
  if (!(s.eff_discharge > 0 && s.eff_discharge <= 1)) flag("storage: eff_discharge outside (0,1]");
  if (!(s.ramp_charge > 0 && s.ramp_charge <= 1.0 / s.eff_charge))
    flag("storage: ramp_charge outside (0, 1/eff_charge]");
  if (!(s.ramp_discharge > 0 && s.ramp_discharge <= s.eff_discharge))
    flag("storage: ramp_discharge outside (0, eff_discharge]");

  if (net.slack_bus >= 0 && ids.count(net.slack_bus) == 0)
    flag("slack bus " + std::to_string(net.slack_bus) + " not in network");
  if (net.slack_bus < 0 && net.default_slack() < 0 && any_gen)
    flag("no admissible slack bus");

  return rep;
}

BusPartition classify_buses(const Network& net) {
  BusPartition part;
  for (const Bus& b : net.buses) {
    if (b.is_generator()) {
      part.generators.push_back(b.id);
      if (net.degree(b.id) == 1) part.single_connection_generators.push_back(b.id);
    } else {
      part.loads.push_back(b.id);
    }
  }
  std::sort(part.generators.begin(), part.generators.end());
  std::sort(part.loads.begin(), part.loads.end());
  std::sort(part.single_connection_generators.begin(),
            part.single_connection_generators.end());
  return part;
}

}  // namespace gridstore
