#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridstore/types.hpp"

namespace gridstore {

enum class BusKind { Generator, Load };

/// Convex nondecreasing generation cost c(g) = c2*g^2 + c1*g + c0 on g >= 0.
/// All coefficients are required nonnegative.
struct CostPoly {
  Real c2 = 0, c1 = 0, c0 = 0;

  Real operator()(Real g) const { return (c2 * g + c1) * g + c0; }
  Real derivative(Real g) const { return 2 * c2 * g + c1; }
  bool strictly_convex() const { return c2 > 0; }
  bool nonnegative() const { return c2 >= 0 && c1 >= 0 && c0 >= 0; }
};

/// A bus is either generation-only or load-only. Generators carry a cap and
/// a cost; loads carry a demand column in the DemandSeries (negative entries
/// allowed only when flagged renewable).
struct Bus {
  int id = 0;
  BusKind kind = BusKind::Load;
  std::optional<Cap> gen_cap;     // generators only
  std::optional<CostPoly> cost;   // generators only
  bool renewable = false;         // loads only

  bool is_generator() const { return kind == BusKind::Generator; }
};

struct Line {
  int from = 0;
  int to = 0;
  Real admittance = 1.0;  // y_kl > 0
  Cap flow_cap;           // f_kl

  bool touches(int bus) const { return from == bus || to == bus; }
  int other(int bus) const { return from == bus ? to : from; }
};

/// Charge/discharge efficiencies and ramp limits (per unit of installed
/// capacity) of the storage technology, shared by all buses.
struct StorageTech {
  Real eff_charge = 1.0;      // alpha_gamma in (0, 1]
  Real eff_discharge = 1.0;   // alpha_delta in (0, 1]
  Real ramp_charge = 1.0;     // eps_gamma in (0, 1/alpha_gamma]
  Real ramp_discharge = 1.0;  // eps_delta in (0, alpha_delta]

  Real roundtrip() const { return eff_charge * eff_discharge; }
  bool lossless() const { return roundtrip() == 1.0; }
  bool unit_ramps() const { return ramp_charge == 1.0 && ramp_discharge == 1.0; }
};

/// Periodic per-bus demand: one column of length `period` per load bus,
/// extended periodically beyond the cycle.
struct DemandSeries {
  int period = 0;
  std::map<int, Vec> values;  // load bus id -> d_k(1..T)

  const Vec* column(int bus) const {
    auto it = values.find(bus);
    return it == values.end() ? nullptr : &it->second;
  }
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  StorageTech storage;
  int slack_bus = -1;  // defaults to the lowest-index generator bus

  const Bus* find_bus(int id) const;
  int bus_position(int id) const;  // index into buses, -1 when absent
  int degree(int id) const;
  std::vector<int> neighbors(int id) const;
  int default_slack() const;  // lowest generator id, -1 if no generator
  int effective_slack() const { return slack_bus >= 0 ? slack_bus : default_slack(); }
};

struct ValidationReport {
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
  bool mentions(const std::string& needle) const;
  std::string to_string() const;
};

/// Checks every model invariant and reports all violations; an empty report
/// means the model is well-formed.
ValidationReport validate(const Network& net, const DemandSeries& demand);

struct BusPartition {
  std::vector<int> generators;                    // N_G
  std::vector<int> loads;                         // N_D
  std::vector<int> single_connection_generators;  // generators of degree 1
};

/// Partitions buses into generators/loads and finds the generator buses with
/// a single connection. Requires a valid network.
BusPartition classify_buses(const Network& net);

}  // namespace gridstore
