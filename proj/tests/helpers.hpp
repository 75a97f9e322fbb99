#pragma once

// Shared fixtures: small networks, brute-force oracles, and a deterministic
// uniform generator for property-style tests.

#include <random>
#include <utility>
#include <vector>

#include "gridstore/model.hpp"
#include "gridstore/program.hpp"
#include "gridstore/types.hpp"

namespace gridtest {

using namespace gridstore;

struct TestRng {
  std::mt19937_64 gen;
  explicit TestRng(std::uint64_t seed) : gen(seed) {}
  Real uniform() { return static_cast<Real>(gen() >> 11) * 0x1.0p-53; }
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

inline Bus make_generator(int id, Cap cap, CostPoly cost) {
  Bus b;
  b.id = id;
  b.kind = BusKind::Generator;
  b.gen_cap = cap;
  b.cost = cost;
  return b;
}

inline Bus make_load(int id, bool renewable = false) {
  Bus b;
  b.id = id;
  b.kind = BusKind::Load;
  b.renewable = renewable;
  return b;
}

/// Two buses, one line: generator 1 feeding load 2.
inline std::pair<Network, DemandSeries> make_sgsl(const Vec& d, Cap line_cap,
                                                  Cap gen_cap = Cap::unbounded(),
                                                  CostPoly cost = {1, 0, 0}) {
  Network net;
  net.buses = {make_generator(1, gen_cap, cost), make_load(2)};
  net.lines.push_back({1, 2, 1.0, line_cap});
  net.slack_bus = 1;
  DemandSeries demand;
  demand.period = static_cast<int>(d.size());
  demand.values[2] = d;
  return {std::move(net), std::move(demand)};
}

/// Star: generator 1 at the hub, loads 2..n on their own branches.
inline std::pair<Network, DemandSeries> make_star(const std::vector<Vec>& branch_demands,
                                                  const std::vector<Cap>& branch_caps,
                                                  CostPoly cost = {1, 0, 0}) {
  Network net;
  net.buses.push_back(make_generator(1, Cap::unbounded(), cost));
  DemandSeries demand;
  demand.period = static_cast<int>(branch_demands.front().size());
  for (size_t k = 0; k < branch_demands.size(); ++k) {
    const int id = static_cast<int>(k) + 2;
    net.buses.push_back(make_load(id));
    net.lines.push_back({1, id, 1.0, branch_caps[k]});
    demand.values[id] = branch_demands[k];
  }
  net.slack_bus = 1;
  return {std::move(net), std::move(demand)};
}

/// Seven buses mirroring the sample mesh: generators 1, 2 on single links,
/// generator 7 and the loads 3..6 multiply connected.
inline std::pair<Network, DemandSeries> make_sample_mesh() {
  Network net;
  net.buses = {make_generator(1, Cap::finite(20), {1, 0, 0}),
               make_generator(2, Cap::finite(20), {2, 0, 0}),
               make_load(3),
               make_load(4),
               make_load(5),
               make_load(6),
               make_generator(7, Cap::finite(20), {1, 1, 0})};
  const std::vector<std::pair<int, int>> edges = {{1, 3}, {2, 4}, {3, 4}, {3, 5},
                                                  {4, 6}, {5, 6}, {5, 7}, {6, 7}};
  for (auto [a, b] : edges) net.lines.push_back({a, b, 1.0, Cap::finite(15)});
  net.slack_bus = 1;
  DemandSeries demand;
  demand.period = 3;
  demand.values[3] = (Vec(3) << 2, 3, 1).finished();
  demand.values[4] = (Vec(3) << 1, 2, 2).finished();
  demand.values[5] = (Vec(3) << 3, 1, 2).finished();
  demand.values[6] = (Vec(3) << 2, 2, 3).finished();
  return {std::move(net), std::move(demand)};
}

/// Brute-force prefix-average maximum, summed left to right exactly like the
/// production code.
inline Real oracle_max_prefix_average(const Vec& d) {
  Real best = -1e300, run = 0;
  for (Index t = 1; t <= d.size(); ++t) {
    run += d[t - 1];
    best = std::max(best, run / static_cast<Real>(t));
  }
  return best;
}

/// Brute-force tau construction by literal restatement of the definition.
inline std::vector<int> oracle_tau_breakpoints(const Vec& d) {
  const int T = static_cast<int>(d.size());
  std::vector<int> bp{0};
  int start = 0;
  while (start < T) {
    Real best = -1e300;
    int best_t = start + 1;
    for (int t = start + 1; t <= T; ++t) {
      Real sum = 0;
      for (int tau = start + 1; tau <= t; ++tau) sum += d[tau - 1];
      const Real avg = sum / (t - start);
      if (avg >= best) {
        best = avg;
        best_t = t;
      }
    }
    bp.push_back(best_t);
    start = best_t;
  }
  return bp;
}

/// Brute-force windowed-deficit maximum for the minimum-budget threshold.
inline Real oracle_h_min(const Vec& d, Real cap) {
  const int T = static_cast<int>(d.size());
  Real best = 0;
  for (int t1 = 0; t1 <= T; ++t1)
    for (int t2 = t1 + 1; t2 <= T; ++t2) {
      Real sum = 0;
      for (int tau = t1 + 1; tau <= t2; ++tau) sum += d[tau - 1] - cap;
      best = std::max(best, sum);
    }
  return best;
}

inline Vec random_demand(TestRng& rng, int T, Real lo = 0, Real hi = 10) {
  Vec d(T);
  for (int t = 0; t < T; ++t) d[t] = rng.uniform(lo, hi);
  return d;
}

}  // namespace gridtest
