#include "gridstore/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gridstore {

TauSegmentation tau_sequence(const Eigen::Ref<const Vec>& d) {
  const int T = static_cast<int>(d.size());
  if (T < 1) throw std::invalid_argument("tau_sequence: empty series");
  TauSegmentation seg;
  seg.breakpoints.push_back(0);
  std::vector<Real> avgs;
  int start = 0;
  while (start < T) {
    Real best_avg = -std::numeric_limits<Real>::infinity();
    int best_t = start + 1;
    Real run = 0;
    for (int t = start + 1; t <= T; ++t) {
      run += d[t - 1];
      const Real avg = run / (t - start);
      if (avg >= best_avg) {  // largest maximizing t on ties
        best_avg = avg;
        best_t = t;
      }
    }
    seg.breakpoints.push_back(best_t);
    avgs.push_back(best_avg);
    start = best_t;
  }
  seg.averages = Eigen::Map<const Vec>(avgs.data(), avgs.size());
  return seg;
}

Vec unconstrained_dispatch(const Eigen::Ref<const Vec>& d, const CostPoly& cost) {
  if (!cost.strictly_convex())
    throw std::invalid_argument("unconstrained_dispatch: cost must be strictly convex");
  if (d.size() > 0 && d.minCoeff() < 0)
    throw std::invalid_argument("unconstrained_dispatch: demand must be nonnegative");
  const TauSegmentation seg = tau_sequence(d);
  Vec g(d.size());
  for (int m = 0; m < seg.segments(); ++m)
    for (int t = seg.breakpoints[m]; t < seg.breakpoints[m + 1]; ++t)
      g[t] = seg.averages[m];
  return g;
}

namespace {

Real max_prefix_average(const Eigen::Ref<const Vec>& d) {
  Real best = -std::numeric_limits<Real>::infinity();
  Real run = 0;
  for (Index t = 1; t <= d.size(); ++t) {
    run += d[t - 1];
    best = std::max(best, run / static_cast<Real>(t));
  }
  return best;
}

}  // namespace

Real f_min_sgsl(const Eigen::Ref<const Vec>& d, Cap h) {
  const int T = static_cast<int>(d.size());
  if (T < 1) throw std::invalid_argument("f_min_sgsl: empty series");
  Real best = max_prefix_average(d);
  if (h.is_finite()) {
    for (int t1 = 1; t1 < T; ++t1) {
      Real run = 0;
      for (int t2 = t1 + 1; t2 <= T; ++t2) {
        run += d[t2 - 1];
        best = std::max(best, (run - h.value()) / static_cast<Real>(t2 - t1));
      }
    }
  }
  return best;
}

std::optional<Real> h_min_sgsl(const Eigen::Ref<const Vec>& d, Real cap) {
  const int T = static_cast<int>(d.size());
  if (T < 1) throw std::invalid_argument("h_min_sgsl: empty series");
  if (cap < max_prefix_average(d)) return std::nullopt;  // infeasible for all h
  Real best = 0;  // the positive-part clamp applies per window
  for (int t1 = 0; t1 <= T; ++t1) {
    Real run = 0;
    for (int t2 = t1 + 1; t2 <= T; ++t2) {
      run += d[t2 - 1] - cap;
      best = std::max(best, run);
    }
  }
  return best;
}

Real h_sat(const Eigen::Ref<const Vec>& d) {
  if (d.size() > 0 && d.minCoeff() < 0)
    throw std::invalid_argument("h_sat: demand must be nonnegative");
  const TauSegmentation seg = tau_sequence(d);
  Real best = 0;
  for (int m = 0; m < seg.segments(); ++m) {
    const int lo = seg.breakpoints[m], hi = seg.breakpoints[m + 1];
    Real seg_total = 0;
    for (int t = lo; t < hi; ++t) seg_total += d[t];
    Real prefix = 0;
    for (int t = lo + 1; t <= hi; ++t) {
      prefix += d[t - 1];
      best = std::max(best, seg_total * static_cast<Real>(t - lo) / (hi - lo) - prefix);
    }
  }
  return best;
}

Real h_min_star(const std::vector<Vec>& branch_demands,
                const std::vector<Real>& branch_caps) {
  if (branch_demands.size() != branch_caps.size())
    throw std::invalid_argument("h_min_star: branch count mismatch");
  Real total = 0;
  for (size_t k = 0; k < branch_demands.size(); ++k) {
    const auto hk = h_min_sgsl(branch_demands[k], branch_caps[k]);
    if (!hk)
      throw HypothesisNotMet("branch " + std::to_string(k) +
                             ": cap below the peak prefix average of its demand");
    total += *hk;
  }
  return total;
}

namespace {

int line_between(const Network& net, int a, int b) {
  for (size_t li = 0; li < net.lines.size(); ++li)
    if (net.lines[li].touches(a) && net.lines[li].touches(b)) return static_cast<int>(li);
  return -1;
}

Real cost_of_profiles(const Network& net, const VariableLayout& v, const Vec& x) {
  Real total = 0;
  for (const Bus& b : net.buses) {
    if (!b.is_generator()) continue;
    const CostPoly c = b.cost.value_or(CostPoly{});
    for (int t = 0; t < v.period(); ++t) total += c(x[v.generation(b.id, t)]);
  }
  return total;
}

}  // namespace

Solution purify(const Network& net, const DemandSeries& demand, const ProblemSpec& spec,
                const Solution& sol, int bus) {
  if (sol.status != SolveStatus::Optimal)
    throw std::invalid_argument("purify: requires an Optimal solution");
  const Bus* bi = net.find_bus(bus);
  const std::vector<int> nb = net.neighbors(bus);
  if (!bi || !bi->is_generator() || nb.size() != 1)
    throw std::invalid_argument("purify: bus " + std::to_string(bus) +
                                " is not a single-connection generator");
  const int j = nb[0];
  const int li = line_between(net, bus, j);
  const VariableLayout v(net, demand.period);
  if (sol.x.size() != v.size())
    throw std::invalid_argument("purify: solution does not match the model");

  const int T = demand.period;
  const Real ac = net.storage.eff_charge;
  const Real ad = net.storage.eff_discharge;
  const Real alpha = ac * ad;
  Vec x = sol.x;
  const Real scale = 1 + x.cwiseAbs().maxCoeff();
  const Real tol = 1e-11 * scale;
  const Cap fcap = spec.line_cap(net.lines[li]);

  const auto g = [&](int t) -> Real& { return x[v.generation(bus, t)]; };
  const auto ch = [&](int t) -> Real& { return x[v.charge(bus, t)]; };
  const auto dis = [&](int t) -> Real& { return x[v.discharge(bus, t)]; };

  // first rewrite: no simultaneous charge/discharge alongside generation
  const auto pass_a = [&]() {
    for (int t = 0; t < T; ++t) {
      if (!(g(t) > tol && ch(t) > tol && dis(t) > tol)) continue;
      if (alpha < 1) {
        const Real dgp = std::min({(1 - alpha) * ch(t),
                                   (1 - alpha) / alpha * dis(t), g(t)});
        g(t) -= dgp;
        ch(t) -= dgp / (1 - alpha);
        dis(t) -= alpha / (1 - alpha) * dgp;
      } else {
        // lossless pair: cancel the overlap outright
        const Real m = std::min(ch(t), dis(t));
        ch(t) -= m;
        dis(t) -= m;
      }
      ch(t) = std::max(ch(t), 0.0);
      dis(t) = std::max(dis(t), 0.0);
      g(t) = std::max(g(t), 0.0);
    }
  };

  pass_a();
  if (fcap.is_finite()) {
    const Real f = fcap.value();
    const int max_steps = T * T + 4;
    Real burden = 0;
    for (int t = 0; t < T; ++t) burden += ch(t) + dis(t);
    for (int step = 0; step < max_steps; ++step) {
      int t0 = 0;
      for (int t = 1; t < T; ++t)
        if (g(t) > g(t0)) t0 = t;
      if (g(t0) <= f + 1e-12 * scale) break;
      if (ch(t0) <= tol) break;  // solver noise; nothing to rewrite
      int t1 = -1;
      for (int t = t0 + 1; t < T; ++t)
        if (ac * ch(t) - dis(t) / ad < -tol) {
          t1 = t;
          break;
        }
      if (t1 < 0) break;
      const Real dg = std::min({ch(t0), dis(t1) / alpha, g(t0)});
      if (dg <= tol) break;
      if (g(t0) <= g(t1) + alpha * dg + tol) break;  // bound already implied
      g(t0) -= dg;
      ch(t0) -= dg;
      g(t1) += alpha * dg;
      dis(t1) -= alpha * dg;
      pass_a();
      Real burden_next = 0;
      for (int t = 0; t < T; ++t) burden_next += ch(t) + dis(t);
      if (burden - burden_next < 1e-12) break;  // charge/discharge totals already minimal
      burden = burden_next;
    }
  }

  Solution out = sol;
  out.x = std::move(x);
  const ConvexProgram prog = build(net, demand, spec);
  out.objective = eval_objective(prog, out.x);
  out.slack = prog.in_rhs - prog.in_mat * out.x;
  out.primal_residual = residuals(prog, out.x, 0.0).max_violation;
  return out;
}

Solution transfer_storage(const Network& net, const DemandSeries& demand,
                          const ProblemSpec& spec, const Solution& sol, int bus) {
  const Bus* bi = net.find_bus(bus);
  const std::vector<int> nb = net.neighbors(bus);
  if (!bi || !bi->is_generator() || nb.size() != 1)
    throw std::invalid_argument("transfer_storage: bus " + std::to_string(bus) +
                                " is not a single-connection generator");
  const int j = nb[0];
  const int li = line_between(net, bus, j);
  const Line& line = net.lines[li];
  const VariableLayout v(net, demand.period);
  if (sol.x.size() != v.size())
    throw std::invalid_argument("transfer_storage: solution does not match the model");

  const int T = demand.period;
  Vec x = sol.x;
  const Real scale = 1 + x.cwiseAbs().maxCoeff();
  const Cap fcap = spec.line_cap(line);
  if (fcap.is_finite()) {
    for (int t = 0; t < T; ++t)
      if (x[v.generation(bus, t)] > fcap.value() + 1e-9 * scale)
        throw std::invalid_argument(
            "transfer_storage: generation exceeds the line rating; purify first");
  }

  const int slack = net.effective_slack();
  for (int t = 0; t < T; ++t) {
    const Real gamma_i = x[v.charge(bus, t)];
    const Real delta_i = x[v.discharge(bus, t)];
    const Real net_draw = gamma_i - delta_i;
    x[v.charge(j, t)] += gamma_i;
    x[v.discharge(j, t)] += delta_i;
    x[v.charge(bus, t)] = 0;
    x[v.discharge(bus, t)] = 0;
    // p_ij picks up the bus-i storage draw; the i-side angle follows
    x[v.flow(li, t)] += (line.from == bus ? net_draw : -net_draw);
    x[v.angle(bus, t)] += net_draw / line.admittance;
    // angles are relative; re-anchor the slack bus at zero
    const Real shift = x[v.angle(slack, t)];
    if (shift != 0)
      for (const Bus& b : net.buses) x[v.angle(b.id, t)] -= shift;
  }
  x[v.storage_cap(j)] += x[v.storage_cap(bus)];
  x[v.storage_cap(bus)] = 0;

  Solution out = sol;
  out.x = std::move(x);
  const ConvexProgram prog = build(net, demand, spec);
  out.objective = eval_objective(prog, out.x);
  out.slack = prog.in_rhs - prog.in_mat * out.x;
  out.primal_residual = residuals(prog, out.x, 0.0).max_violation;
  out.dual_eq.resize(0);  // the rewritten point is a primal construction
  out.dual_in.resize(0);
  return out;
}

Topology detect_topology(const Network& net) {
  const BusPartition part = classify_buses(net);
  if (net.buses.size() == 2 && part.generators.size() == 1 && part.loads.size() == 1 &&
      net.lines.size() == 1)
    return Topology::SGSL;
  if (part.generators.size() == 1) {
    const int hub = part.generators.front();
    bool star = true;
    for (const Line& l : net.lines)
      if (!l.touches(hub)) star = false;  // a load-load line breaks the star
    if (star && net.degree(hub) == static_cast<int>(part.loads.size()) &&
        net.lines.size() == part.loads.size())
      return Topology::Star;
  }
  return Topology::General;
}

AnalyticReport analyze(const Network& net, const DemandSeries& demand,
                       const ProblemSpec& spec) {
  AnalyticReport rep;
  rep.topology = detect_topology(net);
  if (rep.topology == Topology::General)
    throw std::invalid_argument(
        "analytic results cover only the single-generator single-load pair and "
        "the star network; this model is neither");
  if (!net.storage.lossless() || !net.storage.unit_ramps())
    throw std::invalid_argument(
        "analytic results assume a lossless storage technology with unit ramps "
        "(eff_charge = eff_discharge = ramp_charge = ramp_discharge = 1)");
  const BusPartition part = classify_buses(net);
  const Bus* gen = net.find_bus(part.generators.front());
  if (!gen->cost || !gen->cost->strictly_convex())
    throw std::invalid_argument("analytic results assume a strictly convex cost (c2 > 0)");

  if (rep.topology == Topology::SGSL) {
    const int load = part.loads.front();
    const Vec& d = *demand.column(load);
    const Cap cap = min(spec.gen_cap(*gen), spec.line_cap(net.lines.front()));
    rep.f_min = f_min_sgsl(d, spec.budget);
    if (cap.is_finite()) {
      const auto hm = h_min_sgsl(d, cap.value());
      if (hm)
        rep.h_min = *hm;
      else
        rep.infeasible_for_all_budgets = true;
    } else {
      rep.h_min = 0.0;
    }
    rep.h_sat_value = h_sat(d);
    rep.tau = tau_sequence(d);
    rep.dispatch = unconstrained_dispatch(d, *gen->cost);
  } else {
    if (spec.gen_cap(*gen).is_finite())
      throw std::invalid_argument(
          "the star-network threshold assumes an uncapped generator");
    std::vector<Vec> demands;
    std::vector<Real> caps;
    for (int load : part.loads) {
      const Line& l = net.lines[line_between(net, part.generators.front(), load)];
      demands.push_back(*demand.column(load));
      caps.push_back(spec.line_cap(l).as_real());
    }
    rep.h_min = h_min_star(demands, caps);
  }
  return rep;
}

}  // namespace gridstore
