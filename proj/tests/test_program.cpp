#include <sstream>

#include "doctest.h"
#include "gridstore/program.hpp"
#include "gridstore/qp.hpp"
#include "gridstore/sweep.hpp"
#include "helpers.hpp"

using namespace gridstore;
using namespace gridtest;

TEST_CASE("variable layout covers g, charge, discharge, angles, flows, caps") {
  // 3-bus star, T=4, one generator, two lines:
  // 4*(1 + 3*3 + 2) + 3 = 51 columns, angles kept explicit for every bus.
  auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.budget = Cap::finite(5);
  const ConvexProgram prog = build(net, demand, spec);
  CHECK(prog.num_vars() == 51);

  // every variable appears exactly once in the index map
  std::vector<int> seen(prog.num_vars(), 0);
  const VariableLayout& v = prog.vars;
  for (int t = 0; t < 4; ++t) {
    ++seen[v.generation(1, t)];
    for (int k : {1, 2, 3}) {
      ++seen[v.charge(k, t)];
      ++seen[v.discharge(k, t)];
      ++seen[v.angle(k, t)];
    }
    for (int l : {0, 1}) ++seen[v.flow(l, t)];
  }
  for (int k : {1, 2, 3}) ++seen[v.storage_cap(k)];
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("pinning a bus adds exactly one equality row") {
  auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.budget = Cap::finite(5);
  const ConvexProgram base = build(net, demand, spec);
  spec.pinned_zero = {1};
  const ConvexProgram pinned = build(net, demand, spec);
  CHECK(pinned.num_eq() == base.num_eq() + 1);
  CHECK(pinned.num_in() == base.num_in());
  CHECK(pinned.eq_tags.back().source == RowSource::PinnedStorage);
  CHECK(pinned.eq_tags.back().bus == 1);
}

TEST_CASE("degenerate single-step pair forces g = d") {
  auto [net, demand] = make_sgsl((Vec(1) << 7).finished(), Cap::unbounded());
  ProblemSpec spec;
  spec.budget = Cap::finite(0);
  const ConvexProgram prog = build(net, demand, spec);
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[prog.vars.generation(1, 0)] == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(sol.objective == doctest::Approx(49.0).epsilon(1e-9));
}

TEST_CASE("build rejects bad specs") {
  auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.pinned_zero = {9};
  CHECK_THROWS_AS(build(net, demand, spec), std::invalid_argument);
  spec.pinned_zero = {2};  // a load bus
  CHECK_THROWS_AS(build(net, demand, spec), std::invalid_argument);
  spec.pinned_zero.clear();
  spec.gen_cap_overrides[5] = Cap::finite(1);
  CHECK_THROWS_AS(build(net, demand, spec), std::invalid_argument);
}

TEST_CASE("objective evaluation") {
  auto [net, demand] = make_sgsl((Vec(4) << 9, 10, 0, 10).finished(), Cap::unbounded());
  ProblemSpec spec;
  const ConvexProgram prog = build(net, demand, spec);

  SUBCASE("all-zero point with zero constant cost") {
    CHECK(eval_objective(prog, Vec::Zero(prog.num_vars())) == 0.0);
  }
  SUBCASE("hand-computed profile") {
    Vec x = Vec::Zero(prog.num_vars());
    const Vec g = (Vec(4) << 9.5, 9.5, 5, 5).finished();
    for (int t = 0; t < 4; ++t) x[prog.vars.generation(1, t)] = g[t];
    CHECK(eval_objective(prog, x) == doctest::Approx(230.5).epsilon(1e-15));
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(eval_objective(prog, Vec::Zero(3)), std::invalid_argument);
  }
}

TEST_CASE("the optimal point of the 3-bus instance evaluates to 877") {
  auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.budget = Cap::finite(5);
  const ConvexProgram prog = build(net, demand, spec);
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(eval_objective(prog, sol.x) == doctest::Approx(877.0).epsilon(1e-5));
}

TEST_CASE("residuals report violations with their source tags") {
  const Vec d = (Vec(4) << 9, 10, 0, 10).finished();
  auto [net, demand] = make_sgsl(d, Cap::finite(12));
  ProblemSpec spec;
  spec.budget = Cap::finite(0);
  const ConvexProgram prog = build(net, demand, spec);

  // hand-built point: g = d, no storage, flows equal demand, angles follow
  Vec x = Vec::Zero(prog.num_vars());
  const VariableLayout& v = prog.vars;
  for (int t = 0; t < 4; ++t) {
    x[v.generation(1, t)] = d[t];
    x[v.flow(0, t)] = d[t];
    x[v.angle(2, t)] = -d[t];  // y = 1, theta_1 = 0
  }
  SUBCASE("satisfied when the cap clears the peak") {
    const FeasibilityReport rep = residuals(prog, x, 1e-9);
    CHECK(rep.pass);
    CHECK(rep.max_violation <= 1e-12);
  }
  SUBCASE("tight cap flags the flow rows") {
    ProblemSpec tight = spec;
    tight.line_cap_overrides[{1, 2}] = Cap::finite(9.5);
    const ConvexProgram prog2 = build(net, demand, tight);
    const FeasibilityReport rep = residuals(prog2, x, 1e-9);
    CHECK_FALSE(rep.pass);
    CHECK(rep.flags(RowSource::FlowCap));
    CHECK(rep.max_violation == doctest::Approx(0.5));
  }
  SUBCASE("solver points pass at 1e-6") {
    const Solution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(residuals(prog, sol.x, 1e-6).pass);
  }
}

TEST_CASE("the variable map never depends on the spec") {
  auto [net, demand] = counterexample_network();
  ProblemSpec a, b, c;
  a.budget = Cap::finite(5);
  b.budget = Cap::unbounded();
  c.budget = Cap::finite(5);
  c.pinned_zero = {1};
  c.line_cap_overrides[{1, 2}] = Cap::unbounded();
  const ConvexProgram pa = build(net, demand, a);
  const ConvexProgram pb = build(net, demand, b);
  const ConvexProgram pc = build(net, demand, c);
  CHECK(pa.vars == pb.vars);
  CHECK(pa.vars == pc.vars);
  CHECK(pb.num_in() == pa.num_in() - 1);   // no budget row
  CHECK(pc.num_in() == pa.num_in() - 8);   // one line uncapped: 2*T rows gone
}

TEST_CASE("feasible points move between P and its restriction") {
  auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.budget = Cap::finite(5);
  ProblemSpec restricted = spec;
  restricted.pinned_zero = {1};
  const ConvexProgram prog_p = build(net, demand, spec);
  const ConvexProgram prog_pi = build(net, demand, restricted);

  const Solution sol_pi = solve(prog_pi);
  REQUIRE(sol_pi.status == SolveStatus::Optimal);
  // a feasible point of the restriction is feasible for P
  CHECK(residuals(prog_p, sol_pi.x, 1e-7).pass);

  // and a feasible point of P with b_1 = 0 is feasible for the restriction
  const Solution sol_p = solve(prog_p);
  REQUIRE(sol_p.status == SolveStatus::Optimal);
  Vec x = sol_p.x;
  CHECK_FALSE(residuals(prog_pi, x, 1e-7).pass);  // P's optimum uses b_1 > 0 here
  CHECK(residuals(prog_pi, sol_pi.x, 1e-7).pass);
}

TEST_CASE("lossless storage admits the net-flow reformulation") {
  // same optimal value when (charge, discharge) collapse to one signed rate
  auto [net, demand] = counterexample_network();
  ProblemSpec spec;
  spec.budget = Cap::finite(5);
  const Solution full = solve(build(net, demand, spec));
  REQUIRE(full.status == SolveStatus::Optimal);

  // hand-build the reduced program: g, r (signed), theta, p, b
  const int T = 4, n = 3, L = 2;
  const int ng = 1;
  const Index nv = T * (ng + n + n + L) + n;
  const auto gi = [&](int t) { return t; };
  const auto ri = [&](int k, int t) { return T * ng + (k - 1) * T + t; };
  const auto th = [&](int k, int t) { return T * (ng + n) + (k - 1) * T + t; };
  const auto pi = [&](int l, int t) { return T * (ng + 2 * n) + l * T + t; };
  const auto bi = [&](int k) { return T * (ng + 2 * n + L) + (k - 1); };

  ConvexProgram red;  // no layout: a hand-assembled program
  red.hessian_diag = Vec::Zero(nv);
  red.linear = Vec::Zero(nv);
  for (int t = 0; t < T; ++t) red.hessian_diag[gi(t)] = 2.0;

  std::vector<Triplet> eq, in;
  std::vector<Real> eqb, inb;
  const auto eq_row = [&](Real b) {
    eqb.push_back(b);
    return static_cast<int>(eqb.size()) - 1;
  };
  const auto in_row = [&](Real b) {
    inb.push_back(b);
    return static_cast<int>(inb.size()) - 1;
  };
  const std::vector<std::pair<int, int>> lines = {{1, 2}, {1, 3}};
  for (int l = 0; l < L; ++l)
    for (int t = 0; t < T; ++t) {
      const int r = eq_row(0);
      eq.emplace_back(r, pi(l, t), 1.0);
      eq.emplace_back(r, th(lines[l].first, t), -1.0);
      eq.emplace_back(r, th(lines[l].second, t), 1.0);
    }
  for (int k = 1; k <= n; ++k)
    for (int t = 0; t < T; ++t) {
      const Vec* d = demand.column(k);
      const int r = eq_row(d ? (*d)[t] : 0.0);
      if (k == 1) eq.emplace_back(r, gi(t), 1.0);
      eq.emplace_back(r, ri(k, t), -1.0);
      for (int l = 0; l < L; ++l) {
        if (lines[l].first == k) eq.emplace_back(r, pi(l, t), -1.0);
        if (lines[l].second == k) eq.emplace_back(r, pi(l, t), 1.0);
      }
    }
  for (int k = 1; k <= n; ++k) {
    const int r = eq_row(0);
    for (int t = 0; t < T; ++t) eq.emplace_back(r, ri(k, t), 1.0);
  }
  for (int t = 0; t < T; ++t) {
    const int r = eq_row(0);
    eq.emplace_back(r, th(1, t), 1.0);
  }
  for (int t = 0; t < T; ++t) {
    const int r = in_row(0);
    in.emplace_back(r, gi(t), -1.0);
  }
  for (int l = 0; l < L; ++l)
    for (int t = 0; t < T; ++t) {
      int r = in_row(9.5);
      in.emplace_back(r, pi(l, t), 1.0);
      r = in_row(9.5);
      in.emplace_back(r, pi(l, t), -1.0);
    }
  for (int k = 1; k <= n; ++k)
    for (int t = 0; t < T; ++t) {
      int r = in_row(0);  // |r| <= b with unit ramps
      in.emplace_back(r, ri(k, t), 1.0);
      in.emplace_back(r, bi(k), -1.0);
      r = in_row(0);
      in.emplace_back(r, ri(k, t), -1.0);
      in.emplace_back(r, bi(k), -1.0);
      r = in_row(0);  // storage level within [0, b]
      for (int tau = 0; tau <= t; ++tau) in.emplace_back(r, ri(k, tau), -1.0);
      r = in_row(0);
      for (int tau = 0; tau <= t; ++tau) in.emplace_back(r, ri(k, tau), 1.0);
      in.emplace_back(r, bi(k), -1.0);
    }
  {
    const int r = in_row(5.0);
    for (int k = 1; k <= n; ++k) in.emplace_back(r, bi(k), 1.0);
    for (int k = 1; k <= n; ++k) {
      const int rr = in_row(0);
      in.emplace_back(rr, bi(k), -1.0);
    }
  }
  red.eq_mat.resize(static_cast<Index>(eqb.size()), nv);
  red.eq_mat.setFromTriplets(eq.begin(), eq.end());
  red.eq_rhs = Eigen::Map<const Vec>(eqb.data(), eqb.size());
  red.eq_tags.assign(eqb.size(), RowTag{});
  red.in_mat.resize(static_cast<Index>(inb.size()), nv);
  red.in_mat.setFromTriplets(in.begin(), in.end());
  red.in_rhs = Eigen::Map<const Vec>(inb.data(), inb.size());
  red.in_tags.assign(inb.size(), RowTag{});

  const Solution reduced = solve(red);
  REQUIRE(reduced.status == SolveStatus::Optimal);
  CHECK(reduced.objective ==
        doctest::Approx(full.objective).epsilon(1e-6));
}

TEST_CASE("triplet dump covers all five blocks") {
  auto [net, demand] = make_sgsl((Vec(2) << 1, 2).finished(), Cap::finite(5));
  ProblemSpec spec;
  spec.budget = Cap::finite(1);
  const ConvexProgram prog = build(net, demand, spec);
  std::ostringstream os;
  dump_program(prog, os);
  const std::string text = os.str();
  for (const char* section : {"# Q ", "# c ", "# A_eq ", "# b_eq ", "# A_in ", "# b_in "})
    CHECK(text.find(section) != std::string::npos);
}
