#pragma once

#include <optional>
#include <vector>

#include "gridstore/program.hpp"
#include "gridstore/types.hpp"

namespace gridstore {

struct SolverConfig {
  int max_iters = 100;
  Real tol_gap = 1e-8;    // relative duality gap
  Real tol_feas = 1e-8;   // absolute max-norm feasibility
  Real infeasibility_threshold = 1e-6;
  int verbosity = 0;      // > 0 prints the iterate log
  bool force_sparse = false;  // exercise the sparse KKT path on small systems
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterLimit };
const char* to_string(SolveStatus s);

/// Farkas-type certificate: a_eq' y + a_in' z ~ 0 with z >= 0 and
/// b_eq' y + b_in' z = -1 proves the constraints have no solution.
struct InfeasibilityCertificate {
  Vec dual_eq;
  Vec dual_in;
  Real support = 0;  // ||A_eq' y + A_in' z||_inf after normalization
};

struct IterateStat {
  int iter = 0;
  Real primal_obj = 0;
  Real dual_obj = 0;  // certified lower bound: primal - s'z (s, z > 0)
  Real mu = 0;
  Real primal_res = 0;
  Real dual_res = 0;
};

/// Result of a solve. Dual multipliers follow the stationarity convention
///   Q x + c + A_eq' dual_eq + A_in' dual_in = 0,  dual_in >= 0.
struct Solution {
  SolveStatus status = SolveStatus::IterLimit;
  Vec x;
  Vec dual_eq;
  Vec dual_in;
  Vec slack;  // b_in - A_in x at the returned point
  Real objective = 0;
  Real gap = 0;  // relative duality gap at the returned point
  int iterations = 0;
  Real primal_residual = 0;
  Real dual_residual = 0;
  std::optional<InfeasibilityCertificate> certificate;
  std::vector<IterateStat> trace;
};

/// Primal-dual interior point solve with Mehrotra predictor-corrector steps.
/// Feasibility is certified up front by a homogeneous self-dual embedding of
/// the constraint system, so Infeasible always carries a certificate.
/// Deterministic for fixed (prog, cfg).
Solution solve(const ConvexProgram& prog, const SolverConfig& cfg = {});

struct KKTReport {
  Real stationarity = 0;       // ||Qx + c + A'y + G'z||_inf
  Real complementarity = 0;    // max_i |z_i * slack_i|
  Real dual_sign_min = 0;      // min_i z_i
  Real primal_feasibility = 0; // max constraint violation
  bool pass(Real tol) const {
    return stationarity <= tol && complementarity <= tol &&
           dual_sign_min >= -tol && primal_feasibility <= tol;
  }
};

/// Recomputes the optimality certificate from scratch for an Optimal solution.
KKTReport kkt_report(const ConvexProgram& prog, const Solution& sol);

}  // namespace gridstore
