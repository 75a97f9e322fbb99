#pragma once

#include "gridstore/program.hpp"
#include "gridstore/types.hpp"

namespace gridstore {

/// Verification oracle: projected subgradient descent with an
/// alternating-projection feasibility polish. Deliberately shares no
/// machinery with the interior-point solver; meant for cross-checks in
/// tests. The returned point is feasible to ~1e-10 on feasible programs
/// and retains a residual bounded away from zero on infeasible ones.
Vec oracle_solve(const ConvexProgram& prog, int iters);

}  // namespace gridstore
