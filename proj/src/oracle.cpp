#include "gridstore/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gridstore {

namespace {

using RowMat = Eigen::SparseMatrix<Real, Eigen::RowMajor>;

/// Min-norm correction onto the equality rows plus the currently violated
/// inequality rows, iterated until the point is feasible to `tol`. Dense
/// normal equations; the oracle targets desk-scale cross-check programs.
class FeasibilityRestorer {
 public:
  FeasibilityRestorer(const ConvexProgram& prog)
      : prog_(prog), aeq_(prog.eq_mat), ain_(prog.in_mat) {}

  Real max_violation(const Vec& x) const {
    Real v = aeq_.rows() ? (prog_.eq_mat * x - prog_.eq_rhs).cwiseAbs().maxCoeff() : 0.0;
    if (ain_.rows())
      v = std::max(v, std::max(0.0, (prog_.in_mat * x - prog_.in_rhs).maxCoeff()));
    return v;
  }

  /// Returns the achieved max violation.
  Real restore(Vec& x, Real tol, int rounds) const {
    const Index nv = x.size();
    Real best = max_violation(x);
    for (int round = 0; round < rounds && best > tol; ++round) {
      std::vector<Index> eqs;
      for (Index i = 0; i < aeq_.rows(); ++i) eqs.push_back(i);
      std::vector<Index> viol;
      const Vec in_res = ain_.rows() ? Vec(prog_.in_mat * x - prog_.in_rhs) : Vec();
      for (Index i = 0; i < in_res.size(); ++i)
        if (in_res[i] > 0) viol.push_back(i);

      const Index m = static_cast<Index>(eqs.size() + viol.size());
      if (m == 0) break;
      Mat rows(m, nv);
      Vec need(m);
      rows.setZero();
      const Vec eq_res = aeq_.rows() ? Vec(prog_.eq_mat * x - prog_.eq_rhs) : Vec();
      Index r = 0;
      for (Index i : eqs) {
        for (RowMat::InnerIterator it(aeq_, i); it; ++it) rows(r, it.col()) = it.value();
        need[r++] = -eq_res[i];
      }
      for (Index i : viol) {
        for (RowMat::InnerIterator it(ain_, i); it; ++it) rows(r, it.col()) = it.value();
        need[r++] = -in_res[i];
      }
      Mat gram = rows * rows.transpose();
      gram.diagonal().array() += 1e-12 * (1 + gram.diagonal().maxCoeff());
      const Vec lambda = gram.ldlt().solve(need);
      Vec x_next = x + rows.transpose() * lambda;
      const Real v_next = max_violation(x_next);
      if (v_next >= best) {  // damp once, then give up on this round
        x_next = x + 0.5 * (x_next - x);
        const Real v_half = max_violation(x_next);
        if (v_half >= best) break;
        x = std::move(x_next);
        best = v_half;
      } else {
        x = std::move(x_next);
        best = v_next;
      }
    }
    return best;
  }

 private:
  const ConvexProgram& prog_;
  RowMat aeq_;
  RowMat ain_;
};

/// Bounded primal active-set refinement from a feasible point. Keeps every
/// iterate feasible; stops at a KKT point, a pivot cap, or a degenerate
/// working set. Dense saddle solves, nothing shared with the interior-point
/// code path.
Vec active_set_refine(const ConvexProgram& prog, Vec x, int max_pivots) {
  const Index nv = x.size();
  const Index me = prog.eq_mat.rows();
  const Index mi = prog.in_mat.rows();
  const Vec& h = prog.hessian_diag;
  const RowMat aeq = prog.eq_mat;
  const RowMat ain = prog.in_mat;
  const Real hmax = h.size() ? h.maxCoeff() : 0.0;
  const Real ridge = 1e-10 * (1 + hmax);

  // distinct tiny enlargements break the rhs ties that make degenerate
  // faces cycle; the caller projects back onto the true constraints
  Vec bin = prog.in_rhs;
  for (Index i = 0; i < mi; ++i)
    bin[i] += 1e-9 * (1 + std::abs(bin[i])) * (1.0 + Real(i + 1) / Real(mi + 2));

  // cold working set: the perturbed geometry re-acquires active rows one
  // blocking step at a time, which is what breaks the degenerate ties
  std::vector<char> working(mi, 0);
  Real f_prev = std::numeric_limits<Real>::infinity();
  int stagnant = 0;

  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    std::vector<Index> w;
    for (Index i = 0; i < mi; ++i)
      if (working[i]) w.push_back(i);
    const Index m = me + static_cast<Index>(w.size());

    Mat k = Mat::Zero(nv + m, nv + m);
    for (Index i = 0; i < nv; ++i) k(i, i) = h[i] + ridge;
    const auto put_row = [&](const RowMat& mat, Index src, Index dst) {
      for (RowMat::InnerIterator it(mat, src); it; ++it) {
        k(nv + dst, it.col()) = it.value();
        k(it.col(), nv + dst) = it.value();
      }
    };
    for (Index r = 0; r < me; ++r) put_row(aeq, r, r);
    for (size_t r = 0; r < w.size(); ++r) put_row(ain, w[r], me + static_cast<Index>(r));
    for (Index r = 0; r < m; ++r) k(nv + r, nv + r) = -1e-12;

    Vec rhs(nv + m);
    rhs.head(nv) = -(h.cwiseProduct(x) + prog.linear);
    if (me) rhs.segment(nv, me) = prog.eq_rhs - prog.eq_mat * x;
    for (size_t r = 0; r < w.size(); ++r) {
      Real ax = 0;
      for (RowMat::InnerIterator it(ain, w[r]); it; ++it) ax += it.value() * x[it.col()];
      rhs[nv + me + static_cast<Index>(r)] = bin[w[r]] - ax;
    }

    const Vec sol = Eigen::PartialPivLU<Mat>(k).solve(rhs);
    if (!sol.allFinite()) break;
    const Vec p = sol.head(nv);

    if (p.cwiseAbs().maxCoeff() <= 1e-11 * (1 + x.cwiseAbs().maxCoeff())) {
      // Stationary on the working set. The saddle multipliers are unreliable
      // when W holds dependent rows, so refit them least-squares and release
      // every negative one at once (single drops cycle on degenerate faces).
      if (m == 0) break;  // unconstrained stationary point
      const Vec grad = h.cwiseProduct(x) + prog.linear;
      Mat rows(m, nv);
      rows.setZero();
      for (Index r = 0; r < me; ++r)
        for (RowMat::InnerIterator it(aeq, r); it; ++it) rows(r, it.col()) = it.value();
      for (size_t r = 0; r < w.size(); ++r)
        for (RowMat::InnerIterator it(ain, w[r]); it; ++it)
          rows(me + static_cast<Index>(r), it.col()) = it.value();
      Mat gram = rows * rows.transpose();
      gram.diagonal().array() += 1e-12 * (1 + gram.diagonal().maxCoeff());
      const Vec lambda = gram.ldlt().solve(rows * (-grad));
      const Real lam_tol = 1e-7 * (1 + grad.cwiseAbs().maxCoeff());
      bool dropped = false;
      for (size_t r = 0; r < w.size(); ++r)
        if (lambda[me + static_cast<Index>(r)] < -lam_tol) {
          working[w[r]] = 0;
          dropped = true;
        }
      if (!dropped) break;  // KKT point
      continue;
    }

    // longest feasible step along p
    const Vec ap = prog.in_mat * p;
    const Vec s = bin - prog.in_mat * x;
    Real alpha = 1.0;
    Index blocker = -1;
    for (Index i = 0; i < mi; ++i) {
      if (working[i] || ap[i] <= 1e-13) continue;
      const Real cand = s[i] / ap[i];
      if (cand < alpha) {
        alpha = cand;
        blocker = i;
      }
    }
    if (alpha > 0) x += alpha * p;
    if (blocker >= 0 && alpha < 1.0)
      working[blocker] = 1;

    const Real f_now = 0.5 * x.dot(h.cwiseProduct(x)) + prog.linear.dot(x);
    // dither detection: full unblocked steps that stop improving
    if (blocker < 0 && alpha >= 1.0 &&
        f_now >= f_prev - 1e-13 * (1 + std::abs(f_prev))) {
      if (++stagnant >= 8) break;
    } else {
      stagnant = 0;
    }
    f_prev = f_now;
  }
  return x;
}

}  // namespace

Vec oracle_solve(const ConvexProgram& prog, int iters) {
  const Index nv = prog.num_vars();
  const Vec& h = prog.hessian_diag;
  const Vec& c = prog.linear;
  FeasibilityRestorer restorer(prog);

  Vec x = Vec::Zero(nv);
  restorer.restore(x, 1e-11, 80);

  Vec best = x;
  Real best_obj = restorer.max_violation(x) <= 1e-9
                      ? eval_objective(prog, x)
                      : std::numeric_limits<Real>::infinity();
  const auto offer = [&](const Vec& candidate) {
    if (restorer.max_violation(candidate) > 1e-9) return;
    const Real obj = eval_objective(prog, candidate);
    if (obj < best_obj) {
      best_obj = obj;
      best = candidate;
    }
  };

  const Real lipschitz = 1e-3 + (h.size() ? h.maxCoeff() : 0.0);
  const int steps = std::clamp(iters / 50, 200, 20000);
  for (int k = 1; k <= steps; ++k) {
    const Vec g = h.cwiseProduct(x) + c;
    // diminishing early steps escape the start; constant 1/L afterwards
    const Real step = k < steps / 8 ? 2.0 / (lipschitz * std::sqrt(static_cast<Real>(k)))
                                    : 1.0 / lipschitz;
    x -= std::min(step, 4.0 / lipschitz) * g;
    restorer.restore(x, 1e-11, 6);
    if ((k & 63) == 0 || k == steps) {
      Vec snap = x;
      if (restorer.restore(snap, 1e-11, 40) <= 1e-9) offer(snap);
    }
  }

  // escape whatever face the projected phase settled on
  if (std::isfinite(best_obj)) {
    Vec refined = active_set_refine(prog, best, 800);
    restorer.restore(refined, 1e-11, 40);
    offer(refined);
  }
  return std::isfinite(best_obj) ? best : x;
}

}  // namespace gridstore
