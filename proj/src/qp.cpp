#include "gridstore/qp.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace gridstore {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();
constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();

Real inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Largest step a in [0, inf) with v + a*dv >= 0.
Real max_step(const Vec& v, const Vec& dv) {
  Real a = kInf;
  for (Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

Real max_step(Real v, Real dv) { return dv < 0 ? -v / dv : kInf; }

// Saddle-point system
//   [ H      A_eq'   A_in' ] [ux]   [r1]
//   [ A_eq     0       0   ] [uy] = [r2]
//   [ A_in     0      -D   ] [uz]   [r3]
// factored with static regularization (+p primal, -p dual blocks) and solved
// with iterative refinement against the unregularized matrix. Sparse LDL'
// when the system is large, pivoted dense LU below the size threshold.
class KktSolver {
 public:
  KktSolver(Vec hdiag, const SpMat& aeq, const SpMat& ain, bool sparse)
      : h_(std::move(hdiag)), aeq_(aeq), ain_(ain), sparse_(sparse) {
    nv_ = h_.size();
    me_ = aeq_.rows();
    mi_ = ain_.rows();
    dim_ = nv_ + me_ + mi_;
    aeq_t_ = aeq_.transpose();
    ain_t_ = ain_.transpose();
  }

  Index dim() const { return dim_; }

  bool factor(const Vec& d, Real reg) {
    d_ = d;
    reg_ = reg;
    return refactor();
  }

  /// Solve against the unregularized system, refining with the factored one.
  /// The no-pivot sparse LDL' can produce junk on extreme late-iteration
  /// scalings; an unusable refinement residual switches to pivoted sparse LU
  /// for the rest of this solver's life.
  Vec solve(const Vec& rhs) {
    Vec u = refined_solve(rhs);
    const Real usable = 1e-4 * (1 + inf_norm(rhs));
    if (!sparse_ || use_lu_ || last_residual_ <= usable) return u;
    const Real ldlt_residual = last_residual_;
    use_lu_ = true;
    if (!refactor()) return u;
    Vec u_lu = refined_solve(rhs);
    return last_residual_ < ldlt_residual ? u_lu : u;
  }

 private:
  Vec refined_solve(const Vec& rhs) {
    Vec u = base_solve(rhs);
    Vec res = residual(rhs, u);
    Real best = inf_norm(res);
    const Real target = 1e-14 * (1 + inf_norm(rhs));
    for (int it = 0; it < 6 && best > target; ++it) {
      Vec u_next = u + base_solve(res);
      Vec res_next = residual(rhs, u_next);
      const Real nrm = inf_norm(res_next);
      if (nrm >= 0.5 * best) break;
      u = std::move(u_next);
      res = std::move(res_next);
      best = nrm;
    }
    last_residual_ = best;
    return u;
  }

  bool refactor() {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const bool ok = sparse_ ? (use_lu_ ? factor_sparse_lu() : factor_sparse_ldlt())
                              : factor_dense();
      if (ok) return true;
      if (sparse_ && !use_lu_)
        use_lu_ = true;  // pivoting first, heavier regularization after
      else
        reg_ *= 100;
    }
    return false;
  }

  void assemble_sparse() {
    std::vector<Triplet> tri;
    tri.reserve(static_cast<size_t>(dim_) + 2 * (aeq_.nonZeros() + ain_.nonZeros()));
    for (Index i = 0; i < nv_; ++i) tri.emplace_back(i, i, h_[i] + reg_);
    for (int k = 0; k < aeq_.outerSize(); ++k)
      for (SpMat::InnerIterator it(aeq_, k); it; ++it) {
        tri.emplace_back(nv_ + it.row(), it.col(), it.value());
        tri.emplace_back(it.col(), nv_ + it.row(), it.value());
      }
    for (Index i = 0; i < me_; ++i) tri.emplace_back(nv_ + i, nv_ + i, -reg_);
    for (int k = 0; k < ain_.outerSize(); ++k)
      for (SpMat::InnerIterator it(ain_, k); it; ++it) {
        tri.emplace_back(nv_ + me_ + it.row(), it.col(), it.value());
        tri.emplace_back(it.col(), nv_ + me_ + it.row(), it.value());
      }
    for (Index i = 0; i < mi_; ++i)
      tri.emplace_back(nv_ + me_ + i, nv_ + me_ + i, -d_[i] - reg_);

    ksp_.resize(dim_, dim_);
    ksp_.setFromTriplets(tri.begin(), tri.end());
    ksp_.makeCompressed();
  }

  bool factor_sparse_ldlt() {
    assemble_sparse();
    if (!analyzed_) {
      ldlt_.analyzePattern(ksp_);
      analyzed_ = true;
    }
    ldlt_.factorize(ksp_);
    return ldlt_.info() == Eigen::Success;
  }

  bool factor_sparse_lu() {
    assemble_sparse();
    lu_sp_.compute(ksp_);
    return lu_sp_.info() == Eigen::Success;
  }

  bool factor_dense() {
    Mat k = Mat::Zero(dim_, dim_);
    for (Index i = 0; i < nv_; ++i) k(i, i) = h_[i] + reg_;
    for (int c = 0; c < aeq_.outerSize(); ++c)
      for (SpMat::InnerIterator it(aeq_, c); it; ++it) {
        k(nv_ + it.row(), it.col()) = it.value();
        k(it.col(), nv_ + it.row()) = it.value();
      }
    for (Index i = 0; i < me_; ++i) k(nv_ + i, nv_ + i) = -reg_;
    for (int c = 0; c < ain_.outerSize(); ++c)
      for (SpMat::InnerIterator it(ain_, c); it; ++it) {
        k(nv_ + me_ + it.row(), it.col()) = it.value();
        k(it.col(), nv_ + me_ + it.row()) = it.value();
      }
    for (Index i = 0; i < mi_; ++i) k(nv_ + me_ + i, nv_ + me_ + i) = -d_[i] - reg_;
    lu_.compute(k);
    // PartialPivLU always produces a factorization; a bad one is caught by
    // the refinement residual below.
    Vec probe = lu_.solve(Vec::Ones(dim_));
    return probe.allFinite();
  }

  Vec base_solve(const Vec& rhs) const {
    if (!sparse_) return lu_.solve(rhs);
    return use_lu_ ? Vec(lu_sp_.solve(rhs)) : Vec(ldlt_.solve(rhs));
  }

  Vec residual(const Vec& rhs, const Vec& u) const {
    const auto ux = u.head(nv_);
    const auto uy = u.segment(nv_, me_);
    const auto uz = u.tail(mi_);
    Vec r(dim_);
    r.head(nv_) = rhs.head(nv_) - (h_.cwiseProduct(ux) + aeq_t_ * uy + ain_t_ * uz);
    r.segment(nv_, me_) = rhs.segment(nv_, me_) - aeq_ * ux;
    r.tail(mi_) = rhs.tail(mi_) - (ain_ * ux - d_.cwiseProduct(uz));
    return r;
  }

  Vec h_;
  const SpMat& aeq_;
  const SpMat& ain_;
  SpMat aeq_t_, ain_t_;
  bool sparse_ = false;
  Index nv_ = 0, me_ = 0, mi_ = 0, dim_ = 0;

  Vec d_;
  Real reg_ = 1e-9;
  Real last_residual_ = 0;
  SpMat ksp_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
  Eigen::SparseLU<SpMat> lu_sp_;
  Eigen::PartialPivLU<Mat> lu_;
  bool analyzed_ = false;
  bool use_lu_ = false;
};

Vec stack3(const Vec& a, const Vec& b, const Vec& c) {
  Vec r(a.size() + b.size() + c.size());
  r << a, b, c;
  return r;
}

enum class FeasVerdict { Feasible, Infeasible, Unknown };

struct FeasOutcome {
  FeasVerdict verdict = FeasVerdict::Unknown;
  InfeasibilityCertificate cert;
};

/// Homogeneous self-dual embedding of the constraint system
///   A_eq x = b_eq,  A_in x + s = b_in,  s >= 0.
/// Drives either tau > 0 (a feasible point x/tau exists) or kappa > 0
/// (a Farkas certificate exists).
FeasOutcome certify_feasibility(KktSolver& kkt, const SpMat& aeq, const Vec& beq,
                                const SpMat& ain, const Vec& bin,
                                const SolverConfig& cfg, Real reg) {
  const Index nv = aeq.cols();
  const Index me = aeq.rows();
  const Index mi = ain.rows();
  const Real bscale = std::max({1.0, inf_norm(beq), inf_norm(bin)});
  const Real exit_tol = std::max(10 * cfg.tol_feas, 1e-9) * (1 + bscale);
  const SpMat aeq_t = aeq.transpose();
  const SpMat ain_t = ain.transpose();

  Vec x = Vec::Zero(nv), y = Vec::Zero(me);
  Vec z = Vec::Ones(mi), s = Vec::Ones(mi);
  Real tau = 1, kappa = 1;

  FeasOutcome out;
  const int iters = std::max(cfg.max_iters, 50);
  for (int iter = 0; iter < iters; ++iter) {
    // candidate feasible point
    {
      const Vec xc = x / tau;
      const Real eq_res = me ? inf_norm(Vec(aeq * xc - beq)) : 0.0;
      const Real in_res = mi ? std::max(0.0, (ain * xc - bin).maxCoeff()) : 0.0;
      if (std::max(eq_res, in_res) <= exit_tol) {
        out.verdict = FeasVerdict::Feasible;
        return out;
      }
    }
    // candidate Farkas certificate (y, z >= 0): A'y + G'z = 0, b'y + h'z < 0
    const Real gapb = beq.dot(y) + bin.dot(z);
    if (tau <= 1e-6 * kappa && gapb < 0) {
      const Real mag = std::max({inf_norm(y), inf_norm(z), 1e-300});
      Vec yn = y / mag, zn = z / mag;
      const Real support = inf_norm(Vec(aeq_t * yn + ain_t * zn));
      if (support <= cfg.infeasibility_threshold &&
          gapb / mag <= -cfg.infeasibility_threshold * bscale) {
        const Real scale = -1.0 / gapb;
        out.verdict = FeasVerdict::Infeasible;
        out.cert.dual_eq = y * scale;
        out.cert.dual_in = z * scale;
        out.cert.support = inf_norm(Vec(aeq_t * out.cert.dual_eq + ain_t * out.cert.dual_in));
        return out;
      }
    }

    const Vec rE = aeq * x - beq * tau;
    const Vec rI = ain * x + s - bin * tau;
    const Vec rD = aeq_t * y + ain_t * z;
    const Real rG = gapb + kappa;
    const Real mu = (s.dot(z) + tau * kappa) / (mi + 1);
    if (mu < 1e-18) break;

    Vec d = (s.array() / z.array()).cwiseMax(1e-30).cwiseMin(1e30).matrix();
    if (!kkt.factor(d, reg)) break;
    const Vec u2 = kkt.solve(stack3(Vec::Zero(nv), beq, bin));
    const auto solve_dir = [&](const Vec& rc_s, Real rc_tau, Vec& dx, Vec& dy, Vec& dz,
                               Real& dtau, Vec& ds, Real& dkappa) {
      const Vec rhs3 = -rI - (rc_s.array() / z.array()).matrix();
      const Vec u1 = kkt.solve(stack3(-rD, -rE, rhs3));
      const Real denom = beq.dot(u2.segment(nv, me)) + bin.dot(u2.tail(mi)) - kappa / tau;
      const Real num = (-rG - rc_tau / tau) -
                       (beq.dot(u1.segment(nv, me)) + bin.dot(u1.tail(mi)));
      dtau = std::abs(denom) > 1e-300 ? num / denom : 0.0;
      dx = u1.head(nv) + dtau * u2.head(nv);
      dy = u1.segment(nv, me) + dtau * u2.segment(nv, me);
      dz = u1.tail(mi) + dtau * u2.tail(mi);
      ds = ((rc_s - s.cwiseProduct(dz)).array() / z.array()).matrix();
      dkappa = (rc_tau - kappa * dtau) / tau;
    };

    Vec dx, dy, dz, ds;
    Real dtau, dkappa;
    solve_dir(-s.cwiseProduct(z), -tau * kappa, dx, dy, dz, dtau, ds, dkappa);
    Real alpha_aff = std::min(
        {1.0, max_step(s, ds), max_step(z, dz), max_step(tau, dtau), max_step(kappa, dkappa)});
    const Real mu_aff = ((s + alpha_aff * ds).dot(z + alpha_aff * dz) +
                         (tau + alpha_aff * dtau) * (kappa + alpha_aff * dkappa)) /
                        (mi + 1);
    Real sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3);
    sigma = std::clamp(sigma, 1e-8, 0.99);

    const Vec rc_s = (sigma * mu - (s.cwiseProduct(z) + ds.cwiseProduct(dz)).array()).matrix();
    const Real rc_tau = sigma * mu - tau * kappa - dtau * dkappa;
    solve_dir(rc_s, rc_tau, dx, dy, dz, dtau, ds, dkappa);
    Real alpha = 0.99 * std::min({1.0 / 0.99, max_step(s, ds), max_step(z, dz),
                                  max_step(tau, dtau), max_step(kappa, dkappa)});
    if (!(alpha > 0) || !std::isfinite(alpha)) break;
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }
  return out;
}

struct Iterate {
  Vec x, s, y, z;
  Real merit = kInf;
};

/// The dual is not unique when an inequality row is exactly +/- an equality
/// row (the row is implied). Pick the representative with zero multiplier on
/// the inequality by shifting its mass into the equality dual; stationarity
/// is preserved exactly.
void normalize_parallel_duals(const SpMat& aeq, const SpMat& ain, Vec& y, Vec& z) {
  if (!aeq.rows() || !ain.rows()) return;
  using Key = std::vector<std::pair<Index, Real>>;
  const auto row_key = [](const Eigen::SparseMatrix<Real, Eigen::RowMajor>& m, Index r) {
    Key k;
    for (Eigen::SparseMatrix<Real, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it)
      if (it.value() != 0) k.emplace_back(it.col(), it.value());
    return k;
  };
  const Eigen::SparseMatrix<Real, Eigen::RowMajor> eq_r = aeq, in_r = ain;
  std::map<Key, Index> eq_rows;
  for (Index r = 0; r < eq_r.rows(); ++r) eq_rows.emplace(row_key(eq_r, r), r);
  for (Index r = 0; r < in_r.rows(); ++r) {
    if (z[r] == 0) continue;
    Key k = row_key(in_r, r);
    if (auto it = eq_rows.find(k); it != eq_rows.end()) {
      y[it->second] += z[r];  // row_in == row_eq
      z[r] = 0;
      continue;
    }
    for (auto& [col, val] : k) val = -val;
    if (auto it = eq_rows.find(k); it != eq_rows.end()) {
      y[it->second] -= z[r];  // row_in == -row_eq
      z[r] = 0;
    }
  }
}

}  // namespace

namespace {

Solution solve_impl(const ConvexProgram& prog, const SolverConfig& cfg) {
  const Index nv = prog.num_vars();
  const Index me = prog.num_eq();
  const Index mi = prog.num_in();
  const Vec& h = prog.hessian_diag;
  const Vec& c = prog.linear;
  const SpMat& aeq = prog.eq_mat;
  const SpMat& ain = prog.in_mat;
  const Vec& beq = prog.eq_rhs;
  const Vec& bin = prog.in_rhs;
  const SpMat aeq_t = aeq.transpose();
  const SpMat ain_t = ain.transpose();

  const Real bscale = std::max({1.0, inf_norm(beq), inf_norm(bin)});
  const Real cscale = std::max(1.0, inf_norm(c));
  // stationarity is judged relative to the gradient magnitude at the point
  const auto grad_scale = [&](const Vec& xp) {
    return 1.0 + inf_norm(Vec(h.cwiseProduct(xp))) + inf_norm(c);
  };
  const Real reg = 1e-9 * std::max(1.0, h.size() ? inf_norm(h) : 0.0);
  const bool sparse = cfg.force_sparse || nv + me + mi >= 500;

  Solution sol;
  sol.x = Vec::Zero(nv);
  sol.objective = kNaN;

  const auto finish_point = [&](const Vec& x, const Vec& y, const Vec& z, const Vec& s) {
    sol.x = x;
    sol.dual_eq = y;
    sol.dual_in = z;
    sol.slack = bin - ain * x;
    sol.objective = eval_objective(prog, x);
    const Real eq_res = me ? inf_norm(Vec(aeq * x - beq)) : 0.0;
    const Real in_res = mi ? std::max(0.0, (ain * x - bin).maxCoeff()) : 0.0;
    sol.primal_residual = std::max(eq_res, in_res);
    sol.dual_residual =
        inf_norm(Vec(h.cwiseProduct(x) + c + aeq_t * y + ain_t * z));
    sol.gap = mi ? s.dot(z) / (1 + std::abs(sol.objective)) : 0.0;
  };

  // Equality-constrained problems collapse to one saddle solve.
  if (mi == 0) {
    KktSolver kkt(h, aeq, ain, sparse);
    if (!kkt.factor(Vec(), reg)) return sol;
    const Vec u = kkt.solve(stack3(-c, beq, Vec()));
    finish_point(u.head(nv), u.segment(nv, me), Vec(), Vec());
    sol.iterations = 1;
    sol.status = (sol.primal_residual <= cfg.tol_feas &&
                  sol.dual_residual <= cfg.tol_feas * grad_scale(sol.x))
                     ? SolveStatus::Optimal
                     : SolveStatus::IterLimit;
    return sol;
  }

  // Phase 1: certify feasibility through the homogeneous embedding.
  {
    Vec zero_h = Vec::Zero(nv);
    KktSolver feas_kkt(zero_h, aeq, ain, sparse);
    FeasOutcome feas = certify_feasibility(feas_kkt, aeq, beq, ain, bin, cfg, reg);
    if (feas.verdict == FeasVerdict::Infeasible) {
      sol.status = SolveStatus::Infeasible;
      sol.certificate = std::move(feas.cert);
      return sol;
    }
  }

  // Phase 2: Mehrotra predictor-corrector on the QP.
  KktSolver kkt(h, aeq, ain, sparse);

  Vec x, y, s, z;
  {
    if (!kkt.factor(Vec::Ones(mi), std::max(reg, 1e-8))) return sol;
    const Vec u = kkt.solve(stack3(-c, beq, bin));
    x = u.head(nv);
    y = u.segment(nv, me);
    const Vec z_raw = u.tail(mi);
    const Vec s_raw = bin - ain * x;
    const Vec s1 =
        (s_raw.array() + std::max(0.0, -1.5 * (s_raw.size() ? s_raw.minCoeff() : 0.0))).matrix();
    const Vec z1 =
        (z_raw.array() + std::max(0.0, -1.5 * (z_raw.size() ? z_raw.minCoeff() : 0.0))).matrix();
    const Real dots = s1.dot(z1);
    const Real sum_s = s1.sum(), sum_z = z1.sum();
    s = (s1.array() + (sum_z > 1e-12 ? 0.5 * dots / sum_z : 1.0)).matrix();
    z = (z1.array() + (sum_s > 1e-12 ? 0.5 * dots / sum_s : 1.0)).matrix();
    const Real floor = 1e-4 * std::max(1.0, bscale);
    s = s.cwiseMax(floor);
    z = z.cwiseMax(floor);
  }

  Iterate best;
  Real prev_mu = kInf;
  int stall = 0;
  bool unbounded_hint = false;

  const auto record_best = [&](Real pinf, Real dinf, Real gap_rel, Real gs) {
    const Real merit = pinf / bscale + dinf / gs + gap_rel;
    if (merit < best.merit) best = {x, s, y, z, merit};
  };

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    const Vec rd = h.cwiseProduct(x) + c + aeq_t * y + ain_t * z;
    const Vec rp = aeq * x - beq;
    const Vec rg = ain * x + s - bin;
    const Real mu = s.dot(z) / mi;
    const Real comp_max = s.cwiseProduct(z).maxCoeff();
    const Real primal_obj = eval_objective(prog, x);
    const Real dual_obj = primal_obj - s.dot(z);
    const Real pinf = std::max(inf_norm(rp), inf_norm(rg));
    const Real dinf = inf_norm(rd);
    const Real gap_rel = s.dot(z) / (1 + std::abs(primal_obj));

    sol.trace.push_back({iter, primal_obj, dual_obj, mu, pinf, dinf});
    if (cfg.verbosity > 0)
      std::printf("iter %3d  obj %+.10e  mu %.3e  pinf %.3e  dinf %.3e\n", iter,
                  primal_obj, mu, pinf, dinf);
    const Real gs = grad_scale(x);
    record_best(pinf, dinf, gap_rel, gs);

    const bool accept =
        pinf <= cfg.tol_feas && dinf <= cfg.tol_feas * gs && gap_rel <= cfg.tol_gap;
    const bool polished = accept && comp_max <= 5 * cfg.tol_gap &&
                          pinf <= 0.2 * cfg.tol_feas && gap_rel <= 0.2 * cfg.tol_gap;
    if (polished) break;
    if (mu > 0.97 * prev_mu) {
      if (++stall >= 5) break;
    } else {
      stall = 0;
    }
    prev_mu = mu;
    if (primal_obj < -1e13 * bscale * cscale) {
      unbounded_hint = true;
      break;
    }

    Vec d = (s.array() / z.array()).cwiseMax(1e-30).cwiseMin(1e30).matrix();
    if (!kkt.factor(d, reg)) break;

    // affine scaling direction
    Vec rhs = stack3(-rd, -rp, -rg + s);
    Vec u = kkt.solve(rhs);
    Vec dx_a = u.head(nv), dy_a = u.segment(nv, me), dz_a = u.tail(mi);
    Vec ds_a = -s - d.cwiseProduct(dz_a);
    const Real ap_aff = std::min(1.0, max_step(s, ds_a));
    const Real ad_aff = std::min(1.0, max_step(z, dz_a));
    const Real mu_aff = (s + ap_aff * ds_a).dot(z + ad_aff * dz_a) / mi;
    Real sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3), 1e-8, 0.99);

    // corrector
    const Vec rc =
        ((s.cwiseProduct(z) + ds_a.cwiseProduct(dz_a)).array() - sigma * mu).matrix();
    rhs.tail(mi) = -rg + (rc.array() / z.array()).matrix();
    u = kkt.solve(rhs);
    const Vec dx = u.head(nv), dy = u.segment(nv, me), dz = u.tail(mi);
    const Vec ds = -(rc + s.cwiseProduct(dz)).cwiseQuotient(z);

    const Real eta = mu / (1 + std::abs(primal_obj)) > 1e-6 ? 0.995 : 0.9995;
    const Real ap = std::min(1.0, eta * max_step(s, ds));
    const Real ad = std::min(1.0, eta * max_step(z, dz));
    if (std::max(ap, ad) < 1e-10) break;
    x += ap * dx;
    s += ap * ds;
    y += ad * dy;
    z += ad * dz;
  }

  // classify from the best iterate
  x = best.x.size() ? best.x : x;
  s = best.s.size() ? best.s : s;
  y = best.y.size() ? best.y : y;
  z = best.z.size() ? best.z : z;
  normalize_parallel_duals(aeq, ain, y, z);
  finish_point(x, y, z, s);
  sol.iterations = iter;
  const bool accept = sol.primal_residual <= cfg.tol_feas &&
                      sol.dual_residual <= cfg.tol_feas * grad_scale(x) &&
                      sol.gap <= cfg.tol_gap;
  if (accept)
    sol.status = SolveStatus::Optimal;
  else if (unbounded_hint)
    sol.status = SolveStatus::Unbounded;
  else
    sol.status = SolveStatus::IterLimit;
  if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::IterLimit)
    sol.objective = kNaN;
  return sol;
}

/// Columns with no objective weight, no equality entries, and only
/// slack-loosening (nonpositive) inequality coefficients push the central
/// path to infinity: any large enough value is optimal, so the drift only
/// ruins the KKT conditioning. Storage capacities under an unbounded budget
/// are exactly of this kind. Such columns are removed together with the
/// rows they make vacuous; the reconstruction assigns the smallest value
/// (plus unit margin) covering the removed rows.
struct Presolve {
  std::vector<Index> dropped_cols;
  std::vector<char> keep_col, keep_row;
  std::vector<Index> col_map, row_map;  // old -> reduced (or -1)

  static Presolve analyze(const ConvexProgram& prog) {
    const Index nv = prog.num_vars();
    const Index mi = prog.num_in();
    Presolve p;
    p.keep_col.assign(nv, 1);
    p.keep_row.assign(mi, 1);

    std::vector<char> col_in_eq(nv, 0);
    for (int c = 0; c < prog.eq_mat.outerSize(); ++c)
      for (SpMat::InnerIterator it(prog.eq_mat, c); it; ++it)
        if (it.value() != 0) col_in_eq[it.col()] = 1;

    for (Index j = 0; j < nv; ++j) {
      if (prog.hessian_diag[j] != 0 || prog.linear[j] != 0 || col_in_eq[j]) continue;
      bool any_negative = false, any_positive = false;
      for (SpMat::InnerIterator it(prog.in_mat, j); it; ++it) {
        if (it.value() > 0) any_positive = true;
        if (it.value() < 0) any_negative = true;
      }
      if (any_positive || !any_negative) continue;
      p.keep_col[j] = 0;
      p.dropped_cols.push_back(j);
      for (SpMat::InnerIterator it(prog.in_mat, j); it; ++it) p.keep_row[it.row()] = 0;
    }
    return p;
  }

  bool trivial() const { return dropped_cols.empty(); }

  ConvexProgram reduce(const ConvexProgram& prog) {
    const Index nv = prog.num_vars();
    const Index mi = prog.num_in();
    col_map.assign(nv, -1);
    row_map.assign(mi, -1);
    Index ncol = 0, nrow = 0;
    for (Index j = 0; j < nv; ++j)
      if (keep_col[j]) col_map[j] = ncol++;
    for (Index i = 0; i < mi; ++i)
      if (keep_row[i]) row_map[i] = nrow++;

    ConvexProgram red;
    red.hessian_diag.resize(ncol);
    red.linear.resize(ncol);
    for (Index j = 0; j < nv; ++j)
      if (keep_col[j]) {
        red.hessian_diag[col_map[j]] = prog.hessian_diag[j];
        red.linear[col_map[j]] = prog.linear[j];
      }
    red.constant = prog.constant;

    std::vector<Triplet> tri;
    for (int c = 0; c < prog.eq_mat.outerSize(); ++c)
      for (SpMat::InnerIterator it(prog.eq_mat, c); it; ++it)
        tri.emplace_back(static_cast<int>(it.row()), static_cast<int>(col_map[it.col()]),
                         it.value());
    red.eq_mat.resize(prog.num_eq(), ncol);
    red.eq_mat.setFromTriplets(tri.begin(), tri.end());
    red.eq_rhs = prog.eq_rhs;
    red.eq_tags = prog.eq_tags;

    tri.clear();
    red.in_rhs.resize(nrow);
    red.in_tags.resize(nrow);
    for (Index i = 0; i < mi; ++i)
      if (keep_row[i]) {
        red.in_rhs[row_map[i]] = prog.in_rhs[i];
        red.in_tags[row_map[i]] = prog.in_tags[i];
      }
    for (int c = 0; c < prog.in_mat.outerSize(); ++c)
      for (SpMat::InnerIterator it(prog.in_mat, c); it; ++it)
        if (keep_row[it.row()])
          tri.emplace_back(static_cast<int>(row_map[it.row()]),
                           static_cast<int>(col_map[it.col()]), it.value());
    red.in_mat.resize(nrow, ncol);
    red.in_mat.setFromTriplets(tri.begin(), tri.end());
    return red;
  }

  void expand(const ConvexProgram& prog, Solution& sol) const {
    const Index nv = prog.num_vars();
    const Index mi = prog.num_in();
    Vec x = Vec::Zero(nv);
    if (sol.x.size())
      for (Index j = 0; j < nv; ++j)
        if (keep_col[j]) x[j] = sol.x[col_map[j]];
    // smallest covering value (plus unit margin) per dropped column; pending
    // columns contribute zero, which is safe: their coefficients only loosen
    const Eigen::SparseMatrix<Real, Eigen::RowMajor> in_rows = prog.in_mat;
    for (Index j : dropped_cols) {
      Real need = 0;
      for (SpMat::InnerIterator cit(prog.in_mat, j); cit; ++cit) {
        const Index r = cit.row();
        Real lhs = 0;
        for (Eigen::SparseMatrix<Real, Eigen::RowMajor>::InnerIterator rit(in_rows, r);
             rit; ++rit)
          if (rit.col() != j) lhs += rit.value() * x[rit.col()];
        need = std::max(need, (lhs - prog.in_rhs[r]) / (-cit.value()));
      }
      x[j] = need + 1.0;
    }
    sol.x = std::move(x);

    if (sol.dual_in.size()) {
      Vec z = Vec::Zero(mi);
      for (Index i = 0; i < mi; ++i)
        if (keep_row[i]) z[i] = sol.dual_in[row_map[i]];
      sol.dual_in = std::move(z);
      sol.slack = prog.in_rhs - prog.in_mat * sol.x;
      const Real eq_res =
          prog.num_eq() ? (prog.eq_mat * sol.x - prog.eq_rhs).cwiseAbs().maxCoeff() : 0.0;
      const Real in_res = mi ? std::max(0.0, (prog.in_mat * sol.x - prog.in_rhs).maxCoeff()) : 0.0;
      sol.primal_residual = std::max(eq_res, in_res);
      sol.dual_residual =
          inf_norm(Vec(prog.hessian_diag.cwiseProduct(sol.x) + prog.linear +
                       SpMat(prog.eq_mat.transpose()) * sol.dual_eq +
                       SpMat(prog.in_mat.transpose()) * sol.dual_in));
    }
    if (sol.certificate) {
      Vec z = Vec::Zero(mi);
      for (Index i = 0; i < mi; ++i)
        if (keep_row[i]) z[i] = sol.certificate->dual_in[row_map[i]];
      sol.certificate->dual_in = std::move(z);
    }
  }
};

Solution presolve_and_solve(const ConvexProgram& prog, const SolverConfig& cfg) {
  Presolve pre = Presolve::analyze(prog);
  if (pre.trivial()) return solve_impl(prog, cfg);
  const ConvexProgram reduced = pre.reduce(prog);
  Solution sol = solve_impl(reduced, cfg);
  pre.expand(prog, sol);
  return sol;
}

}  // namespace

Solution solve(const ConvexProgram& prog, const SolverConfig& cfg) {
  if (cfg.max_iters < 1 || !(cfg.tol_gap > 0) || !(cfg.tol_feas > 0) ||
      !(cfg.infeasibility_threshold > 0))
    throw std::invalid_argument("solver config: tolerances must be positive, max_iters >= 1");
  return presolve_and_solve(prog, cfg);
}

KKTReport kkt_report(const ConvexProgram& prog, const Solution& sol) {
  KKTReport rep;
  const Vec grad = prog.hessian_diag.cwiseProduct(sol.x) + prog.linear +
                   SpMat(prog.eq_mat.transpose()) * sol.dual_eq +
                   SpMat(prog.in_mat.transpose()) * sol.dual_in;
  rep.stationarity = inf_norm(grad);
  const Vec slack = prog.in_rhs - prog.in_mat * sol.x;
  rep.complementarity =
      slack.size() ? slack.cwiseProduct(sol.dual_in).cwiseAbs().maxCoeff() : 0.0;
  rep.dual_sign_min = sol.dual_in.size() ? sol.dual_in.minCoeff() : 0.0;
  rep.primal_feasibility = residuals(prog, sol.x, 0.0).max_violation;
  return rep;
}

}  // namespace gridstore
