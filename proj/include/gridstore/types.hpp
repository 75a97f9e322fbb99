#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cassert>
#include <limits>

namespace gridstore {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;
using Index = Eigen::Index;

/// A capacity-like quantity (generation cap, line rating, storage budget)
/// that may be unbounded. Unbounded is an explicit state, never a large
/// float stand-in.
class Cap {
 public:
  constexpr Cap() = default;  // unbounded
  static constexpr Cap unbounded() { return Cap{}; }
  static constexpr Cap finite(Real v) {
    Cap c;
    c.finite_ = true;
    c.value_ = v;
    return c;
  }

  constexpr bool is_finite() const { return finite_; }
  constexpr bool is_unbounded() const { return !finite_; }
  constexpr Real value() const {
    assert(finite_);
    return value_;
  }
  /// +inf when unbounded; for formulas that tolerate infinities.
  constexpr Real as_real() const {
    return finite_ ? value_ : std::numeric_limits<Real>::infinity();
  }

  friend constexpr Cap min(Cap a, Cap b) {
    if (a.is_unbounded()) return b;
    if (b.is_unbounded()) return a;
    return finite(a.value_ < b.value_ ? a.value_ : b.value_);
  }
  friend constexpr bool operator==(Cap a, Cap b) {
    return a.finite_ == b.finite_ && (!a.finite_ || a.value_ == b.value_);
  }
  friend constexpr bool operator!=(Cap a, Cap b) { return !(a == b); }

 private:
  bool finite_ = false;
  Real value_ = 0;
};

}  // namespace gridstore
