#pragma once

#include <cmath>

#include "varreg/core.hpp"

namespace varreg::detail {

struct CgResult {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Conjugate gradients for a symmetric positive semidefinite operator.
// Stops when |b - A x| <= abs_tol; the returned residual is recomputed.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, const Vector& b, Vector x, double abs_tol, int max_iter) {
  CgResult out;
  if (x.size() != b.size()) x = Vector::Zero(b.size());
  Vector r = b - apply(x);
  double rr = r.squaredNorm();
  Vector d = r;
  int k = 0;
  for (; k < max_iter && std::sqrt(rr) > abs_tol; ++k) {
    const Vector ad = apply(d);
    const double dad = d.dot(ad);
    if (!(dad > 0.0)) break;
    const double step = rr / dad;
    x += step * d;
    r -= step * ad;
    const double rr_next = r.squaredNorm();
    d = r + (rr_next / rr) * d;
    rr = rr_next;
    if (k % 50 == 49) {
      // Guard against drift of the recursive residual.
      r = b - apply(x);
      rr = r.squaredNorm();
    }
  }
  out.residual = (b - apply(x)).norm();
  out.converged = out.residual <= abs_tol;
  out.iterations = k;
  out.x = std::move(x);
  return out;
}

}  // namespace varreg::detail
