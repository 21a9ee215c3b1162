#include "varreg/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "varreg/rng.hpp"

namespace varreg {

double inner(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("inner: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  return a.dot(b);
}

double norm(const Vector& a) { return a.norm(); }

bool all_finite(const Vector& a) { return a.allFinite(); }

void require_finite(const Vector& a, std::string_view what) {
  if (!a.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

struct LinearMap::Backend {
  Index in_dim = 0;
  Index out_dim = 0;
  std::string name;
  Action apply;
  Action adjoint;
  std::shared_ptr<const DenseMatrix> dense;
  std::shared_ptr<const SparseMatrix> sparse;
};

LinearMap::LinearMap(std::shared_ptr<const Backend> backend) : impl_(std::move(backend)) {}

LinearMap::LinearMap(Index in_dim, Index out_dim, Action apply, Action adjoint, std::string name) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("LinearMap: dimensions must be positive");
  if (!apply || !adjoint) throw std::invalid_argument("LinearMap: apply and adjoint are required");
  auto b = std::make_shared<Backend>();
  b->in_dim = in_dim;
  b->out_dim = out_dim;
  b->name = std::move(name);
  b->apply = std::move(apply);
  b->adjoint = std::move(adjoint);
  impl_ = std::move(b);
}

LinearMap LinearMap::from_dense(DenseMatrix matrix, std::string name) {
  if (matrix.rows() == 0 || matrix.cols() == 0) throw DimensionError("from_dense: empty matrix");
  if (!matrix.allFinite()) throw std::invalid_argument("from_dense: non-finite entry");
  auto m = std::make_shared<const DenseMatrix>(std::move(matrix));
  auto b = std::make_shared<Backend>();
  b->in_dim = m->cols();
  b->out_dim = m->rows();
  b->name = std::move(name);
  b->apply = [m](const Vector& u) -> Vector { return (*m) * u; };
  b->adjoint = [m](const Vector& v) -> Vector { return m->transpose() * v; };
  b->dense = m;
  return LinearMap(std::move(b));
}

LinearMap LinearMap::from_sparse(SparseMatrix matrix, std::string name) {
  if (matrix.rows() == 0 || matrix.cols() == 0) throw DimensionError("from_sparse: empty matrix");
  matrix.makeCompressed();
  auto m = std::make_shared<const SparseMatrix>(std::move(matrix));
  auto b = std::make_shared<Backend>();
  b->in_dim = m->cols();
  b->out_dim = m->rows();
  b->name = std::move(name);
  b->apply = [m](const Vector& u) -> Vector { return (*m) * u; };
  b->adjoint = [m](const Vector& v) -> Vector { return m->transpose() * v; };
  b->sparse = m;
  return LinearMap(std::move(b));
}

Index LinearMap::in_dim() const noexcept { return impl_->in_dim; }
Index LinearMap::out_dim() const noexcept { return impl_->out_dim; }
const std::string& LinearMap::name() const noexcept { return impl_->name; }

Vector LinearMap::apply(const Vector& u) const {
  if (u.size() != impl_->in_dim) {
    throw DimensionError(impl_->name + ".apply: expected " + std::to_string(impl_->in_dim) +
                         " entries, got " + std::to_string(u.size()));
  }
  return impl_->apply(u);
}

Vector LinearMap::adjoint(const Vector& v) const {
  if (v.size() != impl_->out_dim) {
    throw DimensionError(impl_->name + ".adjoint: expected " + std::to_string(impl_->out_dim) +
                         " entries, got " + std::to_string(v.size()));
  }
  return impl_->adjoint(v);
}

LinearMap LinearMap::transposed() const {
  auto b = std::make_shared<Backend>();
  b->in_dim = impl_->out_dim;
  b->out_dim = impl_->in_dim;
  b->name = impl_->name + "^T";
  b->apply = impl_->adjoint;
  b->adjoint = impl_->apply;
  if (impl_->dense) b->dense = std::make_shared<const DenseMatrix>(impl_->dense->transpose());
  if (impl_->sparse) {
    b->sparse = std::make_shared<const SparseMatrix>(SparseMatrix(impl_->sparse->transpose()));
  }
  return LinearMap(std::move(b));
}

const DenseMatrix* LinearMap::dense_matrix() const noexcept { return impl_->dense.get(); }
const SparseMatrix* LinearMap::sparse_matrix() const noexcept { return impl_->sparse.get(); }

DenseMatrix LinearMap::to_dense() const {
  if (impl_->dense) return *impl_->dense;
  if (impl_->sparse) return DenseMatrix(*impl_->sparse);
  DenseMatrix out(out_dim(), in_dim());
  Vector e = Vector::Zero(in_dim());
  for (Index j = 0; j < in_dim(); ++j) {
    e[j] = 1.0;
    out.col(j) = apply(e);
    e[j] = 0.0;
  }
  return out;
}

double adjoint_consistency_check(const LinearMap& map, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("adjoint_consistency_check: trials must be >= 1");
  Rng rng(seed, "adjoint-check");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector u = rng.gaussian_vector(map.in_dim());
    const Vector v = rng.gaussian_vector(map.out_dim());
    const double lhs = inner(map.apply(u), v);
    const double rhs = inner(u, map.adjoint(v));
    worst = std::max(worst, std::abs(lhs - rhs) / (u.norm() * v.norm()));
  }
  return worst;
}

DenseMatrix LinearMap::normal_matrix() const {
  if (impl_->sparse) {
    const Eigen::SparseMatrix<double> prod =
        Eigen::SparseMatrix<double>(impl_->sparse->transpose()) * (*impl_->sparse);
    return DenseMatrix(prod);
  }
  if (impl_->dense) return impl_->dense->transpose() * (*impl_->dense);
  const Index n = in_dim();
  DenseMatrix g(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    g.col(j) = adjoint(apply(e));
    e[j] = 0.0;
  }
  return g;
}

double operator_norm_estimate(const LinearMap& map, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("operator_norm_estimate: iters must be >= 1");
  Rng rng(seed, "power-iteration");
  Vector x = rng.gaussian_vector(map.in_dim());
  x /= x.norm();
  double best = 0.0;
  for (int k = 0; k < iters; ++k) {
    const Vector fx = map.apply(x);
    best = std::max(best, fx.norm());
    Vector next = map.adjoint(fx);
    const double nn = next.norm();
    if (nn == 0.0 || !std::isfinite(nn)) break;
    x = next / nn;
  }
  return best;
}

}  // namespace varreg
