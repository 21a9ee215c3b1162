#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace varreg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Element of the parameter (solution) space.
using SolutionVector = Vector;
/// Element of the data space.
using DataVector = Vector;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A claimed subgradient failed its membership check.
class MembershipError : public std::runtime_error {
 public:
  MembershipError(const std::string& what, double violation)
      : std::runtime_error(what), violation_(violation) {}
  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

/// An iterative method did not reach its target within the iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}
  double last_residual() const noexcept { return last_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

/// Euclidean inner product; throws DimensionError on size mismatch.
double inner(const Vector& a, const Vector& b);
double norm(const Vector& a);

bool all_finite(const Vector& a);
/// Throws std::invalid_argument naming `what` if any entry is NaN or Inf.
void require_finite(const Vector& a, std::string_view what);

/// Bounded linear operator between finite-dimensional spaces together with
/// its exact adjoint. Immutable and cheap to copy (shared backend).
///
/// Matrix-backed maps (dense or row-major sparse) expose their storage so that
/// row sampling can extract rows directly instead of composing.
class LinearMap {
 public:
  using Action = std::function<Vector(const Vector&)>;

  LinearMap(Index in_dim, Index out_dim, Action apply, Action adjoint,
            std::string name = "custom");

  static LinearMap from_dense(DenseMatrix matrix, std::string name = "dense");
  static LinearMap from_sparse(SparseMatrix matrix, std::string name = "sparse");

  Index in_dim() const noexcept;
  Index out_dim() const noexcept;
  const std::string& name() const noexcept;

  Vector apply(const Vector& u) const;
  Vector adjoint(const Vector& v) const;

  /// The map v -> F* v, whose adjoint is F.
  LinearMap transposed() const;

  const DenseMatrix* dense_matrix() const noexcept;
  const SparseMatrix* sparse_matrix() const noexcept;

  /// Materialises the operator column by column.
  DenseMatrix to_dense() const;
  /// F*F as a dense in_dim x in_dim matrix.
  DenseMatrix normal_matrix() const;

 private:
  struct Backend;
  explicit LinearMap(std::shared_ptr<const Backend> backend);
  std::shared_ptr<const Backend> impl_;
};

/// max over `trials` of |<Fu,v> - <u,F*v>| / (|u| |v|) for seeded Gaussian u, v.
double adjoint_consistency_check(const LinearMap& map, int trials, std::uint64_t seed);

/// Power iteration on F*F. Returns the running maximum of |F x_k| over the
/// normalised iterates, a lower bound of |F| that is nondecreasing in `iters`.
/// Returns 0 for the zero operator.
double operator_norm_estimate(const LinearMap& map, int iters = 200, std::uint64_t seed = 0);

}  // namespace varreg
