#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "varreg/core.hpp"

namespace varreg {

enum class RegularizerKind { quadratic, l1, tv_aniso };

std::string_view to_string(RegularizerKind kind);
/// Parses "quadratic", "l1" or "tv"/"tv_aniso"; throws std::invalid_argument.
RegularizerKind parse_regularizer_kind(std::string_view text);

/// Forward difference between two pixels: (Du)_e = u[to] - u[from].
struct Edge {
  Index from = 0;
  Index to = 0;
};

/// Convex, nonnegative regularization functional with J(0) = 0:
///   quadratic  J(u) = 1/2 |u|^2
///   l1         J(u) = sum |u_i|
///   tv_aniso   J(u) = sum_e |(Du)_e|, forward differences with replicate
///              (Neumann) boundary, so boundary differences vanish and are
///              not stored as edges.
class Regularizer {
 public:
  static Regularizer quadratic();
  static Regularizer l1();
  static Regularizer tv_1d(Index n);
  /// Row-major image of rows x cols pixels.
  static Regularizer tv_2d(Index rows, Index cols);

  RegularizerKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return to_string(kind_); }
  bool has_prox() const noexcept { return kind_ != RegularizerKind::tv_aniso; }

  /// Required signal length for TV; 0 when any length is accepted.
  Index dim() const noexcept { return dim_; }
  void check_dim(const Vector& u) const;

  // Difference operator D (TV only).
  std::span<const Edge> edges() const noexcept;
  Index edge_count() const noexcept { return static_cast<Index>(edges().size()); }
  bool is_path() const noexcept { return path_; }
  Vector difference(const Vector& u) const;
  Vector difference_adjoint(const Vector& q) const;
  /// Upper bound for |D|^2 (twice the maximal vertex degree).
  double difference_norm_sq_bound() const noexcept { return norm_sq_bound_; }

 private:
  explicit Regularizer(RegularizerKind kind) : kind_(kind) {}

  RegularizerKind kind_;
  Index dim_ = 0;
  bool path_ = false;
  double norm_sq_bound_ = 0.0;
  std::shared_ptr<const std::vector<Edge>> edges_;
};

double value(const Regularizer& reg, const Vector& u);

/// argmin_y 1/2 |y - x|^2 + tau J(y). Throws UnsupportedOperation for TV.
Vector prox(const Regularizer& reg, double tau, const Vector& x);

/// The subgradient induced by the optimality condition
/// F*(F u - v) + alpha p = 0, i.e. p = F*(v - F u) / alpha. Membership in
/// dJ(u) is not asserted here.
Vector subgradient_from_optimality(const LinearMap& map, const DataVector& data,
                                   const SolutionVector& u, double alpha);

/// Euclidean distance from p to dJ(u). Exact for quadratic and l1. For TV it
/// is the residual min |D^T q - p| over dual fields q with q_e = sign((Du)_e)
/// on jumps and |q_e| <= 1 elsewhere, computed by accelerated projected
/// gradient; the result is an upper bound that is tight at convergence.
/// `dual_hint` warm-starts the TV solve and receives the final dual field;
/// the TV solve stops early once the residual is <= `target`.
double subdifferential_distance(const Regularizer& reg, const Vector& u, const Vector& p,
                                Vector* dual_hint = nullptr, double target = 0.0);

struct SubgradientCheck {
  bool member = false;
  /// max(distance to dJ(u), worst normalised violation of
  /// J(w) >= J(u) + <p, w - u> over 100 seeded test points w).
  double violation = 0.0;
};

SubgradientCheck is_subgradient(const Regularizer& reg, const Vector& u, const Vector& p,
                                double tol);

inline constexpr double kMembershipTol = 1e-6;

/// d_J^p(w, u) = J(w) - J(u) - <p, w - u> for p in dJ(u).
/// Throws MembershipError if p fails is_subgradient(reg, u, p, tol) or the
/// distance is negative beyond roundoff; small negative values clamp to 0.
double bregman_distance(const Regularizer& reg, const Vector& w, const Vector& u,
                        const Vector& p, double tol = kMembershipTol);

/// <pw - pu, w - u> for pw in dJ(w), pu in dJ(u).
double symmetric_bregman(const Regularizer& reg, const Vector& w, const Vector& u,
                         const Vector& pw, const Vector& pu, double tol = kMembershipTol);

}  // namespace varreg
