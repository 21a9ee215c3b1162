#pragma once

#include <cstdint>
#include <string>

#include "varreg/core.hpp"
#include "varreg/regularizers.hpp"

namespace varreg {

struct SolverConfig {
  int max_iters = 20000;
  /// Relative optimality-defect target: defect <= tol * (1 + |F* v|).
  double tol = 1e-8;
  /// Fraction of 1/L used as the gradient step, in (0, 1].
  double step_safety = 0.99;
  std::uint64_t seed = 0;
  /// Start from a small seeded perturbation of 0 instead of 0.
  bool random_init = false;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct RegularizedSolution {
  SolutionVector u_alpha;
  /// F*(v - F u_alpha) / alpha.
  SolutionVector p_alpha;
  double alpha = 0.0;
  /// 1/2 |F u_alpha - v|^2
  double data_residual = 0.0;
  double J_value = 0.0;
  /// alpha * dist(p_alpha, dJ(u_alpha)), i.e. the smallest
  /// |F*(F u_alpha - v) + alpha g| over g in dJ(u_alpha).
  double optimality_defect = 0.0;
  double defect_target = 0.0;
  int iterations = 0;
  std::string method;
};

/// D_alpha(u) = 1/2 |F u - v|^2 + alpha J(u).
double objective(const LinearMap& map, const DataVector& data, const Regularizer& reg,
                 const SolutionVector& u, double alpha);

/// The defect target tol * (1 + |F* v|) used by every solver.
double defect_target(const LinearMap& map, const DataVector& data, const SolverConfig& cfg);

/// Conjugate gradients on (F*F + alpha I) u = F* v.
RegularizedSolution solve_tikhonov_exact(const LinearMap& map, const DataVector& data, double alpha,
                                         const SolverConfig& cfg = {});

/// Accelerated proximal gradient with adaptive restart, for quadratic and l1.
/// l1 solves are finished by a least-squares polish on the detected support.
RegularizedSolution solve_fista(const LinearMap& map, const DataVector& data, double alpha,
                                const Regularizer& reg, const SolverConfig& cfg = {});

/// Chambolle-Pock iteration for tv_aniso, finished by an exact solve on the
/// piecewise-constant structure of the iterate.
RegularizedSolution solve_primal_dual(const LinearMap& map, const DataVector& data, double alpha,
                                      const Regularizer& reg, const SolverConfig& cfg = {});

/// quadratic -> solve_tikhonov_exact, l1 -> solve_fista, tv_aniso -> solve_primal_dual.
RegularizedSolution solve_variational(const LinearMap& map, const DataVector& data, double alpha,
                                      const Regularizer& reg, const SolverConfig& cfg = {});

/// Optimality defect alpha * dist(F*(v - F u)/alpha, dJ(u)) of an arbitrary u.
double optimality_defect(const LinearMap& map, const DataVector& data, const Regularizer& reg,
                         const SolutionVector& u, double alpha);

}  // namespace varreg
