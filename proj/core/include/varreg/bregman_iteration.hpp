#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "varreg/core.hpp"
#include "varreg/regularizers.hpp"
#include "varreg/solvers.hpp"

namespace varreg {

/// One iterate of the Bregman iteration. Step 0 is the start u = 0, p = 0,
/// v^0 = v.
struct BregmanStep {
  int k = 0;
  SolutionVector u;
  /// Maintained by p^{k+1} = p^k + F*(v - F u^{k+1}) / alpha.
  SolutionVector p;
  /// The data v^k handed to the next solve.
  DataVector v_shifted;
  /// |F u^k - v| (not halved).
  double residual = 0.0;
  double J_value = 0.0;
  /// d_J^{p^k}(reference, u^k) when a reference is supplied.
  std::optional<double> bregman_to_ref;
  /// |p^k - F*(v^{k-1} - F u^k)/alpha|: recursion against the solver's subgradient.
  double recursion_defect = 0.0;
};

struct BregmanOptions {
  int iterations = 10;
  /// Enables the discrepancy stop |F u^k - v| <= discrepancy_tau * noise_level.
  std::optional<double> noise_level;
  double discrepancy_tau = 1.1;
  std::optional<SolutionVector> reference;
};

struct BregmanTrace {
  std::vector<BregmanStep> steps;
  bool stopped_by_discrepancy = false;

  /// Columns k,residual,J_value,bregman_to_ref; the last is empty without a reference.
  void write_csv(std::ostream& out) const;
};

/// u^{k+1} in argmin 1/2 |F u - v^k|^2 + alpha J(u), v^{k+1} = v^k + v - F u^{k+1}.
/// Inner solves run at cfg.tol / 10. Throws ConvergenceError naming the
/// iteration when an inner solve fails, and std::runtime_error when the data
/// and subgradient forms disagree by more than 10 * tol.
BregmanTrace bregman_iterate(const LinearMap& map, const DataVector& data, double alpha,
                             const Regularizer& reg, const BregmanOptions& options,
                             const SolverConfig& cfg = {});

struct DebiasResult {
  SolutionVector u_debiased;
  RegularizedSolution first_step;
  std::vector<Index> support;
  /// Set when u_alpha = 0; u_debiased is then 0.
  bool empty_support = false;
  /// d_J^{p_alpha}(u_debiased, u_alpha).
  double bregman_to_first_step = 0.0;
  double residual_first = 0.0;
  double residual_debiased = 0.0;
  int iterations = 0;
};

/// l1 refit: least squares over vectors supported on supp(u_alpha) whose
/// entries keep the sign of u_alpha (zero allowed). Accelerated projected
/// gradient from u_alpha, finished by an exact solve on the free set.
DebiasResult debias_two_step(const LinearMap& map, const DataVector& data, double alpha,
                             const Regularizer& reg, const SolverConfig& cfg = {});

}  // namespace varreg
