#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "varreg/core.hpp"
#include "varreg/regularizers.hpp"
#include "varreg/solvers.hpp"

namespace varreg {

/// Ground truth satisfying the source condition p* = F* z* in dJ(u*).
struct SourceInstance {
  SolutionVector u_star;
  SolutionVector p_star;
  DataVector z_star;
  /// F u*
  DataVector v_star;
  /// |F* z* - p*|
  double defect = 0.0;
  std::uint64_t seed = 0;
  /// Number of rejected draws before this one.
  int redraws = 0;
};

/// Draws z* first and builds u* so that F* z* is a subgradient at u*:
///   quadratic  u* = p*
///   l1         p* rescaled to max |p*_i| = 1, support {|p*_i| >= 0.99}
///   tv_aniso   1-d: jumps where the integrated dual saturates;
///              2-d: a constant u* with an interior dual field.
/// Saturated entries are made exact by a minimum-norm correction of z*.
/// Asserts membership and defect <= 1e-10; degenerate draws are redrawn.
SourceInstance construct_source_instance(const LinearMap& map, const Regularizer& reg, std::uint64_t seed);

/// Same construction from a given z* (rescaled and corrected as above); the
/// seed only drives the magnitudes of u*. Throws std::invalid_argument when
/// z* gives a degenerate instance.
SourceInstance source_instance_from(const LinearMap& map, const Regularizer& reg, const DataVector& z_star,
                                    std::uint64_t seed = 0);

struct SourceElement {
  DataVector z;
  /// |F* z - p*|
  double defect = 0.0;
  int iterations = 0;
};

/// Minimum-norm least-squares solution of F* z = p* by CGLS started at 0.
SourceElement solve_source_element(const LinearMap& map, const SolutionVector& p_star,
                                   const SolverConfig& cfg = {});

/// D_rho(p*) = min { |F* z - p*| : |z| <= rho }.
double distance_function(const LinearMap& map, const SolutionVector& p_star, double rho,
                         const SolverConfig& cfg = {});

struct EstimateReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double headroom = 0.0;
  /// rhs - lhs
  double slack = 0.0;
  bool holds = false;
  std::vector<std::pair<std::string, double>> components;

  /// Throws std::out_of_range for unknown names.
  double component(const std::string& name) const;
  void print(std::ostream& out) const;
};

/// holds <=> lhs <= rhs + 10 * tol * (1 + |rhs|).
EstimateReport make_report(double lhs, double rhs, double tol,
                           std::vector<std::pair<std::string, double>> components);

/// 1/2 |F(u_alpha - u*)|^2 + alpha d_sym(u_alpha, u*) <= |v - v*|^2 + alpha^2 |z*|^2.
/// Pass `solved` to reuse a solution of the same problem.
EstimateReport check_error_estimate(const LinearMap& map, const Regularizer& reg,
                                    const SourceInstance& instance, const DataVector& data,
                                    double alpha, const SolverConfig& cfg = {},
                                    const RegularizedSolution* solved = nullptr);

/// d_sym(u_alpha, u*) <= |v - v*|^2 / alpha + alpha |z*|^2.
EstimateReport check_effective_estimate(const LinearMap& map, const Regularizer& reg,
                                        const SourceInstance& instance, const DataVector& data,
                                        double alpha, const SolverConfig& cfg = {},
                                        const RegularizedSolution* solved = nullptr);

/// Instance for the strengthened condition p* = F*F eta*.
struct HigherOrderInstance {
  SolutionVector u_star;
  SolutionVector eta_star;
  SolutionVector p_star;
  DataVector v_star;
  /// l1 only: min_{supp} |u*_i| / |eta*|_inf; below it u* - alpha eta* keeps the signs of u*.
  double sign_threshold = 0.0;
};

/// quadratic: u* = p* = F*F eta*. l1: eta* supported on a random support S
/// with F_S^T F_S eta*_S = sign pattern; redrawn until |p*| < 1 off S.
HigherOrderInstance construct_higher_order_instance(const LinearMap& map, const Regularizer& reg,
                                                    std::uint64_t seed);

/// d^{p*}(u_alpha, u*) <= d^{p*}(u* - alpha eta*, u*) + |v - v*|^2 / (2 alpha),
/// p* = F*F eta*. Throws MembershipError when p* is not a subgradient at u*.
EstimateReport check_higher_order_estimate(const LinearMap& map, const Regularizer& reg,
                                           const SolutionVector& u_star, const SolutionVector& eta_star,
                                           const DataVector& data, double alpha,
                                           const SolverConfig& cfg = {});

/// v*_alpha = v* + alpha z*, for which u* is a minimiser of D_alpha.
DataVector range_condition_data(const SourceInstance& instance, double alpha);

/// Optimality defect of u* for the data v*_alpha.
double range_condition_defect(const LinearMap& map, const Regularizer& reg,
                              const SourceInstance& instance, double alpha);

enum class AlphaRule { linear, quadratic };

struct ConvergenceOptions {
  double delta0 = 1e-3;
  double c = 1.0;
  int n_max = 8;
  /// linear: alpha_n = c delta_n. quadratic: alpha_n = delta_n^2, a rule
  /// under which no convergence is asserted.
  AlphaRule rule = AlphaRule::linear;
  std::uint64_t seed = 0;
  /// Admissible band for the fitted per-halving decay ratio.
  double ratio_low = 0.4;
  double ratio_high = 0.6;
  /// The band is asserted only when set (the rate is meaningful for quadratic J).
  bool assert_rate = true;
  /// Tolerance for |J(u_{n_max}) - J(u*)|.
  double J_tolerance = 1e-4;
};

struct ConvergenceRow {
  int n = 0;
  double delta = 0.0;
  double alpha = 0.0;
  double bregman = 0.0;
  double bound = 0.0;
  double output_err = 0.0;
  double J_value = 0.0;
  bool within_bound = false;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  /// 2^slope of the least-squares fit of log2(bregman) against n.
  double fitted_ratio = 0.0;
  std::vector<double> step_ratios;
  double J_star = 0.0;
  double J_gap_final = 0.0;
  bool bounds_hold = false;
  bool rate_in_band = false;
  bool J_converged = false;
  /// False for the quadratic rule: only the bound column is checked.
  bool convergence_asserted = false;
  bool passed = false;

  /// Columns n,delta,alpha,bregman,bound,output_err,J_value.
  void write_csv(std::ostream& out) const;
};

/// Noisy data v_n = v* + delta_n d with delta_n = delta0 2^{-n} and a fixed
/// seeded unit direction d; records the symmetric Bregman distance to u*.
ConvergenceResult convergence_study(const LinearMap& map, const Regularizer& reg,
                                    const SourceInstance& instance, const ConvergenceOptions& options,
                                    const SolverConfig& cfg = {});

struct BiasVarianceOptions {
  double noise_sigma = 0.1;
  std::vector<double> alpha_grid;
  int replicates = 200;
  std::uint64_t seed = 0;
};

struct BiasVarianceRow {
  double alpha = 0.0;
  double mean_bregman = 0.0;
  double stderr_bregman = 0.0;
  /// m sigma^2 / alpha + alpha |z*|^2
  double bound = 0.0;
  bool holds = false;
};

struct BiasVarianceResult {
  std::vector<BiasVarianceRow> rows;
  std::size_t argmin = 0;
  bool interior_minimum = false;
  bool all_hold = false;
  double noise_energy_mean = 0.0;
  double noise_energy_stderr = 0.0;
  /// Mean of |v - v*|^2 within 3 standard errors of m sigma^2.
  bool noise_moment_ok = false;

  /// Columns alpha,mean_bregman,stderr,bound.
  void write_csv(std::ostream& out) const;
};

/// Monte Carlo over replicates with common noise draws across the alpha grid.
BiasVarianceResult bias_variance_study(const LinearMap& map, const Regularizer& reg,
                                       const SourceInstance& instance, const BiasVarianceOptions& options,
                                       const SolverConfig& cfg = {});

}  // namespace varreg
