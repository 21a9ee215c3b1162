#pragma once

#include <cstdint>

#include "varreg/core.hpp"
#include "varreg/estimates.hpp"
#include "varreg/operators.hpp"
#include "varreg/regularizers.hpp"
#include "varreg/solvers.hpp"

namespace varreg {

/// Population and empirical views of one linear model theta -> F theta.
///
/// The population is a fixed quadrature: every row of `base` with weight 1/m.
/// The empirical side samples rows of `base` through `design`; its norm is the
/// weighted sample mean.
struct RiskPair {
  LinearMap base;
  /// sqrt(1/m) * base, so |F u - v|^2 is the mean over all rays.
  LinearMap population_map;
  /// sqrt(weight_i) * row sample_rows[i] of base.
  LinearMap empirical_map;
  /// F theta* (noise-free; the noise enters population_risk analytically).
  DataVector v_pop;
  /// F~ theta* + sqrt(weight_i) noise_i.
  DataVector v_emp;
  SolutionVector theta_star;
  SampledDesign design;
  /// Standard deviation of the additive noise on a single observation.
  double noise_sigma = 0.0;
};

/// The design's noise is used as drawn; `noise_sigma` only fixes the
/// analytic noise moment of the population risk.
RiskPair make_risk_pair(const LinearMap& base, const SolutionVector& theta_star, const SampledDesign& design,
                        double noise_sigma);

/// 1/2 |F~ theta - v~|^2.
double empirical_risk(const RiskPair& pair, const SolutionVector& theta);

/// 1/2 |F theta - v|^2 + 1/2 sigma^2.
double population_risk(const RiskPair& pair, const SolutionVector& theta);

/// population_risk - empirical_risk (signed).
double generalization_error(const RiskPair& pair, const SolutionVector& theta);

struct ErrorDecomposition {
  /// G(theta)
  double generalization = 0.0;
  /// R^(theta) - R^(theta*)
  double approximation = 0.0;
  /// R^(theta*) - R(theta*)
  double sampling = 0.0;
  double sum = 0.0;
  /// R(theta) - R(theta*), evaluated directly.
  double excess_risk = 0.0;
};

/// Three-term split of the excess population risk. `f_star_risk_pop` and
/// `f_star_risk_emp` are R(theta*) and R^(theta*) at the population minimiser.
/// Throws std::runtime_error when the terms fail to sum to the directly
/// evaluated excess risk within 1e-10 * max(1, scale).
ErrorDecomposition error_decomposition(const RiskPair& pair, const SolutionVector& theta,
                                       double f_star_risk_pop, double f_star_risk_emp);

/// Minimiser of the population risk: (F*F + alpha I) theta = F* v with
/// alpha = 1e-10, by dense LDL^T.
SolutionVector population_minimizer(const RiskPair& pair, double alpha = 1e-10);

/// With G(u) = |F u - v|^2 - |F~ u - v~|^2 (no halves):
///   1/4 |F(u_alpha - u*)|^2 + alpha d_sym <= alpha^2 |z*|^2 + |F~ u* - v~|^2 + 1/2 G(u_alpha),
/// u_alpha solved against (F~, v~). The instance must be built on
/// pair.population_map with u* = pair.theta_star. For a noiseless design the
/// component "consistent_holds" reports d_sym <= alpha |z*|^2 + G / (2 alpha).
EstimateReport check_operator_error_estimate(const RiskPair& pair, const Regularizer& reg,
                                             const SourceInstance& instance, double alpha,
                                             const SolverConfig& cfg = {});

/// With G the signed generalization error of the halved losses:
///   1/4 |F(theta_alpha - theta*)|^2 + alpha d_sym <= 1/2 G(theta_alpha) + alpha^2 |z*|^2 + |F~ theta* - v~|^2.
/// The component "unhalved_variant_slack" gives the slack of the same
/// inequality with G(u) = |F u - v|^2 - |F~ u - v~|^2 + sigma^2.
EstimateReport check_risk_theorem(const RiskPair& pair, const Regularizer& reg, const SolutionVector& theta_star,
                                  const SolutionVector& p_star, const DataVector& z_star, double alpha,
                                  const SolverConfig& cfg = {});

}  // namespace varreg
