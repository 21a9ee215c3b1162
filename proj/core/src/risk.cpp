#include "varreg/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace varreg {

RiskPair make_risk_pair(const LinearMap& base, const SolutionVector& theta_star, const SampledDesign& design,
                        double noise_sigma) {
  if (theta_star.size() != base.in_dim()) throw DimensionError("make_risk_pair: theta* has the wrong dimension");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("make_risk_pair: noise_sigma must be >= 0");
  require_finite(theta_star, "theta*");
  RiskPair pair{base,
                make_sampled(base, SampledDesign::full(base.out_dim())),
                make_sampled(base, design),
                DataVector(),
                DataVector(),
                theta_star,
                design,
                noise_sigma};
  pair.v_pop = pair.population_map.apply(theta_star);
  pair.v_emp = pair.empirical_map.apply(theta_star);
  if (design.noise.size() == design.size()) {
    for (Index i = 0; i < design.size(); ++i) {
      pair.v_emp[i] += std::sqrt(design.weights[static_cast<std::size_t>(i)]) * design.noise[i];
    }
  }
  return pair;
}

double empirical_risk(const RiskPair& pair, const SolutionVector& theta) {
  return 0.5 * (pair.empirical_map.apply(theta) - pair.v_emp).squaredNorm();
}

double population_risk(const RiskPair& pair, const SolutionVector& theta) {
  return 0.5 * (pair.population_map.apply(theta) - pair.v_pop).squaredNorm() +
         0.5 * pair.noise_sigma * pair.noise_sigma;
}

double generalization_error(const RiskPair& pair, const SolutionVector& theta) {
  return population_risk(pair, theta) - empirical_risk(pair, theta);
}

ErrorDecomposition error_decomposition(const RiskPair& pair, const SolutionVector& theta,
                                       double f_star_risk_pop, double f_star_risk_emp) {
  ErrorDecomposition d;
  const double pop = population_risk(pair, theta);
  const double emp = empirical_risk(pair, theta);
  d.generalization = pop - emp;
  d.approximation = emp - f_star_risk_emp;
  d.sampling = f_star_risk_emp - f_star_risk_pop;
  d.sum = d.generalization + d.approximation + d.sampling;
  d.excess_risk = pop - f_star_risk_pop;
  const double scale = std::max({1.0, std::abs(pop), std::abs(emp), std::abs(f_star_risk_pop),
                                 std::abs(f_star_risk_emp)});
  if (std::abs(d.sum - d.excess_risk) > 1e-10 * scale) {
    throw std::runtime_error("error_decomposition: terms do not sum to the excess risk");
  }
  return d;
}

SolutionVector population_minimizer(const RiskPair& pair, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("population_minimizer: alpha must be positive");
  DenseMatrix g = pair.population_map.normal_matrix();
  g.diagonal().array() += alpha;
  const Eigen::LDLT<DenseMatrix> ldlt(g);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("population_minimizer: factorisation failed");
  return ldlt.solve(pair.population_map.adjoint(pair.v_pop));
}

namespace {

bool design_is_noiseless(const SampledDesign& design) {
  return design.noise.size() == 0 || design.noise.cwiseAbs().maxCoeff() == 0.0;
}

double membership_tol(const RegularizedSolution& s) {
  return std::max(kMembershipTol, 2.0 * s.optimality_defect / s.alpha);
}

}  // namespace

EstimateReport check_operator_error_estimate(const RiskPair& pair, const Regularizer& reg,
                                             const SourceInstance& instance, double alpha,
                                             const SolverConfig& cfg) {
  if (instance.u_star.size() != pair.theta_star.size() ||
      (instance.u_star - pair.theta_star).norm() > 1e-12 * (1.0 + pair.theta_star.norm())) {
    throw std::invalid_argument("check_operator_error_estimate: instance u* differs from the pair's theta*");
  }
  if (instance.z_star.size() != pair.population_map.out_dim()) {
    throw DimensionError("check_operator_error_estimate: z* must live in the population data space");
  }
  const auto s = solve_variational(pair.empirical_map, pair.v_emp, alpha, reg, cfg);
  const Vector e = s.u_alpha - instance.u_star;
  const double dsym = symmetric_bregman(reg, s.u_alpha, instance.u_star, s.p_alpha, instance.p_star,
                                        membership_tol(s));
  const double quarter = 0.25 * pair.population_map.apply(e).squaredNorm();
  const double g = (pair.population_map.apply(s.u_alpha) - pair.v_pop).squaredNorm() -
                   (pair.empirical_map.apply(s.u_alpha) - pair.v_emp).squaredNorm();
  const double bias = alpha * alpha * instance.z_star.squaredNorm();
  const double noise = (pair.empirical_map.apply(instance.u_star) - pair.v_emp).squaredNorm();
  std::vector<std::pair<std::string, double>> comps{{"quarter_output_error", quarter},
                                                    {"alpha_dsym", alpha * dsym},
                                                    {"symmetric_bregman", dsym},
                                                    {"G_unhalved", g},
                                                    {"alpha2_zstar2", bias},
                                                    {"empirical_noise_energy", noise},
                                                    {"optimality_defect", s.optimality_defect}};
  auto report = make_report(quarter + alpha * dsym, bias + noise + 0.5 * g, cfg.tol, comps);
  if (design_is_noiseless(pair.design)) {
    const double rhs = alpha * instance.z_star.squaredNorm() + g / (2.0 * alpha);
    const auto consistent = make_report(dsym, rhs, cfg.tol, {});
    report.components.emplace_back("consistent_rhs", rhs);
    report.components.emplace_back("consistent_holds", consistent.holds ? 1.0 : 0.0);
    report.holds = report.holds && consistent.holds;
  }
  return report;
}

EstimateReport check_risk_theorem(const RiskPair& pair, const Regularizer& reg, const SolutionVector& theta_star,
                                  const SolutionVector& p_star, const DataVector& z_star, double alpha,
                                  const SolverConfig& cfg) {
  if (theta_star.size() != pair.population_map.in_dim() || p_star.size() != theta_star.size()) {
    throw DimensionError("check_risk_theorem: theta* and p* must live in the solution space");
  }
  if (z_star.size() != pair.population_map.out_dim()) {
    throw DimensionError("check_risk_theorem: z* must live in the population data space");
  }
  const auto s = solve_variational(pair.empirical_map, pair.v_emp, alpha, reg, cfg);
  const double dsym = symmetric_bregman(reg, s.u_alpha, theta_star, s.p_alpha, p_star, membership_tol(s));
  const double quarter = 0.25 * pair.population_map.apply(s.u_alpha - theta_star).squaredNorm();
  const double g = generalization_error(pair, s.u_alpha);
  const double bias = alpha * alpha * z_star.squaredNorm();
  const double noise = (pair.empirical_map.apply(theta_star) - pair.v_emp).squaredNorm();
  const double lhs = quarter + alpha * dsym;
  const double rhs = 0.5 * g + bias + noise;
  const double unhalved_slack = (g + bias + noise) - lhs;
  return make_report(lhs, rhs, cfg.tol,
                     {{"quarter_output_error", quarter},
                      {"alpha_dsym", alpha * dsym},
                      {"symmetric_bregman", dsym},
                      {"half_G", 0.5 * g},
                      {"G", g},
                      {"alpha2_zstar2", bias},
                      {"empirical_noise_energy", noise},
                      {"unhalved_variant_slack", unhalved_slack},
                      {"optimality_defect", s.optimality_defect}});
}

}  // namespace varreg
