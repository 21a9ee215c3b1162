#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varreg/estimates.hpp"
#include "varreg/operators.hpp"
#include "varreg/rng.hpp"

using namespace varreg;

namespace {

DenseMatrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  return m;
}

std::vector<Regularizer> all_regularizers(Index n) {
  return {Regularizer::quadratic(), Regularizer::l1(), Regularizer::tv_1d(n)};
}

// Geometric spectrum whose squares span [lo, hi].
LinearMap geometric_spectral(Index m, double lo, double hi, std::uint64_t seed) {
  std::vector<double> s(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const double t = m > 1 ? static_cast<double>(i) / static_cast<double>(m - 1) : 0.0;
    s[static_cast<std::size_t>(i)] = std::sqrt(hi * std::pow(lo / hi, t));
  }
  return make_spectral(s, seed);
}

}  // namespace

TEST(SourceInstance, QuadraticIdentityEqualsZ) {
  const Vector z{{0.3, -1.0, 2.0}};
  const auto inst = source_instance_from(make_identity(3), Regularizer::quadratic(), z);
  EXPECT_EQ(inst.u_star, z);
  EXPECT_EQ(inst.p_star, z);
  EXPECT_EQ(inst.z_star, z);
  EXPECT_EQ(inst.defect, 0.0);
}

TEST(SourceInstance, L1IdentityRescales) {
  const auto inst = source_instance_from(make_identity(2), Regularizer::l1(), Vector{{2.0, 0.5}}, 3);
  EXPECT_NEAR(inst.p_star[0], 1.0, 1e-15);
  EXPECT_NEAR(inst.p_star[1], 0.25, 1e-15);
  EXPECT_GE(inst.u_star[0], 0.5);
  EXPECT_LE(inst.u_star[0], 1.5);
  EXPECT_EQ(inst.u_star[1], 0.0);
}

TEST(SourceInstance, DenseCertificatesForEveryRegularizer) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearMap f = make_dense(random_matrix(20, 10, 700 + seed));
    for (const auto& reg : all_regularizers(10)) {
      const auto inst = construct_source_instance(f, reg, seed);
      EXPECT_LE(inst.defect, 1e-12) << reg.name() << " seed " << seed;
      EXPECT_LE((f.adjoint(inst.z_star) - inst.p_star).norm(), 1e-12);
      EXPECT_TRUE(is_subgradient(reg, inst.u_star, inst.p_star, 1e-9).member) << reg.name() << " seed " << seed;
      EXPECT_LE((inst.v_star - f.apply(inst.u_star)).norm(), 0.0);
    }
  }
}

TEST(SourceInstance, TvPathHasJumps) {
  int with_jumps = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto reg = Regularizer::tv_1d(16);
    const auto inst = construct_source_instance(make_dense(random_matrix(24, 16, seed)), reg, seed);
    if (reg.difference(inst.u_star).cwiseAbs().maxCoeff() > 0.0) ++with_jumps;
  }
  EXPECT_EQ(with_jumps, 10);
}

TEST(SourceInstance, TvImageOnRadon) {
  const auto geom = RadonGeometry::uniform(8, 12, 12);
  const LinearMap f = make_radon(geom);
  const auto reg = Regularizer::tv_2d(8, 8);
  const auto inst = construct_source_instance(f, reg, 5);
  EXPECT_LE(inst.defect, 1e-10);
  EXPECT_TRUE(is_subgradient(reg, inst.u_star, inst.p_star, 1e-9).member);
}

TEST(SourceInstance, Deterministic) {
  const LinearMap f = make_dense(random_matrix(12, 9, 1));
  const auto a = construct_source_instance(f, Regularizer::l1(), 42);
  const auto b = construct_source_instance(f, Regularizer::l1(), 42);
  EXPECT_EQ(a.u_star, b.u_star);
  EXPECT_EQ(a.z_star, b.z_star);
  EXPECT_EQ(a.redraws, b.redraws);
}

TEST(SourceInstance, DegenerateGivenZThrows) {
  EXPECT_THROW(source_instance_from(make_identity(2), Regularizer::l1(), Vector::Zero(2)), std::invalid_argument);
  EXPECT_THROW(construct_source_instance(make_dense(DenseMatrix::Zero(3, 3)), Regularizer::quadratic(), 0),
               std::runtime_error);
}

TEST(SourceElement, ConsistentSystemGivesMinimumNorm) {
  const DenseMatrix a = random_matrix(15, 10, 11);
  const LinearMap f = make_dense(a);
  const Vector zbar = a * Rng(12).gaussian_vector(10);
  const auto s = solve_source_element(f, f.adjoint(zbar));
  EXPECT_LE(s.defect, 1e-8);
  EXPECT_LE(s.z.norm(), zbar.norm() + 1e-8);
}

TEST(SourceElement, ZeroOperator) {
  const Vector p = Rng(13).gaussian_vector(4);
  const auto s = solve_source_element(make_dense(DenseMatrix::Zero(3, 4)), p);
  EXPECT_EQ(s.z.norm(), 0.0);
  EXPECT_DOUBLE_EQ(s.defect, p.norm());
}

TEST(SourceElement, InconsistentRankDeficientMatchesPseudoinverse) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DenseMatrix a = random_matrix(10, 4, 20 + seed) * random_matrix(4, 8, 30 + seed);
    const Vector p = Rng(seed, "p").gaussian_vector(8);
    const auto s = solve_source_element(make_dense(a), p);
    const DenseMatrix at = a.transpose();
    const Vector z_ref = oracle::pseudoinverse(at) * p;
    EXPECT_NEAR(s.defect, (at * z_ref - p).norm(), 1e-8) << "seed " << seed;
    EXPECT_LE(s.z.norm(), z_ref.norm() + 1e-6);
  }
}

TEST(DistanceFunction, ZeroRadius) {
  const Vector p = Rng(1).gaussian_vector(5);
  EXPECT_DOUBLE_EQ(distance_function(make_identity(5), p, 0.0), p.norm());
  EXPECT_THROW(distance_function(make_identity(5), p, -1.0), std::invalid_argument);
}

TEST(DistanceFunction, FeasibleExactMatch) {
  const DenseMatrix a = random_matrix(8, 6, 2);
  const LinearMap f = make_dense(a);
  const Vector zbar = a * Rng(3).gaussian_vector(6);
  EXPECT_LE(distance_function(f, f.adjoint(zbar), zbar.norm()), 1e-8);
}

TEST(DistanceFunction, MatchesRidgeOracleAndIsMonotone) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DenseMatrix a = random_matrix(6, 9, 40 + seed);
    const LinearMap f = make_dense(a);
    const Vector p = Rng(seed, "p").gaussian_vector(9);
    double prev = std::numeric_limits<double>::infinity();
    for (double rho : {0.01, 0.05, 0.1, 0.3, 1.0, 3.0}) {
      const double d = distance_function(f, p, rho);
      EXPECT_NEAR(d, oracle::ball_constrained_residual(a.transpose(), p, rho), 1e-6) << "rho " << rho;
      EXPECT_LE(d, prev + 1e-12);
      prev = d;
    }
  }
}

TEST(ErrorEstimate, NoiselessBound) {
  for (const auto& reg : all_regularizers(10)) {
    const LinearMap f = make_dense(random_matrix(14, 10, 50));
    const auto inst = construct_source_instance(f, reg, 1);
    for (double alpha : {1.0, 0.1, 0.01}) {
      const auto r = check_error_estimate(f, reg, inst, inst.v_star, alpha);
      EXPECT_TRUE(r.holds) << reg.name() << " alpha " << alpha;
      EXPECT_LE(r.lhs, alpha * alpha * inst.z_star.squaredNorm() + r.headroom);
      EXPECT_EQ(r.component("noise_energy"), 0.0);
    }
  }
}

TEST(ErrorEstimate, RightHandSideArithmetic) {
  const LinearMap f = make_dense(random_matrix(14, 10, 51));
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_source_instance(f, reg, 2);
  const Vector noise = 0.1 * Rng(3).gaussian_vector(14);
  const Vector v = inst.v_star + noise;
  const double z2 = inst.z_star.squaredNorm();
  for (double alpha : {0.4, 0.2}) {
    const auto r = check_error_estimate(f, reg, inst, v, alpha);
    EXPECT_NEAR(r.rhs, noise.squaredNorm() + alpha * alpha * z2, 1e-14 * (1.0 + r.rhs));
    EXPECT_NEAR(r.slack, r.rhs - r.lhs, 1e-15);
    EXPECT_THROW(r.component("missing"), std::out_of_range);
  }
}

TEST(ErrorEstimate, SeededCertification) {
  for (const auto& reg : all_regularizers(12)) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const LinearMap f = make_dense(random_matrix(16, 12, 900 + seed));
      const auto inst = construct_source_instance(f, reg, seed);
      for (double sigma : {0.0, 0.01, 0.1}) {
        const Vector v = inst.v_star + sigma * Rng(seed, "noise").gaussian_vector(16);
        const double alpha = 0.05 + 0.1 * static_cast<double>(seed % 5);
        const auto s = solve_variational(f, v, alpha, reg);
        const auto err = check_error_estimate(f, reg, inst, v, alpha, {}, &s);
        const auto eff = check_effective_estimate(f, reg, inst, v, alpha, {}, &s);
        EXPECT_TRUE(err.holds) << reg.name() << " seed " << seed << " sigma " << sigma;
        EXPECT_TRUE(eff.holds) << reg.name() << " seed " << seed << " sigma " << sigma;
      }
    }
  }
}

TEST(EffectiveEstimate, BoundArithmetic) {
  const LinearMap f = make_dense(random_matrix(10, 10, 52));
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_source_instance(f, reg, 4);
  const double z = inst.z_star.norm();
  for (int n = 0; n < 6; ++n) {
    const double alpha = std::ldexp(1.0, -n);
    const auto r = check_effective_estimate(f, reg, inst, inst.v_star, alpha);
    EXPECT_NEAR(r.rhs, alpha * z * z, 1e-14 * (1.0 + r.rhs));
    EXPECT_TRUE(r.holds);
  }
  const Vector dir = Rng(5).gaussian_vector(10).normalized();
  const double delta = 0.05;
  const double best = delta / z;
  const auto at_best = check_effective_estimate(f, reg, inst, inst.v_star + delta * dir, best);
  EXPECT_NEAR(at_best.rhs, 2.0 * delta * z, 1e-12);
  for (double factor : {0.5, 2.0}) {
    EXPECT_GT(check_effective_estimate(f, reg, inst, inst.v_star + delta * dir, factor * best).rhs, at_best.rhs);
  }
}

TEST(HigherOrder, QuadraticFirstTermIdentity) {
  const LinearMap f = make_dense(random_matrix(12, 8, 60));
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_higher_order_instance(f, reg, 1);
  for (double alpha : {0.5, 0.05}) {
    const Vector v = inst.v_star + 0.01 * Rng(2).gaussian_vector(12);
    const auto r = check_higher_order_estimate(f, reg, inst.u_star, inst.eta_star, v, alpha);
    const double reference = 0.5 * alpha * alpha * inst.eta_star.squaredNorm();
    EXPECT_NEAR(r.component("first_term"), reference, 1e-12 * (1.0 + reference));
    EXPECT_EQ(r.component("quadratic_reference"), reference);
    EXPECT_TRUE(r.holds);
  }
}

TEST(HigherOrder, L1FirstTermVanishesBelowThreshold) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearMap f = make_dense(random_matrix(20, 16, 70 + seed));
    const auto reg = Regularizer::l1();
    const auto inst = construct_higher_order_instance(f, reg, seed);
    ASSERT_GT(inst.sign_threshold, 0.0);
    for (Index i = 0; i < 16; ++i) {
      if (inst.eta_star[i] != 0.0) EXPECT_NE(inst.u_star[i], 0.0);
    }
    const double alpha = 0.5 * inst.sign_threshold;
    const auto r = check_higher_order_estimate(f, reg, inst.u_star, inst.eta_star, inst.v_star, alpha);
    EXPECT_EQ(r.component("first_term_zero"), 1.0) << "seed " << seed;
    EXPECT_TRUE(r.holds) << "seed " << seed;
  }
}

TEST(HigherOrder, MembershipFailureAndUnsupported) {
  const LinearMap f = make_identity(3);
  const Vector eta{{5.0, 0.0, 0.0}};
  EXPECT_THROW(check_higher_order_estimate(f, Regularizer::l1(), Vector::Zero(3), eta, Vector::Zero(3), 0.1),
               MembershipError);
  EXPECT_THROW(construct_higher_order_instance(f, Regularizer::tv_1d(3), 0), UnsupportedOperation);
}

TEST(RangeCondition, SourceDataReproducesTruth) {
  SolverConfig cfg;
  for (const auto& reg : all_regularizers(10)) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const LinearMap f = make_dense(random_matrix(14, 10, 80 + seed));
      const auto inst = construct_source_instance(f, reg, seed);
      for (double alpha : {1.0, 0.1}) {
        EXPECT_LE(range_condition_defect(f, reg, inst, alpha), 10.0 * cfg.tol) << reg.name() << " seed " << seed;
      }
    }
  }
}

TEST(Convergence, QuadraticRateAndBounds) {
  // c = 1/|z*| balances the two terms of the bound. |z*| is close to
  // sqrt(m), so a spectrum spanning the expected alpha range with six octaves
  // to spare on either side covers the actual one.
  const Index m = 48;
  ConvergenceOptions opts;
  opts.seed = 7;
  const double c0 = 1.0 / std::sqrt(static_cast<double>(m));
  const double alpha_min = c0 * opts.delta0 * std::ldexp(1.0, -opts.n_max);
  const LinearMap f = geometric_spectral(m, alpha_min / 64.0, c0 * opts.delta0 * 64.0, 3);
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_source_instance(f, reg, 7);
  opts.c = 1.0 / inst.z_star.norm();
  SolverConfig cfg;
  cfg.tol = 1e-12;
  const auto res = convergence_study(f, reg, inst, opts, cfg);
  ASSERT_EQ(res.rows.size(), 9u);
  EXPECT_TRUE(res.bounds_hold);
  EXPECT_GE(res.fitted_ratio, 0.4);
  EXPECT_LE(res.fitted_ratio, 0.6);
  EXPECT_TRUE(res.J_converged) << res.J_gap_final;
  EXPECT_TRUE(res.passed);
  std::ostringstream out;
  res.write_csv(out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "n,delta,alpha,bregman,bound,output_err,J_value");
}

TEST(Convergence, QuadraticRuleAssertsNoConvergence) {
  const LinearMap f = geometric_spectral(16, 1e-4, 1.0, 4);
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_source_instance(f, reg, 1);
  ConvergenceOptions opts;
  opts.rule = AlphaRule::quadratic;
  opts.n_max = 4;
  const auto res = convergence_study(f, reg, inst, opts);
  EXPECT_FALSE(res.convergence_asserted);
  EXPECT_EQ(res.passed, res.bounds_hold);
  for (const auto& row : res.rows) EXPECT_DOUBLE_EQ(row.alpha, row.delta * row.delta);
}

TEST(Convergence, RejectsBadOptions) {
  const auto inst = construct_source_instance(make_identity(3), Regularizer::quadratic(), 0);
  ConvergenceOptions opts;
  opts.c = 0.0;
  EXPECT_THROW(convergence_study(make_identity(3), Regularizer::quadratic(), inst, opts), std::invalid_argument);
}

TEST(BiasVariance, NoiselessMeanBelowBias) {
  const LinearMap f = make_dense(random_matrix(12, 12, 90));
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_source_instance(f, reg, 1);
  BiasVarianceOptions opts;
  opts.noise_sigma = 0.0;
  opts.alpha_grid = {0.01, 0.1, 1.0};
  opts.replicates = 3;
  const auto res = bias_variance_study(f, reg, inst, opts);
  for (const auto& row : res.rows) {
    EXPECT_LE(row.stderr_bregman, 1e-12 * row.mean_bregman);
    EXPECT_LE(row.mean_bregman, row.alpha * inst.z_star.squaredNorm() * (1.0 + 1e-12));
  }
  EXPECT_TRUE(res.noise_moment_ok);
}

TEST(BiasVariance, UShapeAndNoiseMoment) {
  const LinearMap f = geometric_spectral(32, 1e-4, 1.0, 5);
  const auto reg = Regularizer::quadratic();
  const auto inst = construct_source_instance(f, reg, 2);
  BiasVarianceOptions opts;
  opts.noise_sigma = 0.01;
  for (int i = 0; i < 8; ++i) opts.alpha_grid.push_back(1e-4 * std::pow(10.0, 4.0 * i / 7.0));
  opts.replicates = 50;
  opts.seed = 3;
  const auto res = bias_variance_study(f, reg, inst, opts);
  EXPECT_TRUE(res.all_hold);
  EXPECT_TRUE(res.interior_minimum) << "argmin " << res.argmin;
  EXPECT_GT(res.rows.front().mean_bregman, res.rows[res.argmin].mean_bregman);
  EXPECT_GT(res.rows.back().mean_bregman, res.rows[res.argmin].mean_bregman);
  EXPECT_TRUE(res.noise_moment_ok);
  std::ostringstream out;
  res.write_csv(out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "alpha,mean_bregman,stderr,bound");
}

TEST(BiasVariance, RejectsBadOptions) {
  const auto inst = construct_source_instance(make_identity(3), Regularizer::quadratic(), 0);
  BiasVarianceOptions opts;
  opts.alpha_grid = {0.1};
  opts.replicates = 1;
  EXPECT_THROW(bias_variance_study(make_identity(3), Regularizer::quadratic(), inst, opts), std::invalid_argument);
  opts.replicates = 2;
  opts.alpha_grid = {0.1, 0.1};
  EXPECT_THROW(bias_variance_study(make_identity(3), Regularizer::quadratic(), inst, opts), std::invalid_argument);
}
