#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varreg/operators.hpp"
#include "varreg/rng.hpp"
#include "varreg/solvers.hpp"

using namespace varreg;

namespace {

DenseMatrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  return m;
}

void expect_certified(const RegularizedSolution& s, const Regularizer& reg) {
  EXPECT_LE(s.optimality_defect, s.defect_target);
  EXPECT_TRUE(is_subgradient(reg, s.u_alpha, s.p_alpha, kMembershipTol).member);
}

}  // namespace

TEST(Tikhonov, ScalarExamples) {
  EXPECT_NEAR(solve_tikhonov_exact(make_identity(1), Vector{{2.0}}, 1.0).u_alpha[0], 1.0, 1e-12);
  DenseMatrix two(1, 1);
  two << 2.0;
  EXPECT_NEAR(solve_tikhonov_exact(make_dense(two), Vector{{2.0}}, 2.0).u_alpha[0], 2.0 / 3.0, 1e-12);
}

TEST(Tikhonov, MatchesDenseSolve) {
  const DenseMatrix a = random_matrix(20, 20, 1) + 5.0 * DenseMatrix::Identity(20, 20);
  Rng rng(2);
  const Vector v = rng.gaussian_vector(20);
  const double alpha = 0.3;
  const auto s = solve_tikhonov_exact(make_dense(a), v, alpha);
  const Vector ref = oracle::dense_solve(a.transpose() * a + alpha * DenseMatrix::Identity(20, 20), a.transpose() * v);
  EXPECT_LE((s.u_alpha - ref).norm(), 1e-8 * (1.0 + ref.norm()));
  EXPECT_LE((s.p_alpha - s.u_alpha).norm(), 1e-6);
  expect_certified(s, Regularizer::quadratic());
}

TEST(Tikhonov, NonConvergenceCarriesResidual) {
  const DenseMatrix a = random_matrix(30, 30, 3);
  Rng rng(4);
  SolverConfig cfg;
  cfg.max_iters = 1;
  try {
    solve_tikhonov_exact(make_dense(a), rng.gaussian_vector(30), 1e-3, cfg);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 0.0);
    EXPECT_EQ(e.iterations(), 1);
  }
}

TEST(Config, Validation) {
  SolverConfig cfg;
  cfg.tol = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.step_safety = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_THROW(solve_tikhonov_exact(make_identity(1), Vector{{1.0}}, 0.0), std::invalid_argument);
}

TEST(Fista, L1IdentityIsSoftThreshold) {
  Rng rng(5);
  const Vector v = 2.0 * rng.gaussian_vector(12);
  const double alpha = 0.8;
  const auto s = solve_fista(make_identity(12), v, alpha, Regularizer::l1());
  EXPECT_LE((s.u_alpha - prox(Regularizer::l1(), alpha, v)).norm(), 1e-8);
  expect_certified(s, Regularizer::l1());
}

TEST(Fista, QuadraticMatchesExactSolver) {
  const DenseMatrix a = random_matrix(15, 10, 6);
  Rng rng(7);
  const Vector v = rng.gaussian_vector(15);
  const auto f = make_dense(a);
  const auto exact = solve_tikhonov_exact(f, v, 0.5);
  const auto fista = solve_fista(f, v, 0.5, Regularizer::quadratic());
  EXPECT_LE((exact.u_alpha - fista.u_alpha).norm(), 1e-7);
}

TEST(Fista, ZeroDataIsImmediate) {
  const auto s = solve_fista(make_dense(random_matrix(5, 5, 8)), Vector::Zero(5), 1.0, Regularizer::l1());
  EXPECT_EQ(s.u_alpha.norm(), 0.0);
  EXPECT_LE(s.iterations, 2);
}

TEST(Fista, RejectsTv) {
  EXPECT_THROW(solve_fista(make_identity(3), Vector::Zero(3), 1.0, Regularizer::tv_1d(3)), UnsupportedOperation);
}

TEST(Fista, L1RandomInstancesCertify) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DenseMatrix a = random_matrix(20, 30, 100 + seed);
    Rng rng(200 + seed);
    const Vector v = rng.gaussian_vector(20);
    const auto s = solve_fista(make_dense(a), v, 0.5, Regularizer::l1());
    expect_certified(s, Regularizer::l1());
  }
}

TEST(PrimalDual, ConstantDataIsFixedPoint) {
  const Vector v = Vector::Constant(6, 1.7);
  const auto s = solve_primal_dual(make_identity(6), v, 0.4, Regularizer::tv_1d(6));
  EXPECT_LE((s.u_alpha - v).norm(), 1e-12);
}

TEST(PrimalDual, StepMatchesBruteForce) {
  const Vector v{{0.0, 0.0, 1.0, 1.0}};
  for (double alpha : {0.05, 0.2, 0.6}) {
    const auto s = solve_primal_dual(make_identity(4), v, alpha, Regularizer::tv_1d(4));
    const Vector ref = oracle::brute_force_tv4(v, alpha);
    EXPECT_LE((s.u_alpha - ref).norm(), 1e-6) << alpha;
    expect_certified(s, Regularizer::tv_1d(4));
  }
  const auto small = solve_primal_dual(make_identity(4), v, 1e-3, Regularizer::tv_1d(4));
  EXPECT_NEAR(value(Regularizer::tv_1d(4), small.u_alpha), 1.0 - 1e-3, 1e-9);
}

TEST(PrimalDual, LargeAlphaGivesMean) {
  const Vector v{{0.3, -1.0, 2.0, 0.5}};
  // For F = I the solution is constant once alpha exceeds max |cumsum(v - mean)|.
  double acc = 0.0;
  double alpha_max = 0.0;
  for (Index i = 0; i < 3; ++i) {
    acc += v[i] - v.mean();
    alpha_max = std::max(alpha_max, std::abs(acc));
  }
  const auto s = solve_primal_dual(make_identity(4), v, 1.1 * alpha_max, Regularizer::tv_1d(4));
  EXPECT_LE((s.u_alpha - Vector::Constant(4, v.mean())).norm(), 1e-10);
  EXPECT_LE((oracle::brute_force_tv4(v, 1.1 * alpha_max) - s.u_alpha).norm(), 1e-6);
  const auto below = solve_primal_dual(make_identity(4), v, 0.9 * alpha_max, Regularizer::tv_1d(4));
  EXPECT_GT(value(Regularizer::tv_1d(4), below.u_alpha), 1e-6);
}

TEST(PrimalDual, DenseOperator1d) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DenseMatrix a = random_matrix(16, 12, 300 + seed);
    Rng rng(400 + seed);
    const Vector v = rng.gaussian_vector(16);
    const auto reg = Regularizer::tv_1d(12);
    const auto s = solve_primal_dual(make_dense(a), v, 0.7, reg);
    expect_certified(s, reg);
  }
}

TEST(PrimalDual, Denoising2d) {
  const auto reg = Regularizer::tv_2d(8, 8);
  Vector v = disk_phantom(8, 0.5);
  Rng rng(9);
  v += 0.1 * rng.gaussian_vector(64);
  const auto s = solve_primal_dual(make_identity(64), v, 0.2, reg);
  expect_certified(s, reg);
  EXPECT_LT(objective(make_identity(64), v, reg, s.u_alpha, 0.2), objective(make_identity(64), v, reg, v, 0.2));
}

TEST(Dispatch, RoutesByKind) {
  const auto f = make_identity(4);
  const Vector v{{1.0, 2.0, 3.0, 4.0}};
  EXPECT_EQ(solve_variational(f, v, 1.0, Regularizer::quadratic()).method, "tikhonov_cg");
  EXPECT_EQ(solve_variational(f, v, 1.0, Regularizer::l1()).method, "fista");
  EXPECT_EQ(solve_variational(f, v, 1.0, Regularizer::tv_1d(4)).method, "primal_dual");
}

TEST(Uniqueness, OutputAgreesAcrossInitialisations) {
  // Duplicate columns make the l1 minimiser non-unique; F u is unique.
  DenseMatrix a = random_matrix(6, 4, 10);
  DenseMatrix dup(6, 8);
  dup << a, a;
  const auto f = make_dense(dup);
  Rng rng(11);
  const Vector v = rng.gaussian_vector(6);
  const auto reg = Regularizer::l1();
  SolverConfig c1;
  SolverConfig c2;
  c2.random_init = true;
  c2.seed = 5;
  const auto s1 = solve_fista(f, v, 0.3, reg, c1);
  const auto s2 = solve_fista(f, v, 0.3, reg, c2);
  EXPECT_LE((f.apply(s1.u_alpha) - f.apply(s2.u_alpha)).norm(), 10 * c1.tol * (1 + f.adjoint(v).norm()));
  EXPECT_LE(symmetric_bregman(reg, s1.u_alpha, s2.u_alpha, s1.p_alpha, s2.p_alpha), 10 * c1.tol);
}

TEST(Stability, RandomInstancesPerRegularizer) {
  const Index m = 10;
  const Index n = 8;
  const std::vector<Regularizer> regs{Regularizer::quadratic(), Regularizer::l1(), Regularizer::tv_1d(n)};
  for (const auto& reg : regs) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto f = make_dense(random_matrix(m, n, 500 + seed));
      Rng rng(600 + seed);
      const Vector v = rng.gaussian_vector(m);
      const Vector vt = v + 0.3 * rng.gaussian_vector(m);
      const double alpha = rng.uniform(0.1, 2.0);
      SolverConfig cfg;
      const auto s = solve_variational(f, v, alpha, reg, cfg);
      const auto st = solve_variational(f, vt, alpha, reg, cfg);
      const double lhs = 0.5 * (f.apply(s.u_alpha) - f.apply(st.u_alpha)).squaredNorm() +
                         alpha * symmetric_bregman(reg, s.u_alpha, st.u_alpha, s.p_alpha, st.p_alpha);
      EXPECT_LE(lhs, 0.5 * (v - vt).squaredNorm() + 10 * cfg.tol) << reg.name() << " seed " << seed;
    }
  }
}
