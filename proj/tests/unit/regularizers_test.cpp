#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "varreg/operators.hpp"
#include "varreg/regularizers.hpp"
#include "varreg/rng.hpp"

using namespace varreg;

namespace {

// A point together with a subgradient drawn from the full subdifferential.
struct Pair {
  Vector u;
  Vector p;
};

Pair random_pair(const Regularizer& reg, Index n, Rng& rng) {
  Pair out;
  switch (reg.kind()) {
    case RegularizerKind::quadratic:
      out.u = rng.gaussian_vector(n);
      out.p = out.u;
      break;
    case RegularizerKind::l1:
      out.u = rng.gaussian_vector(n);
      out.p.resize(n);
      for (Index i = 0; i < n; ++i) {
        if (rng.uniform() < 0.4) out.u[i] = 0.0;
        out.p[i] = out.u[i] > 0 ? 1.0 : (out.u[i] < 0 ? -1.0 : rng.uniform(-1.0, 1.0));
      }
      break;
    case RegularizerKind::tv_aniso: {
      // Piecewise constant signal with a few jumps; q = sign on jumps.
      out.u.resize(n);
      double level = rng.gaussian();
      for (Index i = 0; i < n; ++i) {
        if (i > 0 && rng.uniform() < 0.3) level += rng.gaussian();
        out.u[i] = level;
      }
      const Vector du = reg.difference(out.u);
      Vector q(du.size());
      for (Index e = 0; e < du.size(); ++e) {
        q[e] = du[e] > 0 ? 1.0 : (du[e] < 0 ? -1.0 : rng.uniform(-1.0, 1.0));
      }
      out.p = reg.difference_adjoint(q);
      break;
    }
  }
  return out;
}

}  // namespace

TEST(Value, Examples) {
  EXPECT_DOUBLE_EQ(value(Regularizer::quadratic(), Vector{{3.0, 4.0}}), 12.5);
  EXPECT_DOUBLE_EQ(value(Regularizer::l1(), Vector{{1.0, -2.0}}), 3.0);
  EXPECT_DOUBLE_EQ(value(Regularizer::tv_1d(4), Vector{{0.0, 0.0, 1.0, 1.0}}), 1.0);
}

TEST(Value, TvDimensionChecked) {
  EXPECT_THROW(value(Regularizer::tv_1d(4), Vector::Zero(3)), DimensionError);
}

TEST(Value, Tv2dCountsHorizontalAndVerticalJumps) {
  const auto reg = Regularizer::tv_2d(2, 3);
  // 2 x 3 image with the right column raised by 2.
  Vector u{{0.0, 0.0, 2.0, 0.0, 0.0, 2.0}};
  EXPECT_DOUBLE_EQ(value(reg, u), 4.0);
  EXPECT_EQ(reg.edge_count(), 2 * 2 + 3);
  EXPECT_DOUBLE_EQ(reg.difference_norm_sq_bound(), 6.0);
}

TEST(Value, ParseKinds) {
  EXPECT_EQ(parse_regularizer_kind("tv"), RegularizerKind::tv_aniso);
  EXPECT_EQ(parse_regularizer_kind("l1"), RegularizerKind::l1);
  EXPECT_THROW(parse_regularizer_kind("huber"), std::invalid_argument);
}

TEST(Difference, AdjointConsistency) {
  const auto reg = Regularizer::tv_2d(5, 7);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vector u = rng.gaussian_vector(35);
    const Vector q = rng.gaussian_vector(reg.edge_count());
    EXPECT_NEAR(inner(reg.difference(u), q), inner(u, reg.difference_adjoint(q)), 1e-12);
  }
}

TEST(Prox, Examples) {
  EXPECT_DOUBLE_EQ(prox(Regularizer::l1(), 1.0, Vector{{2.5}})[0], 1.5);
  EXPECT_DOUBLE_EQ(prox(Regularizer::l1(), 1.0, Vector{{-0.5}})[0], 0.0);
  EXPECT_DOUBLE_EQ(prox(Regularizer::quadratic(), 1.0, Vector{{2.0}})[0], 1.0);
  EXPECT_THROW(prox(Regularizer::tv_1d(3), 1.0, Vector::Zero(3)), UnsupportedOperation);
  EXPECT_THROW(prox(Regularizer::l1(), 0.0, Vector::Zero(3)), std::invalid_argument);
}

TEST(Prox, OptimalityResidualIsSubgradient) {
  Rng rng(2);
  for (const auto& reg : {Regularizer::quadratic(), Regularizer::l1()}) {
    for (int t = 0; t < 200; ++t) {
      const double tau = rng.uniform(0.05, 3.0);
      const Vector x = 2.0 * rng.gaussian_vector(6);
      const Vector y = prox(reg, tau, x);
      const auto check = is_subgradient(reg, y, (x - y) / tau, 1e-8);
      EXPECT_TRUE(check.member) << reg.name() << " violation " << check.violation;
    }
  }
}

TEST(SubgradientFromOptimality, Examples) {
  const auto id = make_identity(1);
  EXPECT_DOUBLE_EQ(subgradient_from_optimality(id, Vector{{2.0}}, Vector{{1.0}}, 1.0)[0], 1.0);
  EXPECT_DOUBLE_EQ(subgradient_from_optimality(id, Vector{{0.5}}, Vector{{0.0}}, 1.0)[0], 0.5);
  EXPECT_TRUE(is_subgradient(Regularizer::l1(), Vector{{0.0}}, Vector{{0.5}}, 1e-12).member);
  EXPECT_THROW(subgradient_from_optimality(id, Vector{{2.0}}, Vector{{1.0}}, 0.0), std::invalid_argument);
}

TEST(IsSubgradient, Examples) {
  const auto q = is_subgradient(Regularizer::quadratic(), Vector{{1.0, 2.0}}, Vector{{1.0, 2.0}}, 1e-12);
  EXPECT_TRUE(q.member);
  EXPECT_EQ(q.violation, 0.0);
  EXPECT_TRUE(is_subgradient(Regularizer::l1(), Vector{{1.0, 0.0}}, Vector{{1.0, 0.5}}, 1e-12).member);
  EXPECT_FALSE(is_subgradient(Regularizer::l1(), Vector{{1.0, 0.0}}, Vector{{0.5, 0.0}}, 1e-6).member);
  EXPECT_FALSE(is_subgradient(Regularizer::l1(), Vector{{0.0}}, Vector{{1.5}}, 1e-6).member);
}

TEST(IsSubgradient, TvCertificates) {
  const auto reg = Regularizer::tv_1d(4);
  const Vector u{{0.0, 0.0, 1.0, 1.0}};
  // q = (0.5, 1, -0.2) gives D^T q = (-0.5, -0.5, 1.2, -0.2).
  EXPECT_TRUE(is_subgradient(reg, u, Vector{{-0.5, -0.5, 1.2, -0.2}}, 1e-10).member);
  // Sum of a TV subgradient must vanish.
  EXPECT_FALSE(is_subgradient(reg, u, Vector{{0.0, 0.0, 0.0, 0.1}}, 1e-6).member);
  // Jump edge needs q = +1; q = 0.5 everywhere is infeasible.
  EXPECT_FALSE(is_subgradient(reg, u, Vector{{-0.5, 0.0, 0.0, 0.5}}, 1e-6).member);
}

TEST(IsSubgradient, Tv2dRandomPairs) {
  const auto reg = Regularizer::tv_2d(6, 5);
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    Vector u(30);
    for (Index i = 0; i < 30; ++i) u[i] = std::floor(2.0 * rng.uniform());
    const Vector du = reg.difference(u);
    Vector q(du.size());
    for (Index e = 0; e < du.size(); ++e) q[e] = du[e] != 0 ? (du[e] > 0 ? 1.0 : -1.0) : rng.uniform(-1, 1);
    const Vector p = reg.difference_adjoint(q);
    EXPECT_TRUE(is_subgradient(reg, u, p, 1e-8).member);
    EXPECT_FALSE(is_subgradient(reg, u, p + 0.05 * Vector::Ones(30), 1e-6).member);
  }
}

TEST(Bregman, Examples) {
  EXPECT_DOUBLE_EQ(bregman_distance(Regularizer::quadratic(), Vector{{1.0, 0.0}}, Vector::Zero(2), Vector::Zero(2)),
                   0.5);
  EXPECT_DOUBLE_EQ(bregman_distance(Regularizer::l1(), Vector{{2.0}}, Vector{{1.0}}, Vector{{1.0}}), 0.0);
  EXPECT_DOUBLE_EQ(bregman_distance(Regularizer::l1(), Vector{{-1.0}}, Vector{{1.0}}, Vector{{1.0}}), 2.0);
  EXPECT_DOUBLE_EQ(
      symmetric_bregman(Regularizer::quadratic(), Vector{{1.0}}, Vector{{0.0}}, Vector{{1.0}}, Vector{{0.0}}), 1.0);
  EXPECT_DOUBLE_EQ(
      symmetric_bregman(Regularizer::l1(), Vector{{2.0}}, Vector{{1.0}}, Vector{{1.0}}, Vector{{1.0}}), 0.0);
  const Vector u{{0.3, -1.0}};
  EXPECT_DOUBLE_EQ(symmetric_bregman(Regularizer::l1(), u, u, Vector{{1.0, -1.0}}, Vector{{1.0, -1.0}}), 0.0);
}

TEST(Bregman, MembershipFailureThrows) {
  EXPECT_THROW(bregman_distance(Regularizer::l1(), Vector{{2.0}}, Vector{{1.0}}, Vector{{0.5}}), MembershipError);
  EXPECT_THROW(symmetric_bregman(Regularizer::quadratic(), Vector{{1.0}}, Vector{{0.0}}, Vector{{2.0}}, Vector{{0.0}}),
               MembershipError);
}

TEST(Bregman, NonnegativityAndDecomposition) {
  const Index n = 8;
  const std::vector<Regularizer> regs{Regularizer::quadratic(), Regularizer::l1(), Regularizer::tv_1d(n)};
  for (const auto& reg : regs) {
    Rng rng(substream_seed(3, reg.name()));
    for (int t = 0; t < 200; ++t) {
      const Pair a = random_pair(reg, n, rng);
      const Pair b = random_pair(reg, n, rng);
      const double d_ab = bregman_distance(reg, a.u, b.u, b.p);
      const double d_ba = bregman_distance(reg, b.u, a.u, a.p);
      const double sym = symmetric_bregman(reg, a.u, b.u, a.p, b.p);
      EXPECT_GE(d_ab, 0.0);
      EXPECT_GE(sym, 0.0);
      EXPECT_NEAR(sym, d_ab + d_ba, 1e-10 * (1.0 + sym)) << reg.name();
    }
  }
}

TEST(Bregman, QuadraticIsHalfSquaredDistance) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const Vector w = rng.gaussian_vector(5);
    const Vector u = rng.gaussian_vector(5);
    EXPECT_NEAR(bregman_distance(Regularizer::quadratic(), w, u, u), 0.5 * (w - u).squaredNorm(), 1e-12);
  }
}

TEST(Convexity, MidpointInequality) {
  const Index n = 9;
  Rng rng(6);
  for (const auto& reg : {Regularizer::quadratic(), Regularizer::l1(), Regularizer::tv_1d(n)}) {
    for (int t = 0; t < 200; ++t) {
      const Vector a = rng.gaussian_vector(n);
      const Vector b = rng.gaussian_vector(n);
      EXPECT_LE(value(reg, 0.5 * a + 0.5 * b), 0.5 * value(reg, a) + 0.5 * value(reg, b) + 1e-12);
      EXPECT_GE(value(reg, a), 0.0);
    }
    EXPECT_EQ(value(reg, Vector::Zero(n)), 0.0);
  }
}
