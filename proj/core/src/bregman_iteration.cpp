#include "varreg/bregman_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "detail/krylov.hpp"
#include "varreg/csv.hpp"
#include "varreg/rng.hpp"

namespace varreg {

void BregmanTrace::write_csv(std::ostream& out) const {
  csv::Table table({"k", "residual", "J_value", "bregman_to_ref"});
  for (const auto& s : steps) {
    csv::Cell ref = s.bregman_to_ref ? csv::Cell{*s.bregman_to_ref} : csv::Cell{std::string()};
    table.add_row({static_cast<long long>(s.k), s.residual, s.J_value, ref});
  }
  table.write(out);
}

BregmanTrace bregman_iterate(const LinearMap& map, const DataVector& data, double alpha,
                             const Regularizer& reg, const BregmanOptions& options,
                             const SolverConfig& cfg) {
  if (options.iterations < 1) throw std::invalid_argument("bregman_iterate: K must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("bregman_iterate: alpha must be positive");
  if (options.noise_level && !(*options.noise_level >= 0.0)) {
    throw std::invalid_argument("bregman_iterate: noise level must be >= 0");
  }
  if (options.reference && options.reference->size() != map.in_dim()) {
    throw DimensionError("bregman_iterate: reference has the wrong dimension");
  }
  SolverConfig inner = cfg;
  inner.tol = cfg.tol / 10.0;

  BregmanTrace trace;
  BregmanStep start;
  start.u = SolutionVector::Zero(map.in_dim());
  start.p = SolutionVector::Zero(map.in_dim());
  start.v_shifted = data;
  start.residual = data.norm();
  if (options.reference) start.bregman_to_ref = bregman_distance(reg, *options.reference, start.u, start.p);
  trace.steps.push_back(std::move(start));

  for (int k = 0; k < options.iterations; ++k) {
    const BregmanStep& prev = trace.steps.back();
    RegularizedSolution sol;
    try {
      sol = solve_variational(map, prev.v_shifted, alpha, reg, inner);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("bregman_iterate: inner solve failed at iteration " + std::to_string(k + 1) +
                                 ": " + e.what(),
                             e.last_residual(), e.iterations());
    }
    BregmanStep next;
    next.k = k + 1;
    const DataVector fu = map.apply(sol.u_alpha);
    next.p = prev.p + map.adjoint(data - fu) / alpha;
    next.recursion_defect = (next.p - sol.p_alpha).norm();
    const double allowed = 10.0 * cfg.tol * (1.0 + next.p.norm() + sol.p_alpha.norm());
    if (next.recursion_defect > allowed) {
      throw std::runtime_error("bregman_iterate: subgradient recursion disagrees with the data update at "
                               "iteration " + std::to_string(next.k) + " (defect " +
                               std::to_string(next.recursion_defect) + ")");
    }
    next.v_shifted = prev.v_shifted + data - fu;
    next.residual = (fu - data).norm();
    next.J_value = sol.J_value;
    next.u = std::move(sol.u_alpha);
    if (options.reference) {
      const double member_tol = std::max(kMembershipTol, 2.0 * (sol.optimality_defect / alpha + next.recursion_defect));
      next.bregman_to_ref = bregman_distance(reg, *options.reference, next.u, next.p, member_tol);
    }
    trace.steps.push_back(std::move(next));
    if (options.noise_level &&
        trace.steps.back().residual <= options.discrepancy_tau * *options.noise_level) {
      trace.stopped_by_discrepancy = true;
      break;
    }
  }
  return trace;
}

namespace {

// Projection onto {u : u_i = 0 off the support, u_i s_i >= 0 on it}.
void project_sign_cone(Vector& u, const Vector& signs) {
  for (Index i = 0; i < u.size(); ++i) {
    if (signs[i] == 0.0 || u[i] * signs[i] < 0.0) u[i] = 0.0;
  }
}

}  // namespace

DebiasResult debias_two_step(const LinearMap& map, const DataVector& data, double alpha,
                             const Regularizer& reg, const SolverConfig& cfg) {
  if (reg.kind() != RegularizerKind::l1) {
    throw UnsupportedOperation("debias_two_step: only implemented for l1");
  }
  DebiasResult out;
  out.first_step = solve_variational(map, data, alpha, reg, cfg);
  const Vector& ua = out.first_step.u_alpha;
  const Index n = ua.size();
  Vector signs = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (ua[i] != 0.0) {
      signs[i] = ua[i] > 0.0 ? 1.0 : -1.0;
      out.support.push_back(i);
    }
  }
  out.residual_first = (map.apply(ua) - data).norm();
  if (out.support.empty()) {
    out.empty_support = true;
    out.u_debiased = Vector::Zero(n);
    out.residual_debiased = data.norm();
    return out;
  }

  const Vector ftv = map.adjoint(data);
  const double target = cfg.tol * (1.0 + ftv.norm());
  const double norm = operator_norm_estimate(map, 100, substream_seed(cfg.seed, "power-iteration"));
  const double lipschitz = std::max(1.01 * norm * norm, 1e-300);
  const double step = cfg.step_safety / lipschitz;
  auto loss = [&](const Vector& u) { return 0.5 * (map.apply(u) - data).squaredNorm(); };
  auto gradient = [&](const Vector& u) -> Vector { return map.adjoint(map.apply(u) - data); };

  Vector x = ua;
  double fx = loss(x);
  Vector y = x;
  double t = 1.0;
  int k = 0;
  for (; k < cfg.max_iters; ++k) {
    const Vector gx = gradient(x);
    Vector probe = x - gx / lipschitz;
    project_sign_cone(probe, signs);
    if ((probe - x).norm() * lipschitz <= target) break;

    Vector xn = y - step * gradient(y);
    project_sign_cone(xn, signs);
    const double fn = loss(xn);
    if (fn > fx && t > 1.0) {
      t = 1.0;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / t_next) * (xn - x);
    x = std::move(xn);
    fx = fn;
    t = t_next;
  }
  out.iterations = k;

  // Exact least squares on the entries that remained free.
  std::vector<Index> free;
  for (Index i = 0; i < n; ++i) {
    if (x[i] != 0.0) free.push_back(i);
  }
  if (!free.empty()) {
    const auto f = static_cast<Index>(free.size());
    auto restricted = [&](const Vector& c) -> Vector {
      Vector full = Vector::Zero(n);
      for (Index j = 0; j < f; ++j) full[free[static_cast<std::size_t>(j)]] = c[j];
      const Vector back = map.adjoint(map.apply(full));
      Vector r(f);
      for (Index j = 0; j < f; ++j) r[j] = back[free[static_cast<std::size_t>(j)]];
      return r;
    };
    Vector rhs(f);
    Vector c0(f);
    for (Index j = 0; j < f; ++j) {
      rhs[j] = ftv[free[static_cast<std::size_t>(j)]];
      c0[j] = x[free[static_cast<std::size_t>(j)]];
    }
    const auto cg = detail::conjugate_gradient(restricted, rhs, c0, 1e-3 * target, 10 * static_cast<int>(f) + 100);
    Vector cand = Vector::Zero(n);
    bool feasible = true;
    for (Index j = 0; j < f; ++j) {
      const Index i = free[static_cast<std::size_t>(j)];
      if (cg.x[j] * signs[i] < 0.0) feasible = false;
      cand[i] = cg.x[j];
    }
    if (feasible && loss(cand) <= fx) {
      x = std::move(cand);
      fx = loss(x);
    }
  }
  if (loss(ua) < fx) x = ua;

  out.u_debiased = std::move(x);
  out.residual_debiased = (map.apply(out.u_debiased) - data).norm();
  const double member_tol = std::max(kMembershipTol, 2.0 * out.first_step.optimality_defect / alpha);
  out.bregman_to_first_step = bregman_distance(reg, out.u_debiased, ua, out.first_step.p_alpha, member_tol);
  return out;
}

}  // namespace varreg
