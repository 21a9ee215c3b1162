#include "varreg/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

#include "detail/krylov.hpp"
#include "varreg/csv.hpp"
#include "varreg/rng.hpp"

namespace varreg {

namespace {

constexpr int kMaxDraws = 200;
constexpr double kInstanceDefect = 1e-10;
constexpr double kSaturation = 0.99;
// Off-support dual entries must stay this far inside the unit interval.
constexpr double kInteriorMargin = 1e-3;

// Neumaier compensated summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Columns F e_j of the operator, i.e. the rows of F* as a dense matrix.
DenseMatrix columns(const LinearMap& map) { return map.to_dense(); }

// Minimum-norm z correction with A dz = r.
Vector min_norm_correction(const DenseMatrix& a, const Vector& r) {
  return Eigen::CompleteOrthogonalDecomposition<DenseMatrix>(a).solve(r);
}

bool build_l1(const LinearMap& map, Vector z, Rng& rng, SourceInstance& inst) {
  Vector p = map.adjoint(z);
  const double peak = p.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return false;
  z /= peak;
  p = map.adjoint(z);
  std::vector<Index> support;
  for (Index i = 0; i < p.size(); ++i) {
    if (std::abs(p[i]) >= kSaturation) support.push_back(i);
  }
  const DenseMatrix fd = columns(map);
  const auto k = static_cast<Index>(support.size());
  DenseMatrix a(k, map.out_dim());
  Vector r(k);
  Vector s(k);
  for (Index j = 0; j < k; ++j) {
    const Index i = support[static_cast<std::size_t>(j)];
    a.row(j) = fd.col(i).transpose();
    s[j] = sign_of(p[i]);
    r[j] = s[j] - p[i];
  }
  z += min_norm_correction(a, r);
  p = map.adjoint(z);
  Vector snapped = p;
  for (Index j = 0; j < k; ++j) {
    const Index i = support[static_cast<std::size_t>(j)];
    if (std::abs(p[i] - s[j]) > 1e-12) return false;
    snapped[i] = s[j];
  }
  std::vector<char> on(static_cast<std::size_t>(p.size()), 0);
  for (Index i : support) on[static_cast<std::size_t>(i)] = 1;
  for (Index i = 0; i < p.size(); ++i) {
    if (!on[static_cast<std::size_t>(i)] && std::abs(p[i]) > 1.0 - kInteriorMargin) return false;
  }
  inst.u_star = Vector::Zero(p.size());
  for (Index j = 0; j < k; ++j) inst.u_star[support[static_cast<std::size_t>(j)]] = s[j] * rng.uniform(0.5, 1.5);
  inst.z_star = std::move(z);
  inst.p_star = std::move(snapped);
  return true;
}

// Removes the component of z along F 1 so that F* z sums to zero.
void project_out_constants(const LinearMap& map, Vector& z) {
  const Vector f1 = map.apply(Vector::Ones(map.in_dim()));
  const double nn = f1.squaredNorm();
  if (nn > 0.0) z -= (f1.dot(z) / nn) * f1;
}

bool build_tv_path(const LinearMap& map, const Regularizer& reg, Vector z, Rng& rng, SourceInstance& inst) {
  const Index n = map.in_dim();
  const Index edges = reg.edge_count();
  project_out_constants(map, z);
  auto dual_of = [&](const Vector& zz) {
    const Vector p = map.adjoint(zz);
    Vector q(edges);
    double acc = 0.0;
    for (Index e = 0; e < edges; ++e) {
      acc += p[e];
      q[e] = -acc;
    }
    return q;
  };
  Vector q = dual_of(z);
  const double peak = edges ? q.cwiseAbs().maxCoeff() : 0.0;
  if (!(peak > 0.0)) return false;
  z /= peak;
  q = dual_of(z);

  std::vector<Index> jumps;
  for (Index e = 0; e < edges; ++e) {
    if (std::abs(q[e]) >= kSaturation) jumps.push_back(e);
  }
  // Constraints: q_e(z) = sign for saturated edges and sum(F* z) = 0.
  const DenseMatrix fd = columns(map);
  const auto k = static_cast<Index>(jumps.size());
  DenseMatrix a(k + 1, map.out_dim());
  Vector r(k + 1);
  Vector s(k);
  DenseMatrix cum = DenseMatrix::Zero(map.out_dim(), edges);
  Vector running = Vector::Zero(map.out_dim());
  for (Index e = 0; e < edges; ++e) {
    running += fd.col(e);
    cum.col(e) = running;
  }
  for (Index j = 0; j < k; ++j) {
    const Index e = jumps[static_cast<std::size_t>(j)];
    a.row(j) = -cum.col(e).transpose();
    s[j] = sign_of(q[e]);
    r[j] = s[j] - q[e];
  }
  const Vector f1 = fd.rowwise().sum();
  a.row(k) = f1.transpose();
  r[k] = -f1.dot(z);
  z += min_norm_correction(a, r);
  q = dual_of(z);
  Vector snapped = q;
  for (Index j = 0; j < k; ++j) {
    const Index e = jumps[static_cast<std::size_t>(j)];
    if (std::abs(q[e] - s[j]) > 1e-12) return false;
    snapped[e] = s[j];
  }
  std::vector<char> jump(static_cast<std::size_t>(edges), 0);
  for (Index e : jumps) jump[static_cast<std::size_t>(e)] = 1;
  for (Index e = 0; e < edges; ++e) {
    if (!jump[static_cast<std::size_t>(e)] && std::abs(q[e]) > 1.0 - kInteriorMargin) return false;
  }
  inst.u_star.resize(n);
  inst.u_star[0] = rng.gaussian();
  for (Index e = 0; e < edges; ++e) {
    const double step = jump[static_cast<std::size_t>(e)] ? sign_of(snapped[e]) * rng.uniform(0.5, 1.5) : 0.0;
    inst.u_star[e + 1] = inst.u_star[e] + step;
  }
  inst.z_star = std::move(z);
  inst.p_star = reg.difference_adjoint(snapped);
  return true;
}

// Constant u* with an interior dual field q = D w, D^T D w = F* z.
bool build_tv_constant(const LinearMap& map, const Regularizer& reg, Vector z, Rng& rng, SourceInstance& inst) {
  project_out_constants(map, z);
  const Vector p = map.adjoint(z);
  if (!(p.norm() > 0.0)) return false;
  auto laplacian = [&](const Vector& w) -> Vector { return reg.difference_adjoint(reg.difference(w)); };
  Vector rhs = p;
  rhs.array() -= rhs.mean();
  const auto cg = detail::conjugate_gradient(laplacian, rhs, Vector::Zero(p.size()), 1e-14 * (1.0 + rhs.norm()),
                                             20 * static_cast<int>(p.size()) + 100);
  Vector q = reg.difference(cg.x);
  const double peak = q.size() ? q.cwiseAbs().maxCoeff() : 0.0;
  if (!(peak > 0.0)) return false;
  const double scale = 0.5 / peak;
  q *= scale;
  inst.z_star = scale * z;
  inst.p_star = reg.difference_adjoint(q);
  inst.u_star = Vector::Constant(map.in_dim(), rng.gaussian());
  return true;
}

bool build_instance(const LinearMap& map, const Regularizer& reg, Vector z, Rng& rng, SourceInstance& inst) {
  bool ok = false;
  switch (reg.kind()) {
    case RegularizerKind::quadratic:
      inst.z_star = std::move(z);
      inst.p_star = map.adjoint(inst.z_star);
      inst.u_star = inst.p_star;
      ok = inst.p_star.norm() > 0.0;
      break;
    case RegularizerKind::l1: ok = build_l1(map, std::move(z), rng, inst); break;
    case RegularizerKind::tv_aniso:
      ok = reg.is_path() ? build_tv_path(map, reg, std::move(z), rng, inst)
                         : build_tv_constant(map, reg, std::move(z), rng, inst);
      break;
  }
  if (!ok) return false;
  inst.defect = (map.adjoint(inst.z_star) - inst.p_star).norm();
  if (!(inst.defect <= kInstanceDefect)) return false;
  if (!is_subgradient(reg, inst.u_star, inst.p_star, 1e-8).member) return false;
  inst.v_star = map.apply(inst.u_star);
  return true;
}

void check_instance_dims(const LinearMap& map, const Regularizer& reg) {
  if (reg.kind() == RegularizerKind::tv_aniso && reg.dim() != map.in_dim()) {
    throw DimensionError("construct_source_instance: regularizer and operator dimensions differ");
  }
}

}  // namespace

SourceInstance construct_source_instance(const LinearMap& map, const Regularizer& reg, std::uint64_t seed) {
  check_instance_dims(map, reg);
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    Rng rng(seed, "instance", static_cast<std::uint64_t>(draw));
    SourceInstance inst;
    Vector z = rng.gaussian_vector(map.out_dim());
    if (!build_instance(map, reg, std::move(z), rng, inst)) continue;
    inst.seed = seed;
    inst.redraws = draw;
    return inst;
  }
  throw std::runtime_error("construct_source_instance: no admissible draw for seed " + std::to_string(seed));
}

SourceInstance source_instance_from(const LinearMap& map, const Regularizer& reg, const DataVector& z_star,
                                    std::uint64_t seed) {
  check_instance_dims(map, reg);
  if (z_star.size() != map.out_dim()) throw DimensionError("source_instance_from: z* has the wrong dimension");
  Rng rng(seed, "instance");
  SourceInstance inst;
  if (!build_instance(map, reg, z_star, rng, inst)) {
    throw std::invalid_argument("source_instance_from: z* does not yield an admissible instance");
  }
  inst.seed = seed;
  return inst;
}

SourceElement solve_source_element(const LinearMap& map, const SolutionVector& p_star, const SolverConfig& cfg) {
  if (p_star.size() != map.in_dim()) throw DimensionError("solve_source_element: p* has the wrong dimension");
  // CGLS for min |A z - p| with A = F*, A^T = F.
  SourceElement out;
  Vector z = Vector::Zero(map.out_dim());
  Vector r = p_star;
  Vector s = map.apply(r);
  Vector d = s;
  double gamma = s.squaredNorm();
  const double stop = 1e-14 * (1.0 + std::sqrt(gamma));
  const int limit = std::min(cfg.max_iters, 4 * static_cast<int>(std::min(map.in_dim(), map.out_dim())) + 200);
  int k = 0;
  while (k < limit && std::sqrt(gamma) > stop) {
    const Vector ad = map.adjoint(d);
    const double dd = ad.squaredNorm();
    if (!(dd > 0.0)) break;
    const double step = gamma / dd;
    z += step * d;
    r -= step * ad;
    s = map.apply(r);
    const double next = s.squaredNorm();
    d = s + (next / gamma) * d;
    gamma = next;
    ++k;
  }
  out.defect = (map.adjoint(z) - p_star).norm();
  out.z = std::move(z);
  out.iterations = k;
  return out;
}

double distance_function(const LinearMap& map, const SolutionVector& p_star, double rho, const SolverConfig& cfg) {
  if (!(rho >= 0.0)) throw std::invalid_argument("distance_function: rho must be >= 0");
  if (p_star.size() != map.in_dim()) throw DimensionError("distance_function: p* has the wrong dimension");
  if (rho == 0.0) return p_star.norm();
  const auto minimal = solve_source_element(map, p_star, cfg);
  if (minimal.z.norm() <= rho) return minimal.defect;

  // Lagrangian dual: z(mu) = (F F* + mu I)^{-1} F p*, with |z(mu)| decreasing in mu.
  const Vector fp = map.apply(p_star);
  Vector warm = Vector::Zero(map.out_dim());
  auto ridge = [&](double mu) {
    auto op = [&](const Vector& x) -> Vector { return map.apply(map.adjoint(x)) + mu * x; };
    warm = detail::conjugate_gradient(op, fp, warm, 1e-14 * (1.0 + fp.norm()), 10 * static_cast<int>(fp.size()) + 200).x;
    return warm;
  };
  const double nrm = operator_norm_estimate(map, 100, substream_seed(cfg.seed, "power-iteration"));
  double hi = std::max(nrm * nrm, 1e-300);
  while (ridge(hi).norm() > rho) hi *= 4.0;
  double lo = hi;
  for (int i = 0; i < 400 && ridge(lo).norm() <= rho; ++i) lo *= 0.25;
  for (int it = 0; it < 100; ++it) {
    const double mid = std::sqrt(lo * hi);
    (ridge(mid).norm() > rho ? lo : hi) = mid;
  }
  Vector z = ridge(hi);
  if (z.norm() > rho) z *= rho / z.norm();

  // Accelerated projected gradient on 1/2 |F* z - p*|^2 over the ball.
  auto project = [rho](Vector& x) {
    const double nx = x.norm();
    if (nx > rho) x *= rho / nx;
  };
  auto residual = [&](const Vector& x) { return (map.adjoint(x) - p_star).norm(); };
  const double lipschitz = std::max(1.01 * nrm * nrm, 1e-300);
  double best = residual(z);
  Vector x = z;
  Vector y = z;
  double fx = best;
  double t = 1.0;
  for (int k = 0; k < 500; ++k) {
    Vector xn = y - map.apply(map.adjoint(y) - p_star) / lipschitz;
    project(xn);
    const double fn = residual(xn);
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
    best = std::min(best, fx);
  }
  return best;
}

double EstimateReport::component(const std::string& name) const {
  for (const auto& [key, val] : components) {
    if (key == name) return val;
  }
  throw std::out_of_range("EstimateReport: no component '" + name + "'");
}

void EstimateReport::print(std::ostream& out) const {
  out << (holds ? "holds" : "VIOLATED") << ": lhs=" << csv::format_double(lhs)
      << " rhs=" << csv::format_double(rhs) << " slack=" << csv::format_double(slack)
      << " headroom=" << csv::format_double(headroom);
  for (const auto& [key, val] : components) out << ' ' << key << '=' << csv::format_double(val);
  out << '\n';
}

EstimateReport make_report(double lhs, double rhs, double tol,
                           std::vector<std::pair<std::string, double>> components) {
  EstimateReport r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.headroom = 10.0 * tol * (1.0 + std::abs(rhs));
  r.slack = rhs - lhs;
  r.holds = lhs <= rhs + r.headroom;
  r.components = std::move(components);
  return r;
}

namespace {

RegularizedSolution solve_or_reuse(const LinearMap& map, const Regularizer& reg, const DataVector& data,
                                   double alpha, const SolverConfig& cfg, const RegularizedSolution* solved) {
  if (solved) {
    if (solved->alpha != alpha || solved->u_alpha.size() != map.in_dim()) {
      throw std::invalid_argument("estimate check: supplied solution does not match the problem");
    }
    return *solved;
  }
  return solve_variational(map, data, alpha, reg, cfg);
}

double solution_membership_tol(const RegularizedSolution& s) {
  return std::max(kMembershipTol, 2.0 * s.optimality_defect / s.alpha);
}

}  // namespace

EstimateReport check_error_estimate(const LinearMap& map, const Regularizer& reg, const SourceInstance& instance,
                                    const DataVector& data, double alpha, const SolverConfig& cfg,
                                    const RegularizedSolution* solved) {
  const auto s = solve_or_reuse(map, reg, data, alpha, cfg, solved);
  const double dsym = symmetric_bregman(reg, s.u_alpha, instance.u_star, s.p_alpha, instance.p_star,
                                        solution_membership_tol(s));
  const double out_err = 0.5 * map.apply(s.u_alpha - instance.u_star).squaredNorm();
  const double noise = (data - instance.v_star).squaredNorm();
  const double bias = alpha * alpha * instance.z_star.squaredNorm();
  return make_report(out_err + alpha * dsym, noise + bias, cfg.tol,
                     {{"half_output_error", out_err},
                      {"symmetric_bregman", dsym},
                      {"noise_energy", noise},
                      {"alpha2_zstar2", bias},
                      {"optimality_defect", s.optimality_defect}});
}

EstimateReport check_effective_estimate(const LinearMap& map, const Regularizer& reg,
                                        const SourceInstance& instance, const DataVector& data, double alpha,
                                        const SolverConfig& cfg, const RegularizedSolution* solved) {
  const auto s = solve_or_reuse(map, reg, data, alpha, cfg, solved);
  const double dsym = symmetric_bregman(reg, s.u_alpha, instance.u_star, s.p_alpha, instance.p_star,
                                        solution_membership_tol(s));
  const double variance = (data - instance.v_star).squaredNorm() / alpha;
  const double bias = alpha * instance.z_star.squaredNorm();
  return make_report(dsym, variance + bias, cfg.tol,
                     {{"noise_over_alpha", variance},
                      {"alpha_zstar2", bias},
                      {"optimality_defect", s.optimality_defect}});
}

HigherOrderInstance construct_higher_order_instance(const LinearMap& map, const Regularizer& reg,
                                                    std::uint64_t seed) {
  const Index n = map.in_dim();
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    Rng rng(seed, "instance", static_cast<std::uint64_t>(draw));
    HigherOrderInstance inst;
    switch (reg.kind()) {
      case RegularizerKind::quadratic:
        inst.eta_star = rng.gaussian_vector(n);
        inst.p_star = map.adjoint(map.apply(inst.eta_star));
        inst.u_star = inst.p_star;
        break;
      case RegularizerKind::l1: {
        const Index k = std::max<Index>(1, std::min<Index>(n / 4, map.out_dim() / 2));
        std::vector<Index> perm(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        std::vector<Index> support(perm.begin(), perm.begin() + k);
        std::sort(support.begin(), support.end());
        const DenseMatrix fd = columns(map);
        DenseMatrix fs(map.out_dim(), k);
        Vector s(k);
        for (Index j = 0; j < k; ++j) {
          fs.col(j) = fd.col(support[static_cast<std::size_t>(j)]);
          s[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        }
        const DenseMatrix gs = fs.transpose() * fs;
        Eigen::ColPivHouseholderQR<DenseMatrix> qr(gs);
        if (qr.rank() < k) continue;
        const Vector eta_s = qr.solve(s);
        inst.eta_star = Vector::Zero(n);
        inst.u_star = Vector::Zero(n);
        for (Index j = 0; j < k; ++j) {
          const Index i = support[static_cast<std::size_t>(j)];
          inst.eta_star[i] = eta_s[j];
          inst.u_star[i] = s[j] * rng.uniform(1.0, 2.0);
        }
        inst.p_star = map.adjoint(map.apply(inst.eta_star));
        bool ok = true;
        std::vector<char> on(static_cast<std::size_t>(n), 0);
        for (Index j = 0; j < k; ++j) {
          const Index i = support[static_cast<std::size_t>(j)];
          on[static_cast<std::size_t>(i)] = 1;
          if (std::abs(inst.p_star[i] - s[j]) > 1e-10) ok = false;
          inst.p_star[i] = s[j];
        }
        for (Index i = 0; i < n; ++i) {
          if (!on[static_cast<std::size_t>(i)] && std::abs(inst.p_star[i]) > 1.0 - kInteriorMargin) ok = false;
        }
        if (!ok) continue;
        double min_u = std::numeric_limits<double>::infinity();
        for (Index i : support) min_u = std::min(min_u, std::abs(inst.u_star[i]));
        inst.sign_threshold = min_u / inst.eta_star.cwiseAbs().maxCoeff();
        break;
      }
      case RegularizerKind::tv_aniso:
        throw UnsupportedOperation("construct_higher_order_instance: not available for tv_aniso");
    }
    if (!(inst.p_star.norm() > 0.0)) continue;
    if (!is_subgradient(reg, inst.u_star, inst.p_star, 1e-8).member) continue;
    inst.v_star = map.apply(inst.u_star);
    return inst;
  }
  throw std::runtime_error("construct_higher_order_instance: no admissible draw for seed " + std::to_string(seed));
}

EstimateReport check_higher_order_estimate(const LinearMap& map, const Regularizer& reg,
                                           const SolutionVector& u_star, const SolutionVector& eta_star,
                                           const DataVector& data, double alpha, const SolverConfig& cfg) {
  if (u_star.size() != map.in_dim() || eta_star.size() != map.in_dim()) {
    throw DimensionError("check_higher_order_estimate: u* and eta* must live in the solution space");
  }
  Vector p_star = map.adjoint(map.apply(eta_star));
  if (reg.kind() == RegularizerKind::l1) {
    // Remove roundoff on the support so the sign rule is met exactly.
    for (Index i = 0; i < p_star.size(); ++i) {
      if (u_star[i] != 0.0 && std::abs(p_star[i] - sign_of(u_star[i])) <= 1e-10) p_star[i] = sign_of(u_star[i]);
    }
  }
  const Vector shifted = u_star - alpha * eta_star;
  const double first = bregman_distance(reg, shifted, u_star, p_star);
  const auto s = solve_variational(map, data, alpha, reg, cfg);
  const double lhs = bregman_distance(reg, s.u_alpha, u_star, p_star);
  const double noise = (data - map.apply(u_star)).squaredNorm() / (2.0 * alpha);
  std::vector<std::pair<std::string, double>> comps{{"first_term", first}, {"noise_term", noise}};
  if (reg.kind() == RegularizerKind::quadratic) {
    comps.emplace_back("quadratic_reference", 0.5 * alpha * alpha * eta_star.squaredNorm());
  }
  if (reg.kind() == RegularizerKind::l1) {
    comps.emplace_back("first_term_zero", first <= 1e-12 * (1.0 + value(reg, u_star)) ? 1.0 : 0.0);
  }
  comps.emplace_back("optimality_defect", s.optimality_defect);
  return make_report(lhs, first + noise, cfg.tol, std::move(comps));
}

DataVector range_condition_data(const SourceInstance& instance, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("range_condition_data: alpha must be positive");
  return instance.v_star + alpha * instance.z_star;
}

double range_condition_defect(const LinearMap& map, const Regularizer& reg, const SourceInstance& instance,
                              double alpha) {
  return optimality_defect(map, range_condition_data(instance, alpha), reg, instance.u_star, alpha);
}

void ConvergenceResult::write_csv(std::ostream& out) const {
  csv::Table table({"n", "delta", "alpha", "bregman", "bound", "output_err", "J_value"});
  for (const auto& r : rows) {
    table.add_row({static_cast<long long>(r.n), r.delta, r.alpha, r.bregman, r.bound, r.output_err, r.J_value});
  }
  table.write(out);
}

ConvergenceResult convergence_study(const LinearMap& map, const Regularizer& reg, const SourceInstance& instance,
                                    const ConvergenceOptions& options, const SolverConfig& cfg) {
  if (!(options.c > 0.0)) throw std::invalid_argument("convergence_study: c must be positive");
  if (!(options.delta0 > 0.0)) throw std::invalid_argument("convergence_study: delta0 must be positive");
  if (options.n_max < 0) throw std::invalid_argument("convergence_study: n_max must be >= 0");
  Vector direction = Rng(options.seed, "noise").gaussian_vector(map.out_dim());
  direction /= direction.norm();
  const double z2 = instance.z_star.squaredNorm();

  ConvergenceResult res;
  res.J_star = value(reg, instance.u_star);
  res.bounds_hold = true;
  for (int n = 0; n <= options.n_max; ++n) {
    ConvergenceRow row;
    row.n = n;
    row.delta = options.delta0 * std::ldexp(1.0, -n);
    row.alpha = options.rule == AlphaRule::linear ? options.c * row.delta : row.delta * row.delta;
    const Vector data = instance.v_star + row.delta * direction;
    const auto s = solve_variational(map, data, row.alpha, reg, cfg);
    row.bregman = symmetric_bregman(reg, s.u_alpha, instance.u_star, s.p_alpha, instance.p_star,
                                    solution_membership_tol(s));
    row.bound = row.delta * row.delta / row.alpha + row.alpha * z2;
    row.output_err = (map.apply(s.u_alpha) - instance.v_star).norm();
    row.J_value = s.J_value;
    row.within_bound = row.bregman <= row.bound + 10.0 * cfg.tol * (1.0 + row.bound);
    res.bounds_hold = res.bounds_hold && row.within_bound;
    res.rows.push_back(row);
  }

  // Least-squares slope of log2(bregman) against n.
  double sn = 0.0, sy = 0.0, snn = 0.0, sny = 0.0;
  int count = 0;
  for (const auto& r : res.rows) {
    if (!(r.bregman > 0.0)) continue;
    const double y = std::log2(r.bregman);
    sn += r.n;
    sy += y;
    snn += static_cast<double>(r.n) * r.n;
    sny += r.n * y;
    ++count;
  }
  if (count >= 2) {
    const double slope = (count * sny - sn * sy) / (count * snn - sn * sn);
    res.fitted_ratio = std::exp2(slope);
  }
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const double prev = res.rows[i - 1].bregman;
    res.step_ratios.push_back(prev > 0.0 ? res.rows[i].bregman / prev : 0.0);
  }
  res.J_gap_final = std::abs(res.rows.back().J_value - res.J_star);
  res.J_converged = res.J_gap_final <= options.J_tolerance;
  res.rate_in_band = res.fitted_ratio >= options.ratio_low && res.fitted_ratio <= options.ratio_high;
  res.convergence_asserted = options.rule == AlphaRule::linear;
  if (res.convergence_asserted) {
    const bool decreased = res.rows.back().bregman <= res.rows.front().bregman;
    res.passed = res.bounds_hold && (!options.assert_rate || res.rate_in_band) && res.J_converged && decreased;
  } else {
    res.passed = res.bounds_hold;
  }
  return res;
}

void BiasVarianceResult::write_csv(std::ostream& out) const {
  csv::Table table({"alpha", "mean_bregman", "stderr", "bound"});
  for (const auto& r : rows) table.add_row({r.alpha, r.mean_bregman, r.stderr_bregman, r.bound});
  table.write(out);
}

BiasVarianceResult bias_variance_study(const LinearMap& map, const Regularizer& reg, const SourceInstance& instance,
                                       const BiasVarianceOptions& options, const SolverConfig& cfg) {
  if (options.replicates < 2) throw std::invalid_argument("bias_variance_study: replicates must be >= 2");
  if (options.alpha_grid.empty()) throw std::invalid_argument("bias_variance_study: empty alpha grid");
  if (!(options.noise_sigma >= 0.0)) throw std::invalid_argument("bias_variance_study: sigma must be >= 0");
  std::vector<double> grid = options.alpha_grid;
  std::sort(grid.begin(), grid.end());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && grid[i] == grid[i - 1])) {
      throw std::invalid_argument("bias_variance_study: alphas must be positive and distinct");
    }
  }
  const Index m = map.out_dim();
  const double z2 = instance.z_star.squaredNorm();
  // Samples are kept so that mean and variance come from two compensated passes.
  std::vector<std::vector<double>> samples(grid.size());
  std::vector<double> energy;
  for (int r = 0; r < options.replicates; ++r) {
    Rng rng(options.seed, "noise", static_cast<std::uint64_t>(r));
    const Vector noise = options.noise_sigma * rng.gaussian_vector(m);
    const Vector data = instance.v_star + noise;
    energy.push_back(noise.squaredNorm());
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const auto s = solve_variational(map, data, grid[a], reg, cfg);
      const double d = symmetric_bregman(reg, s.u_alpha, instance.u_star, s.p_alpha, instance.p_star,
                                         solution_membership_tol(s));
      samples[a].push_back(d);
    }
  }
  auto mean_and_stderr = [](const std::vector<double>& xs) {
    const auto count = static_cast<double>(xs.size());
    CompensatedSum total;
    for (double x : xs) total.add(x);
    const double mean = total.value() / count;
    CompensatedSum squares;
    for (double x : xs) squares.add((x - mean) * (x - mean));
    return std::pair{mean, std::sqrt(squares.value() / (count - 1.0) / count)};
  };
  BiasVarianceResult res;
  res.all_hold = true;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    BiasVarianceRow row;
    row.alpha = grid[a];
    std::tie(row.mean_bregman, row.stderr_bregman) = mean_and_stderr(samples[a]);
    row.bound = static_cast<double>(m) * options.noise_sigma * options.noise_sigma / row.alpha + row.alpha * z2;
    row.holds = row.mean_bregman <= row.bound + 3.0 * row.stderr_bregman + 10.0 * cfg.tol * (1.0 + row.bound);
    res.all_hold = res.all_hold && row.holds;
    res.rows.push_back(row);
  }
  for (std::size_t a = 1; a < res.rows.size(); ++a) {
    if (res.rows[a].mean_bregman < res.rows[res.argmin].mean_bregman) res.argmin = a;
  }
  res.interior_minimum = res.rows.size() >= 3 && res.argmin > 0 && res.argmin + 1 < res.rows.size();
  std::tie(res.noise_energy_mean, res.noise_energy_stderr) = mean_and_stderr(energy);
  const double expected = static_cast<double>(m) * options.noise_sigma * options.noise_sigma;
  res.noise_moment_ok = std::abs(res.noise_energy_mean - expected) <= 3.0 * res.noise_energy_stderr + 1e-12 * expected;
  return res;
}

}  // namespace varreg
