#include "varreg/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "detail/krylov.hpp"
#include "varreg/rng.hpp"

namespace varreg {

void SolverConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be > 0");
  if (!(step_safety > 0.0 && step_safety <= 1.0)) {
    throw std::invalid_argument("SolverConfig: step_safety must lie in (0, 1]");
  }
}

double objective(const LinearMap& map, const DataVector& data, const Regularizer& reg,
                 const SolutionVector& u, double alpha) {
  return 0.5 * (map.apply(u) - data).squaredNorm() + alpha * value(reg, u);
}

double defect_target(const LinearMap& map, const DataVector& data, const SolverConfig& cfg) {
  return cfg.tol * (1.0 + map.adjoint(data).norm());
}

double optimality_defect(const LinearMap& map, const DataVector& data, const Regularizer& reg,
                         const SolutionVector& u, double alpha) {
  const Vector p = subgradient_from_optimality(map, data, u, alpha);
  return alpha * subdifferential_distance(reg, u, p);
}

namespace {

void check_inputs(const LinearMap& map, const DataVector& data, double alpha, const SolverConfig& cfg) {
  cfg.validate();
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("solver: alpha must be positive");
  if (data.size() != map.out_dim()) {
    throw DimensionError("solver: data has " + std::to_string(data.size()) + " entries, operator has " +
                         std::to_string(map.out_dim()) + " rows");
  }
  require_finite(data, "data");
}

Vector initial_point(Index n, const SolverConfig& cfg) {
  if (!cfg.random_init) return Vector::Zero(n);
  Rng rng(cfg.seed, "init");
  return 0.1 * rng.gaussian_vector(n);
}

RegularizedSolution finish(const LinearMap& map, const DataVector& data, const Regularizer& reg,
                           Vector u, double alpha, double defect, double target, int iterations,
                           std::string method) {
  RegularizedSolution s;
  const Vector residual = map.apply(u) - data;
  s.p_alpha = -map.adjoint(residual) / alpha;
  s.data_residual = 0.5 * residual.squaredNorm();
  s.J_value = value(reg, u);
  s.u_alpha = std::move(u);
  s.alpha = alpha;
  s.optimality_defect = defect;
  s.defect_target = target;
  s.iterations = iterations;
  s.method = std::move(method);
  return s;
}

[[noreturn]] void fail(const std::string& method, double defect, double target, int iterations) {
  throw ConvergenceError(method + ": optimality defect " + std::to_string(defect) + " above target " +
                             std::to_string(target) + " after " + std::to_string(iterations) +
                             " iterations",
                         defect, iterations);
}

}  // namespace

RegularizedSolution solve_tikhonov_exact(const LinearMap& map, const DataVector& data, double alpha,
                                         const SolverConfig& cfg) {
  check_inputs(map, data, alpha, cfg);
  const Vector rhs = map.adjoint(data);
  const double target = cfg.tol * (1.0 + rhs.norm());
  auto normal = [&](const Vector& x) -> Vector { return map.adjoint(map.apply(x)) + alpha * x; };
  auto cg = detail::conjugate_gradient(normal, rhs, initial_point(map.in_dim(), cfg), 0.5 * target,
                                       cfg.max_iters);
  const Regularizer reg = Regularizer::quadratic();
  const double defect = optimality_defect(map, data, reg, cg.x, alpha);
  if (!(defect <= target)) fail("solve_tikhonov_exact", defect, target, cg.iterations);
  return finish(map, data, reg, std::move(cg.x), alpha, defect, target, cg.iterations, "tikhonov_cg");
}

namespace {

// Exact least squares on the support of x with its sign pattern fixed:
// F_S^T F_S c = F_S^T v - alpha s. Returns false if signs flip.
bool l1_support_polish(const LinearMap& map, const Vector& ftv, double alpha, const Vector& x,
                       double abs_tol, int max_iter, Vector& out) {
  std::vector<Index> support;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) support.push_back(i);
  }
  if (support.empty()) return false;
  const auto k = static_cast<Index>(support.size());
  Vector signs(k);
  Vector rhs(k);
  Vector c0(k);
  for (Index j = 0; j < k; ++j) {
    const Index i = support[static_cast<std::size_t>(j)];
    signs[j] = x[i] > 0.0 ? 1.0 : -1.0;
    rhs[j] = ftv[i] - alpha * signs[j];
    c0[j] = x[i];
  }
  const Index n = x.size();
  auto restricted = [&](const Vector& c) -> Vector {
    Vector full = Vector::Zero(n);
    for (Index j = 0; j < k; ++j) full[support[static_cast<std::size_t>(j)]] = c[j];
    const Vector back = map.adjoint(map.apply(full));
    Vector r(k);
    for (Index j = 0; j < k; ++j) r[j] = back[support[static_cast<std::size_t>(j)]];
    return r;
  };
  const auto cg = detail::conjugate_gradient(restricted, rhs, c0, abs_tol, max_iter);
  out = Vector::Zero(n);
  for (Index j = 0; j < k; ++j) {
    if (cg.x[j] * signs[j] <= 0.0) return false;
    out[support[static_cast<std::size_t>(j)]] = cg.x[j];
  }
  return true;
}

}  // namespace

RegularizedSolution solve_fista(const LinearMap& map, const DataVector& data, double alpha,
                                const Regularizer& reg, const SolverConfig& cfg) {
  check_inputs(map, data, alpha, cfg);
  if (!reg.has_prox()) throw UnsupportedOperation("solve_fista: regularizer has no proximal map");
  const Vector ftv = map.adjoint(data);
  const double target = cfg.tol * (1.0 + ftv.norm());
  const double norm = operator_norm_estimate(map, 100, substream_seed(cfg.seed, "power-iteration"));
  double lipschitz = norm > 0.0 ? 1.01 * norm * norm : 1.0;

  auto smooth = [&](const Vector& fx) { return 0.5 * (fx - data).squaredNorm(); };
  auto defect_of = [&](const Vector& x, const Vector& grad) {
    return alpha * subdifferential_distance(reg, x, -grad / alpha);
  };

  Vector x = initial_point(map.in_dim(), cfg);
  Vector fx = map.apply(x);
  Vector gx = map.adjoint(fx - data);
  double obj = smooth(fx) + alpha * value(reg, x);
  double defect = defect_of(x, gx);
  Vector y = x;
  double t = 1.0;
  int k = 0;
  while (defect > target && k < cfg.max_iters) {
    ++k;
    const Vector fy = map.apply(y);
    const Vector gy = map.adjoint(fy - data);
    const double sy = smooth(fy);
    Vector xn;
    Vector fxn;
    double sn = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      const double step = cfg.step_safety / lipschitz;
      xn = prox(reg, alpha * step, y - step * gy);
      fxn = map.apply(xn);
      sn = smooth(fxn);
      const Vector d = xn - y;
      if (sn <= sy + gy.dot(d) + 0.5 * lipschitz * d.squaredNorm() + 1e-12 * std::abs(sy)) break;
      lipschitz *= 2.0;
    }
    const double on = sn + alpha * value(reg, xn);
    if (on > obj && t > 1.0) {
      t = 1.0;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / t_next) * (xn - x);
    x = std::move(xn);
    fx = std::move(fxn);
    gx = map.adjoint(fx - data);
    obj = on;
    t = t_next;
    defect = defect_of(x, gx);

    const bool converged = defect <= target;
    if (reg.kind() == RegularizerKind::l1 && defect > 0.0 && (converged || k % 50 == 0)) {
      // Sharpen to the exact minimiser on the current support and signs.
      Vector polished;
      const int budget = std::min(cfg.max_iters, 10 * static_cast<int>(x.size()) + 100);
      if (l1_support_polish(map, ftv, alpha, x, 0.01 * target, budget, polished)) {
        const Vector fp = map.apply(polished);
        const Vector gp = map.adjoint(fp - data);
        const double dp = defect_of(polished, gp);
        if (dp < defect) {
          x = std::move(polished);
          fx = fp;
          gx = gp;
          obj = smooth(fx) + alpha * value(reg, x);
          defect = dp;
          y = x;
          t = 1.0;
        }
      }
    }
  }
  if (!(defect <= target)) fail("solve_fista", defect, target, k);
  return finish(map, data, reg, std::move(x), alpha, defect, target, k, "fista");
}

namespace {

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      auto& p = parent[static_cast<std::size_t>(i)];
      p = parent[static_cast<std::size_t>(p)];
      i = p;
    }
    return i;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

struct TvCandidate {
  Vector u;
  double objective = 0.0;
};

// Minimiser of D_alpha over images that are constant on the components of the
// merged edges, with the sign of every remaining jump fixed.
class TvPolisher {
 public:
  static constexpr Index kMaxComponents = 2048;

  TvPolisher(const LinearMap& map, const DataVector& data, const Regularizer& reg, double alpha,
             const DenseMatrix* gram)
      : map_(map), data_(data), reg_(reg), alpha_(alpha), gram_(gram), ftv_(map.adjoint(data)) {}

  bool solve(const std::vector<char>& merged, const Vector& u, const Vector& q, TvCandidate& out) const {
    const Index n = map_.in_dim();
    const auto edges = reg_.edges();
    UnionFind uf(n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (merged[e]) uf.unite(edges[e].from, edges[e].to);
    }
    std::vector<Index> comp(static_cast<std::size_t>(n));
    std::vector<Index> label(static_cast<std::size_t>(n), -1);
    Index k = 0;
    for (Index i = 0; i < n; ++i) {
      const Index root = uf.find(i);
      auto& l = label[static_cast<std::size_t>(root)];
      if (l < 0) l = k++;
      comp[static_cast<std::size_t>(i)] = l;
    }
    if (k > kMaxComponents || (!gram_ && k > 512)) return false;

    const Vector du = reg_.difference(u);
    Vector s = Vector::Zero(static_cast<Index>(edges.size()));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (comp[static_cast<std::size_t>(edges[e].from)] == comp[static_cast<std::size_t>(edges[e].to)]) continue;
      const auto ei = static_cast<Index>(e);
      const double d = du[ei] != 0.0 ? du[ei] : q[ei];
      s[ei] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    const Vector lin = ftv_ - alpha_ * reg_.difference_adjoint(s);

    DenseMatrix reduced = DenseMatrix::Zero(k, k);
    Vector rhs = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) rhs[comp[static_cast<std::size_t>(i)]] += lin[i];
    if (gram_) {
      DenseMatrix partial = DenseMatrix::Zero(k, n);
      for (Index i = 0; i < n; ++i) partial.row(comp[static_cast<std::size_t>(i)]) += gram_->row(i);
      for (Index j = 0; j < n; ++j) reduced.col(comp[static_cast<std::size_t>(j)]) += partial.col(j);
    } else {
      DenseMatrix fb(map_.out_dim(), k);
      for (Index c = 0; c < k; ++c) {
        Vector ind = Vector::Zero(n);
        for (Index i = 0; i < n; ++i) {
          if (comp[static_cast<std::size_t>(i)] == c) ind[i] = 1.0;
        }
        fb.col(c) = map_.apply(ind);
      }
      reduced = fb.transpose() * fb;
    }
    Vector c;
    const Eigen::LLT<DenseMatrix> llt(reduced);
    if (llt.info() == Eigen::Success) c = llt.solve(rhs);
    if (llt.info() != Eigen::Success || !all_finite(c) || (reduced * c - rhs).norm() > 1e-10 * (1.0 + rhs.norm())) {
      c = Eigen::CompleteOrthogonalDecomposition<DenseMatrix>(reduced).solve(rhs);
    }
    Vector cand(n);
    for (Index i = 0; i < n; ++i) cand[i] = c[comp[static_cast<std::size_t>(i)]];
    if (!all_finite(cand)) return false;

    const Vector dc = reg_.difference(cand);
    for (Index e = 0; e < s.size(); ++e) {
      if (s[e] != 0.0 && dc[e] * s[e] < 0.0) return false;
    }
    out.u = std::move(cand);
    out.objective = objective(map_, data_, reg_, out.u, alpha_);
    return true;
  }

 private:
  const LinearMap& map_;
  const DataVector& data_;
  const Regularizer& reg_;
  double alpha_;
  const DenseMatrix* gram_;
  Vector ftv_;
};

}  // namespace

RegularizedSolution solve_primal_dual(const LinearMap& map, const DataVector& data, double alpha,
                                      const Regularizer& reg, const SolverConfig& cfg) {
  check_inputs(map, data, alpha, cfg);
  if (reg.kind() != RegularizerKind::tv_aniso) {
    throw UnsupportedOperation("solve_primal_dual: only tv_aniso is supported");
  }
  if (reg.dim() != map.in_dim()) {
    throw DimensionError("solve_primal_dual: regularizer is defined on " + std::to_string(reg.dim()) +
                         " pixels, operator on " + std::to_string(map.in_dim()));
  }
  const Index n = map.in_dim();
  const Vector ftv = map.adjoint(data);
  const double target = cfg.tol * (1.0 + ftv.norm());
  // tau sigma = step_safety^2 / |D|^2. The ergodic gap bound |u0 - u|^2 / tau +
  // |q0 - q|^2 / sigma is smallest at tau / sigma = |u| / |q|, estimated by
  // |F* v| / |F|^2 for the primal and alpha sqrt(edges) for the dual (|q_e| <= alpha).
  const double base_step = cfg.step_safety / std::sqrt(reg.difference_norm_sq_bound());
  const double lip = operator_norm_estimate(map, 50, cfg.seed);
  const double u_scale = lip > 0.0 ? ftv.norm() / (lip * lip) : 0.0;
  const double q_scale = alpha * std::sqrt(static_cast<double>(std::max<Index>(reg.edge_count(), 1)));
  const double ratio = u_scale > 0.0 ? std::clamp(std::sqrt(u_scale / q_scale), 1e-3, 1e3) : 1.0;
  const double tau = base_step * ratio;
  const double sigma = base_step / ratio;

  constexpr Index kDenseLimit = 2048;
  DenseMatrix g;
  Eigen::LLT<DenseMatrix> factor;
  const bool dense = n <= kDenseLimit;
  if (dense) {
    g = map.normal_matrix();
    factor.compute(DenseMatrix::Identity(n, n) + tau * g);
  }
  auto primal_prox = [&](const Vector& w, const Vector& warm) -> Vector {
    const Vector rhs = w + tau * ftv;
    if (dense) return factor.solve(rhs);
    auto op = [&](const Vector& x) -> Vector { return x + tau * map.adjoint(map.apply(x)); };
    return detail::conjugate_gradient(op, rhs, warm, 1e-3 * target, 500).x;
  };

  const TvPolisher polisher(map, data, reg, alpha, dense ? &g : nullptr);
  const Index m = reg.edge_count();
  Vector u = initial_point(n, cfg);
  Vector ubar = u;
  Vector q = Vector::Zero(m);
  double best_defect = std::numeric_limits<double>::infinity();

  std::set<std::vector<char>> tried;
  auto try_polish = [&](int iter) -> bool {
    const Vector du = reg.difference(u);
    const double scale = du.size() ? du.cwiseAbs().maxCoeff() : 0.0;
    std::vector<std::vector<char>> masks;
    // A candidate depends on the merged edges and on the jump signs, so both
    // enter the key: 0 merged, otherwise 1 + the sign used by the polisher.
    auto add_mask = [&](std::vector<char> mask) {
      std::vector<char> key(mask.size());
      for (std::size_t e = 0; e < mask.size(); ++e) {
        const auto ei = static_cast<Index>(e);
        const double d = du[ei] != 0.0 ? du[ei] : q[ei];
        key[e] = mask[e] ? 0 : static_cast<char>(2 + (d > 0.0) - (d < 0.0));
      }
      if (tried.insert(std::move(key)).second) masks.push_back(std::move(mask));
    };
    for (double thr : {1e-2, 1e-4, 1e-6, 1e-9}) {
      std::vector<char> mask(static_cast<std::size_t>(m));
      for (Index e = 0; e < m; ++e) mask[static_cast<std::size_t>(e)] = std::abs(du[e]) <= thr * scale;
      add_mask(std::move(mask));
    }
    if (iter > 0) {
      for (double kappa : {1e-2, 1e-4}) {
        std::vector<char> mask(static_cast<std::size_t>(m));
        for (Index e = 0; e < m; ++e) mask[static_cast<std::size_t>(e)] = std::abs(q[e]) < alpha * (1.0 - kappa);
        add_mask(std::move(mask));
      }
    }
    std::vector<TvCandidate> cands;
    for (const auto& mask : masks) {
      TvCandidate c;
      if (polisher.solve(mask, u, q, c)) cands.push_back(std::move(c));
    }
    std::sort(cands.begin(), cands.end(),
              [](const TvCandidate& a, const TvCandidate& b) { return a.objective < b.objective; });
    for (std::size_t i = 0; i < std::min<std::size_t>(cands.size(), 2); ++i) {
      const Vector p = subgradient_from_optimality(map, data, cands[i].u, alpha);
      Vector dual = q / alpha;
      const double d = alpha * subdifferential_distance(reg, cands[i].u, p, &dual, 0.5 * target / alpha);
      if (d <= target) {
        u = cands[i].u;
        best_defect = d;
        return true;
      }
      best_defect = std::min(best_defect, d);
    }
    return false;
  };

  if (try_polish(0)) return finish(map, data, reg, u, alpha, best_defect, target, 0, "primal_dual");
  constexpr int kCheckEvery = 50;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    q += sigma * reg.difference(ubar);
    q = q.cwiseMax(-alpha).cwiseMin(alpha);
    const Vector un = primal_prox(u - tau * reg.difference_adjoint(q), u);
    ubar = 2.0 * un - u;
    u = un;
    if (k % kCheckEvery == 0 || k == cfg.max_iters) {
      const Vector saved = u;
      if (try_polish(k)) return finish(map, data, reg, u, alpha, best_defect, target, k, "primal_dual");
      u = saved;
    }
  }
  fail("solve_primal_dual", best_defect, target, cfg.max_iters);
}

RegularizedSolution solve_variational(const LinearMap& map, const DataVector& data, double alpha,
                                      const Regularizer& reg, const SolverConfig& cfg) {
  switch (reg.kind()) {
    case RegularizerKind::quadratic: return solve_tikhonov_exact(map, data, alpha, cfg);
    case RegularizerKind::l1: return solve_fista(map, data, alpha, reg, cfg);
    case RegularizerKind::tv_aniso: return solve_primal_dual(map, data, alpha, reg, cfg);
  }
  throw UnsupportedOperation("solve_variational: unknown regularizer");
}

}  // namespace varreg
