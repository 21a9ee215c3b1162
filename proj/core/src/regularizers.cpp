#include "varreg/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "varreg/rng.hpp"

namespace varreg {

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::quadratic: return "quadratic";
    case RegularizerKind::l1: return "l1";
    case RegularizerKind::tv_aniso: return "tv_aniso";
  }
  return "unknown";
}

RegularizerKind parse_regularizer_kind(std::string_view text) {
  if (text == "quadratic" || text == "tikhonov") return RegularizerKind::quadratic;
  if (text == "l1") return RegularizerKind::l1;
  if (text == "tv" || text == "tv_aniso") return RegularizerKind::tv_aniso;
  throw std::invalid_argument("unknown regularizer '" + std::string(text) + "'");
}

Regularizer Regularizer::quadratic() { return Regularizer(RegularizerKind::quadratic); }
Regularizer Regularizer::l1() { return Regularizer(RegularizerKind::l1); }

namespace {

double degree_bound(const std::vector<Edge>& edges, Index n) {
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (const auto& e : edges) {
    ++degree[static_cast<std::size_t>(e.from)];
    ++degree[static_cast<std::size_t>(e.to)];
  }
  const int max_deg = degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
  return 2.0 * std::max(max_deg, 1);
}

}  // namespace

Regularizer Regularizer::tv_1d(Index n) {
  if (n < 1) throw DimensionError("tv_1d: n must be positive");
  Regularizer r(RegularizerKind::tv_aniso);
  auto edges = std::make_shared<std::vector<Edge>>();
  for (Index i = 0; i + 1 < n; ++i) edges->push_back({i, i + 1});
  r.dim_ = n;
  r.path_ = true;
  r.norm_sq_bound_ = degree_bound(*edges, n);
  r.edges_ = std::move(edges);
  return r;
}

Regularizer Regularizer::tv_2d(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw DimensionError("tv_2d: rows and cols must be positive");
  if (rows == 1 || cols == 1) return tv_1d(rows * cols);
  Regularizer r(RegularizerKind::tv_aniso);
  auto edges = std::make_shared<std::vector<Edge>>();
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j + 1 < cols; ++j) edges->push_back({i * cols + j, i * cols + j + 1});
  }
  for (Index i = 0; i + 1 < rows; ++i) {
    for (Index j = 0; j < cols; ++j) edges->push_back({i * cols + j, (i + 1) * cols + j});
  }
  r.dim_ = rows * cols;
  r.norm_sq_bound_ = degree_bound(*edges, rows * cols);
  r.edges_ = std::move(edges);
  return r;
}

void Regularizer::check_dim(const Vector& u) const {
  if (dim_ != 0 && u.size() != dim_) {
    throw DimensionError(std::string(name()) + ": expected " + std::to_string(dim_) +
                         " entries, got " + std::to_string(u.size()));
  }
}

std::span<const Edge> Regularizer::edges() const noexcept {
  if (!edges_) return {};
  return {edges_->data(), edges_->size()};
}

Vector Regularizer::difference(const Vector& u) const {
  check_dim(u);
  const auto es = edges();
  Vector du(static_cast<Index>(es.size()));
  for (std::size_t e = 0; e < es.size(); ++e) du[static_cast<Index>(e)] = u[es[e].to] - u[es[e].from];
  return du;
}

Vector Regularizer::difference_adjoint(const Vector& q) const {
  const auto es = edges();
  if (q.size() != static_cast<Index>(es.size())) throw DimensionError("difference_adjoint: size mismatch");
  Vector out = Vector::Zero(dim_);
  for (std::size_t e = 0; e < es.size(); ++e) {
    const double qe = q[static_cast<Index>(e)];
    out[es[e].to] += qe;
    out[es[e].from] -= qe;
  }
  return out;
}

double value(const Regularizer& reg, const Vector& u) {
  switch (reg.kind()) {
    case RegularizerKind::quadratic: return 0.5 * u.squaredNorm();
    case RegularizerKind::l1: return u.lpNorm<1>();
    case RegularizerKind::tv_aniso: return reg.difference(u).lpNorm<1>();
  }
  return 0.0;
}

Vector prox(const Regularizer& reg, double tau, const Vector& x) {
  if (!(tau > 0.0)) throw std::invalid_argument("prox: tau must be positive");
  switch (reg.kind()) {
    case RegularizerKind::quadratic: return x / (1.0 + tau);
    case RegularizerKind::l1: {
      Vector out(x.size());
      for (Index i = 0; i < x.size(); ++i) {
        const double mag = std::abs(x[i]) - tau;
        out[i] = mag > 0.0 ? std::copysign(mag, x[i]) : 0.0;
      }
      return out;
    }
    case RegularizerKind::tv_aniso:
      throw UnsupportedOperation("prox: no closed-form proximal map for tv_aniso");
  }
  return x;
}

Vector subgradient_from_optimality(const LinearMap& map, const DataVector& data,
                                   const SolutionVector& u, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("subgradient_from_optimality: alpha must be positive");
  return map.adjoint(data - map.apply(u)) / alpha;
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double l1_distance(const Vector& u, const Vector& p) {
  double sq = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double d = u[i] != 0.0 ? p[i] - sign(u[i]) : std::max(std::abs(p[i]) - 1.0, 0.0);
    sq += d * d;
  }
  return std::sqrt(sq);
}

// Box constraints of the TV dual field: fixed sign on jump edges, [-1,1] on
// flat edges.
std::vector<signed char> jump_signs(const Regularizer& reg, const Vector& u) {
  const Vector du = reg.difference(u);
  std::vector<signed char> s(static_cast<std::size_t>(du.size()));
  for (Index e = 0; e < du.size(); ++e) s[static_cast<std::size_t>(e)] = static_cast<signed char>(sign(du[e]));
  return s;
}

void project_box(Vector& q, const std::vector<signed char>& s) {
  for (Index e = 0; e < q.size(); ++e) {
    const signed char se = s[static_cast<std::size_t>(e)];
    q[e] = se != 0 ? static_cast<double>(se) : std::clamp(q[e], -1.0, 1.0);
  }
}

double tv_distance(const Regularizer& reg, const Vector& u, const Vector& p, Vector* hint,
                   double target) {
  const Index m = reg.edge_count();
  if (m == 0) {
    if (hint) hint->resize(0);
    return p.norm();
  }
  const auto s = jump_signs(reg, u);
  auto residual = [&](const Vector& q) { return (reg.difference_adjoint(q) - p).norm(); };

  Vector q = (hint && hint->size() == m) ? *hint : Vector::Zero(m);
  project_box(q, s);
  double best = residual(q);
  Vector best_q = q;

  if (reg.is_path()) {
    // Unconstrained least-squares dual on a path: q_i = -sum_{j<=i} (p_j - mean p).
    const double mean = p.mean();
    Vector q_ls(m);
    double acc = 0.0;
    for (Index i = 0; i < m; ++i) {
      acc += p[i] - mean;
      q_ls[i] = -acc;
    }
    project_box(q_ls, s);
    const double r = residual(q_ls);
    if (r < best) {
      best = r;
      best_q = q_ls;
    }
  }

  const double floor = std::max(target, 1e-14 * (1.0 + p.norm()));
  if (best > floor) {
    const double step = 1.0 / reg.difference_norm_sq_bound();
    Vector x = best_q;
    Vector y = x;
    double fx = best;
    double t = 1.0;
    double checkpoint = best;
    constexpr int kMaxIter = 20000;
    constexpr int kWindow = 2000;
    for (int k = 0; k < kMaxIter && best > floor; ++k) {
      if (k > 0 && k % kWindow == 0) {
        // Stagnation: the residual has converged to a positive value.
        if (best > (1.0 - 1e-4) * checkpoint) break;
        checkpoint = best;
      }
      Vector next = y - step * reg.difference(reg.difference_adjoint(y) - p);
      project_box(next, s);
      const double fn = residual(next);
      if (fn > fx && t > 1.0) {
        // Momentum overshoot: restart from the current iterate.
        y = x;
        t = 1.0;
        continue;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / t_next) * (next - x);
      x = std::move(next);
      fx = fn;
      t = t_next;
      if (fx < best) {
        best = fx;
        best_q = x;
      }
    }
  }
  if (hint) *hint = best_q;
  return best;
}

}  // namespace

double subdifferential_distance(const Regularizer& reg, const Vector& u, const Vector& p,
                                Vector* dual_hint, double target) {
  reg.check_dim(u);
  if (u.size() != p.size()) throw DimensionError("subdifferential_distance: size mismatch");
  switch (reg.kind()) {
    case RegularizerKind::quadratic: return (p - u).norm();
    case RegularizerKind::l1: return l1_distance(u, p);
    case RegularizerKind::tv_aniso: return tv_distance(reg, u, p, dual_hint, target);
  }
  return 0.0;
}

SubgradientCheck is_subgradient(const Regularizer& reg, const Vector& u, const Vector& p, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("is_subgradient: tol must be >= 0");
  SubgradientCheck out;
  out.violation = subdifferential_distance(reg, u, p, nullptr, 0.01 * tol);

  // Randomised check of J(w) >= J(u) + <p, w - u>, normalised by |w - u|.
  Rng rng(0x5eedULL, "subgradient-sampling");
  const double ju = value(reg, u);
  const double scale = (1.0 + u.norm()) / std::sqrt(static_cast<double>(std::max<Index>(u.size(), 1)));
  static constexpr double kRadii[] = {1e-3, 1e-1, 1.0, 10.0};
  for (int trial = 0; trial < 100; ++trial) {
    const Vector d = kRadii[trial % 4] * scale * rng.gaussian_vector(u.size());
    const double dn = d.norm();
    if (dn == 0.0) continue;
    const Vector w = u + d;
    const double jw = value(reg, w);
    const double lin = inner(p, d);
    const double gap = jw - ju - lin;
    const double roundoff = 1e-14 * (std::abs(jw) + std::abs(ju) + std::abs(lin));
    out.violation = std::max(out.violation, std::max(0.0, -gap - roundoff) / dn);
  }
  out.member = out.violation <= tol;
  return out;
}

namespace {

void require_member(const Regularizer& reg, const Vector& u, const Vector& p, double tol,
                    const char* who) {
  const auto check = is_subgradient(reg, u, p, tol);
  if (!check.member) {
    throw MembershipError(std::string(who) + ": p is not a subgradient (violation " +
                              std::to_string(check.violation) + ")",
                          check.violation);
  }
}

double clamp_distance(double d, double scale, double slack, const char* who) {
  if (d < -1e-8 * scale - slack) {
    throw MembershipError(std::string(who) + ": negative Bregman distance " + std::to_string(d), -d);
  }
  return std::max(d, 0.0);
}

}  // namespace

double bregman_distance(const Regularizer& reg, const Vector& w, const Vector& u, const Vector& p,
                        double tol) {
  if (w.size() != u.size() || p.size() != u.size()) throw DimensionError("bregman_distance: size mismatch");
  require_member(reg, u, p, tol, "bregman_distance");
  const double jw = value(reg, w);
  const double ju = value(reg, u);
  const Vector diff = w - u;
  const double lin = inner(p, diff);
  const double d = jw - ju - lin;
  const double scale = 1.0 + std::abs(jw) + std::abs(ju) + std::abs(lin);
  return clamp_distance(d, scale, tol * diff.norm(), "bregman_distance");
}

double symmetric_bregman(const Regularizer& reg, const Vector& w, const Vector& u, const Vector& pw,
                         const Vector& pu, double tol) {
  if (w.size() != u.size() || pw.size() != u.size() || pu.size() != u.size()) {
    throw DimensionError("symmetric_bregman: size mismatch");
  }
  require_member(reg, w, pw, tol, "symmetric_bregman");
  require_member(reg, u, pu, tol, "symmetric_bregman");
  const Vector diff = w - u;
  const double d = inner(pw - pu, diff);
  const double scale = 1.0 + std::abs(inner(pw, diff)) + std::abs(inner(pu, diff));
  return clamp_distance(d, scale, 2.0 * tol * diff.norm(), "symmetric_bregman");
}

}  // namespace varreg
