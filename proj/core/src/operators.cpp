#include "varreg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/QR>

#include "varreg/rng.hpp"

namespace varreg {

LinearMap make_identity(Index n) {
  if (n <= 0) throw DimensionError("make_identity: n must be positive");
  return LinearMap(
      n, n, [](const Vector& u) -> Vector { return u; },
      [](const Vector& v) -> Vector { return v; }, "identity");
}

LinearMap make_dense(DenseMatrix matrix) { return LinearMap::from_dense(std::move(matrix), "dense"); }

LinearMap make_convolution(std::span<const double> kernel, Index n) {
  if (n <= 0) throw DimensionError("make_convolution: n must be positive");
  if (kernel.empty()) throw std::invalid_argument("make_convolution: empty kernel");
  const auto len = static_cast<Index>(kernel.size());
  if (len > n) throw std::invalid_argument("make_convolution: kernel longer than signal");
  const Index centre = len / 2;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n * len));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < len; ++j) {
      // y[i] += k[j] * u[i - (j - centre)]
      const Index col = ((i - (j - centre)) % n + n) % n;
      trips.emplace_back(i, col, kernel[static_cast<std::size_t>(j)]);
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return LinearMap::from_sparse(std::move(m), "convolution");
}

LinearMap make_spectral(std::span<const double> singular_values, std::uint64_t seed) {
  const auto m = static_cast<Index>(singular_values.size());
  if (m == 0) throw DimensionError("make_spectral: empty spectrum");
  Rng rng(seed, "spectral");
  auto random_orthogonal = [&rng, m]() {
    DenseMatrix g(m, m);
    for (Index c = 0; c < m; ++c) {
      for (Index r = 0; r < m; ++r) g(r, c) = rng.gaussian();
    }
    Eigen::HouseholderQR<DenseMatrix> qr(g);
    return DenseMatrix(qr.householderQ());
  };
  const DenseMatrix q1 = random_orthogonal();
  const DenseMatrix q2 = random_orthogonal();
  Vector s(m);
  for (Index i = 0; i < m; ++i) s[i] = singular_values[static_cast<std::size_t>(i)];
  return LinearMap::from_dense(q1 * s.asDiagonal() * q2.transpose(), "spectral");
}

RadonGeometry RadonGeometry::uniform(int grid_n, int n_angles, int n_offsets) {
  if (n_angles < 1 || n_offsets < 1) {
    throw std::invalid_argument("RadonGeometry::uniform: need at least one angle and offset");
  }
  RadonGeometry g;
  g.grid_n = grid_n;
  for (int a = 0; a < n_angles; ++a) g.angles.push_back(std::numbers::pi * a / n_angles);
  const double cell = 2.0 * kMaxOffset / n_offsets;
  for (int o = 0; o < n_offsets; ++o) g.offsets.push_back(-kMaxOffset + (o + 0.5) * cell);
  g.validate();
  return g;
}

void RadonGeometry::validate() const {
  if (grid_n < 1) throw std::invalid_argument("RadonGeometry: grid_n must be positive");
  if (angles.empty() || offsets.empty()) {
    throw std::invalid_argument("RadonGeometry: angles and offsets must be non-empty");
  }
  for (double a : angles) {
    if (!(a >= 0.0 && a < std::numbers::pi)) {
      throw std::invalid_argument("RadonGeometry: angle outside [0, pi)");
    }
  }
  for (double s : offsets) {
    if (!(std::abs(s) <= kMaxOffset)) {
      throw std::invalid_argument("RadonGeometry: offset outside [-sqrt2, sqrt2]");
    }
  }
}

namespace {

constexpr double kParallel = 1e-12;

// Exact intersection lengths of one line with the pixel grid.
void trace_ray(int n, double angle, double offset, Index row,
               std::vector<Eigen::Triplet<double>>& trips) {
  const double h = 2.0 / n;
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  const double px = offset * cs;
  const double py = offset * sn;
  const double dx = -sn;
  const double dy = cs;

  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d) {
    if (std::abs(d) < kParallel) {
      if (std::abs(p) >= 1.0) t1 = t0;  // parallel and outside
      return;
    }
    double a = (-1.0 - p) / d;
    double b = (1.0 - p) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  clip(px, dx);
  clip(py, dy);
  if (!(t1 > t0)) return;

  std::vector<double> ts{t0, t1};
  auto crossings = [&](double p, double d) {
    if (std::abs(d) < kParallel) return;
    for (int k = 1; k < n; ++k) {
      const double t = (-1.0 + k * h - p) / d;
      if (t > t0 && t < t1) ts.push_back(t);
    }
  };
  crossings(px, dx);
  crossings(py, dy);
  std::sort(ts.begin(), ts.end());

  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double len = ts[i + 1] - ts[i];
    if (len <= 0.0) continue;
    const double mid = 0.5 * (ts[i] + ts[i + 1]);
    const int col = std::clamp(static_cast<int>(std::floor((px + mid * dx + 1.0) / h)), 0, n - 1);
    const int prow = std::clamp(static_cast<int>(std::floor((py + mid * dy + 1.0) / h)), 0, n - 1);
    trips.emplace_back(row, static_cast<Index>(prow) * n + col, len);
  }
}

}  // namespace

LinearMap make_radon(const RadonGeometry& geom) {
  geom.validate();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(geom.out_dim()) * 2 * static_cast<std::size_t>(geom.grid_n));
  for (std::size_t a = 0; a < geom.angles.size(); ++a) {
    for (std::size_t o = 0; o < geom.offsets.size(); ++o) {
      trace_ray(geom.grid_n, geom.angles[a], geom.offsets[o], geom.row(a, o), trips);
    }
  }
  SparseMatrix m(geom.out_dim(), geom.in_dim());
  m.setFromTriplets(trips.begin(), trips.end());
  return LinearMap::from_sparse(std::move(m), "radon");
}

Vector disk_phantom(int grid_n, double radius, double value) {
  if (grid_n < 1) throw std::invalid_argument("disk_phantom: grid_n must be positive");
  const double h = 2.0 / grid_n;
  Vector img = Vector::Zero(static_cast<Index>(grid_n) * grid_n);
  for (int r = 0; r < grid_n; ++r) {
    const double y = -1.0 + (r + 0.5) * h;
    for (int c = 0; c < grid_n; ++c) {
      const double x = -1.0 + (c + 0.5) * h;
      if (x * x + y * y <= radius * radius) img[static_cast<Index>(r) * grid_n + c] = value;
    }
  }
  return img;
}

SampledDesign SampledDesign::full(Index m) {
  if (m < 1) throw DimensionError("SampledDesign::full: m must be positive");
  SampledDesign d;
  d.sample_rows.resize(static_cast<std::size_t>(m));
  std::iota(d.sample_rows.begin(), d.sample_rows.end(), Index{0});
  d.weights.assign(static_cast<std::size_t>(m), 1.0 / static_cast<double>(m));
  d.noise = DataVector::Zero(m);
  return d;
}

void SampledDesign::validate() const {
  if (sample_rows.empty()) throw std::invalid_argument("SampledDesign: N must be >= 1");
  if (weights.size() != sample_rows.size()) {
    throw DimensionError("SampledDesign: weights and rows differ in length");
  }
  if (noise.size() != 0 && noise.size() != size()) {
    throw DimensionError("SampledDesign: noise and rows differ in length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("SampledDesign: bad weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("SampledDesign: weights must sum to 1");
}

SampledDesign draw_design(Index base_out_dim, Index n, double noise_sigma, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("draw_design: N must be >= 1");
  if (base_out_dim < 1) throw DimensionError("draw_design: base operator has no rows");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("draw_design: noise_sigma must be >= 0");
  SampledDesign d;
  d.seed = seed;
  Rng rows(seed, "design");
  d.sample_rows.resize(static_cast<std::size_t>(n));
  for (auto& r : d.sample_rows) r = rows.uniform_index(base_out_dim);
  d.weights.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  d.noise = DataVector::Zero(n);
  if (noise_sigma > 0.0) {
    Rng noise(seed, "noise");
    for (Index i = 0; i < n; ++i) d.noise[i] = noise_sigma * noise.gaussian();
  }
  return d;
}

LinearMap make_sampled(const LinearMap& base, const SampledDesign& design) {
  design.validate();
  const Index n = design.size();
  for (Index r : design.sample_rows) {
    if (r < 0 || r >= base.out_dim()) {
      throw std::out_of_range("make_sampled: row index " + std::to_string(r) + " outside [0, " +
                              std::to_string(base.out_dim()) + ")");
    }
  }
  Vector scale(n);
  for (Index i = 0; i < n; ++i) scale[i] = std::sqrt(design.weights[static_cast<std::size_t>(i)]);
  const std::string name = "sampled(" + base.name() + ")";

  if (const DenseMatrix* dense = base.dense_matrix()) {
    DenseMatrix m(n, base.in_dim());
    for (Index i = 0; i < n; ++i) {
      m.row(i) = scale[i] * dense->row(design.sample_rows[static_cast<std::size_t>(i)]);
    }
    return LinearMap::from_dense(std::move(m), name);
  }
  if (const SparseMatrix* sparse = base.sparse_matrix()) {
    std::vector<Eigen::Triplet<double>> trips;
    for (Index i = 0; i < n; ++i) {
      const Index src = design.sample_rows[static_cast<std::size_t>(i)];
      for (SparseMatrix::InnerIterator it(*sparse, src); it; ++it) {
        trips.emplace_back(i, it.col(), scale[i] * it.value());
      }
    }
    SparseMatrix m(n, base.in_dim());
    m.setFromTriplets(trips.begin(), trips.end());
    return LinearMap::from_sparse(std::move(m), name);
  }

  auto rows = std::make_shared<const std::vector<Index>>(design.sample_rows);
  const Index base_out = base.out_dim();
  return LinearMap(
      base.in_dim(), n,
      [base, rows, scale](const Vector& u) -> Vector {
        const Vector full = base.apply(u);
        Vector out(scale.size());
        for (Index i = 0; i < out.size(); ++i) {
          out[i] = scale[i] * full[(*rows)[static_cast<std::size_t>(i)]];
        }
        return out;
      },
      [base, rows, scale, base_out](const Vector& z) -> Vector {
        Vector full = Vector::Zero(base_out);
        for (Index i = 0; i < z.size(); ++i) {
          full[(*rows)[static_cast<std::size_t>(i)]] += scale[i] * z[i];
        }
        return base.adjoint(full);
      },
      name);
}

}  // namespace varreg
