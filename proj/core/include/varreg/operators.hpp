#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "varreg/core.hpp"

namespace varreg {

LinearMap make_identity(Index n);

/// Matrix-vector product; adjoint is the transpose product.
LinearMap make_dense(DenseMatrix matrix);

/// Circular convolution on R^n with a centred kernel: kernel entry j acts at
/// shift j - len/2. The adjoint is the correlation with the same kernel.
LinearMap make_convolution(std::span<const double> kernel, Index n);

/// Dense operator Q1 diag(s) Q2^T with seeded random orthogonal factors.
/// Useful for ill-posed model problems with a prescribed spectrum.
LinearMap make_spectral(std::span<const double> singular_values, std::uint64_t seed);

/// Parallel-beam geometry on the square [-1,1]^2 sampled as grid_n x grid_n
/// pixels. Lines are {x : x.(cos a, sin a) = s} with a in [0, pi) and signed
/// offset s in [-sqrt2, sqrt2].
struct RadonGeometry {
  static constexpr double kMaxOffset = std::numbers::sqrt2;

  int grid_n = 0;
  std::vector<double> angles;
  std::vector<double> offsets;

  /// Angles k*pi/n_angles, offsets at the midpoints of n_offsets equal cells
  /// of [-sqrt2, sqrt2].
  static RadonGeometry uniform(int grid_n, int n_angles, int n_offsets);

  /// Throws std::invalid_argument when the geometry is malformed.
  void validate() const;
  Index in_dim() const { return static_cast<Index>(grid_n) * grid_n; }
  Index out_dim() const { return static_cast<Index>(angles.size() * offsets.size()); }
  /// Row of (angle index, offset index); rows are angle-major.
  Index row(std::size_t angle, std::size_t offset) const {
    return static_cast<Index>(angle * offsets.size() + offset);
  }
};

/// Ray-driven discrete Radon transform: each row holds the exact intersection
/// lengths of its line with the pixels it crosses. Images are row-major with
/// row index along y and column index along x. Stored sparse, so the adjoint
/// (backprojection) is the exact transpose.
LinearMap make_radon(const RadonGeometry& geom);

/// Pixel image of a centred disk with the given radius (value inside, 0
/// outside), decided at pixel centres.
Vector disk_phantom(int grid_n, double radius, double value = 1.0);

/// Empirical design: the drawn rows of a base operator with their weights
/// and the realised additive noise.
struct SampledDesign {
  std::vector<Index> sample_rows;
  std::vector<double> weights;
  DataVector noise;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(sample_rows.size()); }
  /// Every row of an m-row operator once, weights 1/m, no noise.
  static SampledDesign full(Index m);
  void validate() const;
};

/// i.i.d. uniform rows, weights 1/N and Gaussian noise with standard
/// deviation `noise_sigma`, all determined by `seed`.
SampledDesign draw_design(Index base_out_dim, Index n, double noise_sigma, std::uint64_t seed);

/// Output i is sqrt(weight_i) times row sample_rows[i] of `base`, so
/// |F~u - v~|^2 is the weighted empirical mean of squared residuals.
LinearMap make_sampled(const LinearMap& base, const SampledDesign& design);

}  // namespace varreg
