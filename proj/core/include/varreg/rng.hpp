#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "varreg/core.hpp"

namespace varreg {

/// Derives an independent seed for a named substream ("design", "noise",
/// "init", "instance", ...) and an optional replicate index.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream,
                             std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0)
      : engine_(substream_seed(seed, stream, index)) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  Index uniform_index(Index n) {
    return std::uniform_int_distribution<Index>(0, n - 1)(engine_);
  }
  Vector gaussian_vector(Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace varreg
