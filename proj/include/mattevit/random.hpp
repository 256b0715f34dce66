#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mattevit/tensor.hpp"

namespace mattevit {

/// Seeded generator with platform-independent distributions (the standard
/// library's distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent seed for a named stream (FNV-1a over the name,
/// mixed with the base seed).
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);

Tensor random_normal(const Shape& shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
Tensor random_uniform(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad = false);

}  // namespace mattevit
