// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace chden {

/// Mixes a base seed with a stream index (splitmix64 finalizer). Used to give
/// every block of work its own independent, reproducible generator.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded pseudo-random source. Every stochastic operation in the library
/// takes one of these explicitly; nothing reads global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  /// Uniform integer on [lo, hi] (inclusive).
  int uniform_int(int lo, int hi);
  double normal();
  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace chden
