#pragma once

#include <cstdint>
#include <limits>

#include "uffia/core.hpp"

UFFIA_NAMESPACE_BEGIN

/// xoshiro256** generator seeded through SplitMix64.
///
/// All distributions are implemented here rather than through <random> so that
/// a (seed, stream) pair produces the same bytes with every standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  /// Independent generator for sub-stream `stream` of `seed` (e.g. one per clip).
  static Rng stream(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Exponential with the given rate.
  double exponential(double rate);
  /// Poisson count (Knuth's product method).
  std::int64_t poisson(double mean);

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

UFFIA_NAMESPACE_END
