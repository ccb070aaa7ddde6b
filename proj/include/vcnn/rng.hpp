#ifndef VCNN_RNG_HPP
#define VCNN_RNG_HPP

#include <cstdint>
#include <random>

namespace vcnn {

/// Seeded uniform generator. mt19937_64 has a fully specified output
/// sequence, so results are reproducible across platforms and builds;
/// the [0,1) mapping avoids std::uniform_real_distribution, whose output
/// is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next_u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace vcnn

#endif  // VCNN_RNG_HPP
