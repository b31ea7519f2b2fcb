#pragma once

// Deterministic Gaussian sampling. std::mt19937_64 has a fully specified
// output sequence, and the Box-Muller transform below uses only arithmetic
// with fixed evaluation order, so a given seed yields the same stream of
// normals on every platform (std::normal_distribution does not guarantee
// this across standard-library implementations).

#include <cmath>
#include <cstdint>
#include <random>

namespace glucokin {

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  // Standard normal deviate.
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1], u2 in [0, 1): 53-bit mantissa draws.
    const double u1 =
        (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace glucokin
