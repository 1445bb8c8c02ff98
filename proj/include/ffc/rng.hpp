#pragma once

// Reproducible random streams.
//
// Every trial draws from its own std::mt19937_64 engine. The engine seed for
// trial `i` of a campaign with master seed `S` is
//
//     splitmix64(splitmix64(S) + i)
//
// where splitmix64 is the finaliser of Steele, Lea & Flood's SplitMix64
// (golden-gamma increment, then the 30/27/31 xor-shift-multiply mix). Both
// the engine and the mixing function are fully specified, so streams are
// stable across compilers and standard libraries. The variate transforms
// below are written out rather than taken from <random> distributions, whose
// algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Core>

namespace ffc {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one variate per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Inverse-CDF draw of an index from non-negative weights summing to ~1.
  // Zero-weight entries are never returned.
  template <class Derived>
  int categorical(const Eigen::DenseBase<Derived>& weights) {
    const double total = static_cast<double>(weights.sum());
    const double target = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      const double w = static_cast<double>(weights(i));
      if (w <= 0.0) continue;
      acc += w;
      last_positive = static_cast<int>(i);
      if (target < acc) return last_positive;
    }
    return last_positive;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Rng derive_rng_stream(std::uint64_t master_seed, std::uint64_t trial_index) {
  return Rng(splitmix64(splitmix64(master_seed) + trial_index));
}

}  // namespace ffc
