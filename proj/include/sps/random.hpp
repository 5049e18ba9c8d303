#pragma once

// Counter-based 64-bit generator used for every seeded draw in the library.
//
// The n-th raw output of a stream is splitmix64_finalize(key + n * 0x9E3779B97F4A7C15)
// with key = splitmix64_finalize(seed) and n = 1, 2, .... Normals come from the
// Box-Muller transform on pairs of uniforms, both outputs of a pair are used.
// The sequence depends only on the seed, never on the platform's <random>.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>

namespace sps {

inline constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for trial t of a run seeded with `seed`. The run seed is mixed before
/// the XOR so that nearby run seeds get disjoint trial sets (plain seed ^ t
/// maps seeds 1..127 onto nearly the same 128 trial seeds).
inline constexpr std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) noexcept {
  return splitmix64_finalize(seed) ^ trial;
}

class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t seed) noexcept : key_(splitmix64_finalize(seed)) {}

  std::uint64_t next_u64() noexcept { return splitmix64_finalize(key_ + kGolden * ++counter_); }

  /// Uniform in (0, 1].
  double uniform_open0() noexcept { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0. Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }

  /// Exp(1); Dirichlet(1,...,1) weights are normalised exponentials.
  double exponential() noexcept { return -std::log(uniform_open0()); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sps
