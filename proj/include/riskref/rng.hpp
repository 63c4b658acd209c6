#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

namespace riskref {

/// SplitMix64 (Steele, Lea & Flood 2014; the seeding generator of the
/// xoshiro family). Every random draw in the library goes through this type so
/// streams are identical on every platform. Reference vector, seed 0:
///   0xe220a8397b1dcdaf, 0x6e789e6aa1b965f4, 0x06c45d188009454f
///
/// Derived draws:
///   uniform()      (x >> 11) * 2^-53, in [0, 1)
///   index(n)       high 64 bits of the 128-bit product x * n
///   normal()       Box-Muller cosine branch, u1 = 1 - uniform() so log(u1) is finite
///   child(k)       SplitMix64 seeded with the k-th (0-based) output of a fresh
///                  stream on the same seed
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::size_t index(std::size_t n) noexcept {
    const auto product = static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n);
    return static_cast<std::size_t>(product >> 64);
  }

  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Independent child stream `k`, derived from the seed alone (not from the
  /// current position), so substreams can be consumed in any order.
  static Rng child(std::uint64_t seed, std::uint64_t k) noexcept {
    Rng r(seed + k * 0x9e3779b97f4a7c15ULL);
    return Rng(r.next());
  }

 private:
  std::uint64_t state_;
};

}  // namespace riskref
