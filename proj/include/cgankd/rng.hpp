#pragma once

// Portable counter-based pseudo random numbers.
//
// The generator is SplitMix64 (Steele, Lea, Flood 2014): state advances by the
// golden-ratio increment 0x9E3779B97F4A7C15 and every output is the state run
// through the variant-13 finalizer (shifts 30/27/31, multipliers
// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). All derived distributions are
// implemented here rather than taken from <random>, whose distribution
// algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace cgankd {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a over the bytes of a string.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed of a named sub-stream, e.g. derive_seed(master, "teacher.train").
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) noexcept {
  return mix64(mix64(master + kGoldenGamma) ^ fnv1a(stage));
}

/// Seed of the index-th element of a stream (used for prefix-stable sampling).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master ^ 0xD1B54A32D192ED03ULL) + (index + 1) * kGoldenGamma);
}

class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next_u64() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_pos() noexcept { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) by rejection on the top of the range; n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal by the Box-Muller transform; one value per two uniforms.
  double normal() noexcept {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Rademacher sign, +1 or -1 with equal probability.
  int sign() noexcept { return (next_u64() >> 63) ? 1 : -1; }

  template <class T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace cgankd
