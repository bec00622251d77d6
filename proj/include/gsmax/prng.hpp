#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace gsmax {

/// Deterministic generator: xoshiro256** seeded through splitmix64.
///
/// Seeding: the 64-bit seed is loaded into the splitmix64 register and the
/// four 64-bit words of the xoshiro core are the first four splitmix64
/// outputs, where one splitmix64 step is
///
///   x += 0x9e3779b97f4a7c15
///   z  = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9
///   z  = (z ^ (z >> 27)) * 0x94d049bb133111eb
///   out = z ^ (z >> 31)
///
/// One xoshiro256** step returns rotl(s1 * 5, 7) * 9 and then advances
///
///   t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
///   s3 = rotl(s3, 45)
///
/// Doubles in [0,1) take the top 53 bits of a raw output times 2^-53.
/// Everything is integer arithmetic, so streams are identical on every
/// platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform01();

  /// Uniform in [lo, hi). Throws RangeError unless lo < hi.
  double uniform(double lo, double hi);

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  const std::array<std::uint64_t, 4>& core() const { return s_; }
  std::uint64_t seed_register() const { return seed_register_; }

  friend bool operator==(const Prng&, const Prng&) = default;

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_register_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Fisher-Yates shuffle of [first, last) driven by Prng::below, so the
/// permutation is reproducible across standard libraries.
template <typename It>
void shuffle(It first, It last, Prng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    std::swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
  }
}

}  // namespace gsmax
