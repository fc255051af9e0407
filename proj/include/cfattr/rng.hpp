#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace cfattr {

// Self-contained xoshiro256++ generator. Standard-library distributions and
// std::shuffle are implementation-defined, which would break the byte-identical
// reproducibility contract across toolchains; every sampling path in the
// project goes through this type instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 seeding
    std::uint64_t x = seed;
    for (auto& si : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      si = z ^ (z >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller (uses two draws per pair, caches one).
  double next_gaussian();

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Decorrelated child stream, e.g. one per Monte-Carlo permutation. The
  // mapping depends only on (parent seed, index), so work can be partitioned
  // across workers in any order without changing results.
  static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed ^ (index * 0x9e3779b97f4a7c15ULL + 0x61c8864680b583ebULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  bool has_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

inline double Rng::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  double u1, u2;
  do {
    u1 = next_double();
  } while (u1 <= 0.0);
  u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double two_pi = 6.283185307179586476925286766559;
  cached_gaussian_ = r * std::sin(two_pi * u2);
  has_cached_gaussian_ = true;
  return r * std::cos(two_pi * u2);
}

}  // namespace cfattr
