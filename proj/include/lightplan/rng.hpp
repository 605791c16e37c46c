#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace lightplan {

// splitmix64; the de-facto standard 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline double to_unit_double(std::uint64_t u) {
  // 53 high bits -> [0,1)
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

/// Small deterministic generator. Sequential draws advance a splitmix64
/// counter; reruns with the same seed replay the exact stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x5bf0363546e17f61ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1).
  double uniform() { return to_unit_double(next_u64()); }

  /// Uniform in [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0,n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // multiply-shift; bias is < 1/2^64, irrelevant at our scales
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (caches the spare draw).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// First k entries of a seeded partial Fisher-Yates shuffle of [0,n).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Gaussian noise addressed by (seed, image, pixel) rather than by draw
/// order, so parallel or reordered rendering reproduces the same field.
inline double indexed_gaussian(std::uint64_t seed, std::uint64_t image_index,
                               std::uint64_t pixel_index) {
  const std::uint64_t h = hash_combine(hash_combine(seed, image_index), pixel_index);
  double u1 = to_unit_double(mix64(h ^ 0xa0761d6478bd642fULL));
  const double u2 = to_unit_double(mix64(h ^ 0xe7037ed1a0b428dbULL));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace lightplan
