#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace tinbc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent 64-bit seed for substream `stream` of `seed`.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Counter-based source of circular complex Gaussian samples, CN(0,1).
/// Sample j depends only on (seed, j), so any partition of the index range
/// across workers reproduces the same values.
class ComplexNoise {
public:
  explicit ComplexNoise(std::uint64_t seed) : key_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  std::complex<double> operator()(std::uint64_t index) const noexcept {
    const std::uint64_t a = splitmix64(key_ ^ (2 * index));
    const std::uint64_t b = splitmix64(key_ ^ (2 * index + 1));
    // (0, 1] keeps the logarithm finite.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(t), r * std::sin(t)};
  }

private:
  std::uint64_t key_;
};

}  // namespace tinbc
