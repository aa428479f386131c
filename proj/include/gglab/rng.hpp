#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>

namespace gglab {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based stream splitting: the seed of stream (master, c_1, ..., c_k)
/// depends only on its coordinates, never on the order streams are created.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::span<const std::uint64_t> path) noexcept {
  std::uint64_t h = splitmix64(master ^ 0x5851f42d4c957f2dULL);
  for (std::uint64_t c : path) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  return derive_seed(master, std::span<const std::uint64_t>(path.begin(), path.size()));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

__extension__ using uint128 = unsigned __int128;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // multiply-shift; bias is below 2^-64 * n, irrelevant at our sizes
  return static_cast<std::size_t>((static_cast<uint128>(rng()) * static_cast<uint128>(n)) >> 64);
}

inline double standard_exponential(Rng& rng) { return -std::log1p(-uniform01(rng)); }

// Box-Muller, one variate per call so streams stay position-stable.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace gglab
