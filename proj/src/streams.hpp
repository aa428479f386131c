#pragma once

// Seed layout shared by the Monte Carlo estimators. Main-block realization r
// and its replica stream, the independent one-overlap block and the bootstrap
// each get their own counter-derived seed.

#include <cstddef>
#include <cstdint>

#include "gglab/rng.hpp"

namespace gglab::streams {

inline std::uint64_t realization(std::uint64_t seed, std::size_t r) { return derive_seed(seed, {0, r}); }
inline std::uint64_t replicas(std::uint64_t seed, std::size_t r) { return derive_seed(seed, {1, r}); }
inline std::uint64_t mu_realization(std::uint64_t seed, std::size_t r) { return derive_seed(seed, {2, r}); }
inline std::uint64_t mu_replicas(std::uint64_t seed, std::size_t r) { return derive_seed(seed, {3, r}); }
inline std::uint64_t bootstrap(std::uint64_t seed) { return derive_seed(seed, {4}); }

}  // namespace gglab::streams
