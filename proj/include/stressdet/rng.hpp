// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stressdet {

/// Mixes a seed with stream identifiers so that independent work items
/// (words, batches, epochs) draw from disjoint, reproducible streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

/// Box-Muller on explicit uniform draws. std::normal_distribution's draw
/// sequence is implementation-defined; this one is identical everywhere,
/// which the byte-level reproducibility contracts rely on.
inline double gaussian(std::mt19937_64& engine) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u1 = unit(engine);
  const double u2 = unit(engine);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace stressdet
