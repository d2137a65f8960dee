#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mrsynth {

// Portable random streams. std::mt19937_64 is bit-specified by the standard;
// the distributions below are written out here because the <random>
// distributions are implementation-defined.

/// SplitMix64 finalizer, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Uniform double in [0, 1) using the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& eng);

/// Uniform integer in [0, n) by rejection (unbiased).
std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n);

/// Standard normal via Box-Muller: u1, u2 = two uniform01 draws,
/// z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2). One engine pair per sample.
double standard_normal(std::mt19937_64& eng);

/// Latent vectors for the inference service and grid rendering: `count`
/// consecutive vectors of length `dim` drawn with standard_normal from
/// mt19937_64(seed). Row-major, count * dim values.
std::vector<float> latent_from_seed(std::uint64_t seed, std::size_t dim, std::size_t count = 1);

/// Fisher-Yates with uniform_index.
template <typename T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace mrsynth
