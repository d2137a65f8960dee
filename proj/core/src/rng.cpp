#include "mrsynth/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mrsynth {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

double standard_normal(std::mt19937_64& eng) {
  const double u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<float> latent_from_seed(std::uint64_t seed, std::size_t dim, std::size_t count) {
  std::mt19937_64 eng(seed);
  std::vector<float> out(dim * count);
  for (auto& v : out) v = static_cast<float>(standard_normal(eng));
  return out;
}

}  // namespace mrsynth
