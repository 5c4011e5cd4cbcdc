#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace pdpfi {

// splitmix64 finalizer; full-period, good avalanche.
inline std::uint64_t split_mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation: the stream for work unit `index` depends
/// only on (seed, index), never on evaluation order or thread count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return split_mix64(split_mix64(seed) ^ split_mix64(~index));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

/// mt19937_64 with hand-rolled output transforms. The raw engine sequence is
/// pinned by the standard; std::*_distribution is not, so uniforms, bounded
/// ints and normals are produced here to keep results identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n >= 1. Masked rejection, bias-free.
  std::size_t bounded(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t range = n;
    std::uint64_t mask = ~std::uint64_t{0};
    mask >>= __builtin_clzll(range | 1);
    std::uint64_t x;
    do {
      x = engine_() & mask;
    } while (x >= range);
    return static_cast<std::size_t>(x);
  }

  /// Box-Muller; stateless (no cached spare) so call sites stay reproducible.
  double normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// In-place Fisher-Yates driven by `rng`.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = rng.bounded(i);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace pdpfi
