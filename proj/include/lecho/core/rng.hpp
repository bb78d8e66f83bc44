#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "lecho/core/point.hpp"

namespace lecho {

/// Substream tags. Part of the on-disk reproducibility contract: never renumber.
enum class StreamTag : std::uint64_t {
  noise = 1,
  initial_condition = 2,
  scatterers = 3,
  orbit = 4,
  pair = 5,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the substream (realization_index, tag) under master_seed.
///
///   base = splitmix64(master_seed XOR splitmix64(tag))
///   seed = splitmix64(base + realization_index * 0xD1B54A32D192ED03)
///
/// For fixed (master_seed, tag) the map index -> seed is a bijection of the
/// 64-bit integers (odd multiplier, bijective finalizer), so distinct
/// realizations never share a seed.
inline constexpr std::uint64_t seed_for(std::uint64_t master_seed, std::uint64_t realization_index,
                                        StreamTag tag) noexcept {
  const std::uint64_t base = splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(tag)));
  return splitmix64(base + realization_index * 0xD1B54A32D192ED03ULL);
}

/// mt19937_64 with portable uniform and normal deviates (std distributions are
/// implementation-defined, which would break cross-platform reproducibility).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = two_pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lecho
