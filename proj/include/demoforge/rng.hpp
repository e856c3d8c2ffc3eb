#pragma once

#include <cstdint>
#include <random>

namespace demoforge {

/// splitmix64 finalizer. Used to derive independent seeds from a root seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-episode seed: splitmix64(splitmix64(root ^ splitmix64(task_index)) ^ episode_index).
constexpr std::uint64_t derive_episode_seed(std::uint64_t root, std::uint64_t task_index,
                                            std::uint64_t episode_index) noexcept {
  return splitmix64(splitmix64(root ^ splitmix64(task_index)) ^ episode_index);
}

// Deterministic across platforms: mt19937_64's output sequence is fixed by the
// standard, and the real-valued mapping below does not go through
// std::uniform_real_distribution (whose algorithm is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Rejection sampling avoids modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 engine_;
};

}  // namespace demoforge
