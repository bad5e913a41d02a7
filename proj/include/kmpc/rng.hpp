#pragma once

#include <cstdint>
#include <random>

namespace kmpc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Per-stream seed: splitmix64 chained over (master, a, b). Depends only on
// the three inputs, so streams can be generated in any order.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a,
                              std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ ((a + 1) * 0x9E3779B97F4A7C15ULL));
  s = splitmix64(s ^ ((b + 1) * 0xC2B2AE3D27D4EB4FULL));
  return s;
}

// mt19937_64 with distribution code written out so results do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, bound), unbiased.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= limit) return x % bound;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kmpc
