#pragma once

#include <cstdint>
#include <vector>

namespace resgin {

/// Deterministic 64-bit generator (splitmix64). Distribution helpers are
/// hand-rolled so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derived generator for an independent, reproducible stream.
  Rng stream(uint64_t id) const { return Rng(state_ ^ (0xA0761D6478BD642FULL * (id + 1))); }

 private:
  uint64_t state_;
};

/// Deterministic seed combinator; every component stream in a run derives
/// from one root seed through fixed offsets.
inline uint64_t mix_seed(uint64_t root, uint64_t a, uint64_t b = 0) {
  uint64_t z = root + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xA0761D6478BD642FULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace resgin
