#ifndef PIM_RNG_HPP
#define PIM_RNG_HPP

#include <cstdint>
#include <cstddef>

namespace pim {

// Deterministic RNG used everywhere randomness is needed. Streams are keyed
// by (seed, purpose tag, index) so parallel or reordered execution cannot
// change results. The uniform mappings are pinned here rather than delegated
// to <random> distributions, whose output is implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  // Derive an independent stream for a sub-task.
  static Rng derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
    Rng r(mix(mix(seed ^ 0x8e9bbf2c3a1dULL, tag), index));
    r.next();
    return r;
  }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix_final(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo bias is negligible for desk-scale n; use
    // multiply-shift which is exact enough and fully deterministic.
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool coin() { return (next() & 1u) != 0; }

  // Marsaglia polar would need a cached value; Box-Muller keeps the stream
  // consumption per call fixed at two draws.
  double normal(double mean = 0.0, double stddev = 1.0);

private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return mix_final(a + 0x9e3779b97f4a7c15ULL * (b + 1));
  }
  static std::uint64_t mix_final(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

} // namespace pim

#endif
