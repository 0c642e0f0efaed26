#pragma once

#include <cstdint>

namespace evpose {

// splitmix64 generator. std::mt19937 plus the standard distributions is
// implementation-defined across stdlibs; output files must be byte-identical
// everywhere, so all randomness in the pipeline goes through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in [0, bound) without modulo bias
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // uniform in [lo, hi)
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // derive an independent stream, e.g. one per pipeline stage
  Rng fork(std::uint64_t stream_id) {
    return Rng(next_u64() ^ (stream_id * 0xd1342543de82ef95ULL));
  }

 private:
  std::uint64_t state_;
};

}  // namespace evpose
