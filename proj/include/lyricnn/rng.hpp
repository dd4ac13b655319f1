#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "lyricnn/errors.hpp"

namespace lyricnn {

// splitmix64 generator. Every seeded behaviour in the project (splits, weight
// init, dropout, epoch shuffles, coordinate sampling) draws from this single
// generator so that equal seeds give bitwise-equal results across platforms
// and implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) built from the top 53 bits.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

  // Uniform integer in [0, n) via rejection sampling, so the distribution is
  // exact and the draw sequence is implementation-independent. Draws x are
  // accepted while x < 2^64 - (2^64 mod n), then reduced modulo n.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw ValidationError("next_below: n must be positive");
    const std::uint64_t remainder = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    for (;;) {
      const std::uint64_t x = next();
      if (remainder == 0 || x <= std::numeric_limits<std::uint64_t>::max() - remainder) return x % n;
    }
  }

 private:
  std::uint64_t state_;
};

// Descending Fisher-Yates driven by next_below; equal seeds give identical
// permutations for any element type.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& values, SplitMix64& rng) {
  if (values.size() <= 1) return;
  for (std::size_t i = values.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
    using std::swap;
    swap(values[i], values[j]);
  }
}

// Derives an independent stream seed from a base seed and a stream index
// (epoch number, batch number, ...). One scramble round keeps nearby indices
// from producing correlated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  SplitMix64 rng(base ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
  return rng.next();
}

}  // namespace lyricnn
