#pragma once

#include <cstdint>
#include <random>

namespace stablab {

/// splitmix64 finalizer.  Used to decorrelate seeds derived from small
/// integers (trial indices, restart counters) before they feed a generator.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Per-trial seed: mixes a base seed with a trial index so neighbouring
/// indices give unrelated streams.
inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(base ^ index);
}

/// Deterministic random source.  Wraps mt19937_64 but owns the mapping from
/// raw bits to doubles, so results are bit-stable across standard libraries
/// (std::uniform_real_distribution is not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [-1, 1).
  double uniform_pm1() { return 2.0 * uniform() - 1.0; }

  /// Uniform integer in [0, n).  n must be positive.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace stablab
