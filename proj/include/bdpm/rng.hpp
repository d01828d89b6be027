#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bdpm {

/// SplitMix64 finalizer; used to whiten seeds and derive sub-streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Folds a list of keys (step, item index, purpose tag, ...) into a child seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t k : keys) s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ull));
  return s;
}

/// Explicitly seeded generator with a platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// Derived quantities avoid the (implementation-defined) std distributions:
/// uniform() takes the top 53 bits of a draw, bernoulli(p) is uniform() < p,
/// and uniform_int() uses Lemire's multiply-and-reject method.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  /// Independent child stream keyed by `keys`; the parent is not advanced.
  Rng split(std::initializer_list<std::uint64_t> keys) const { return Rng(derive_seed(seed_, keys)); }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace bdpm
