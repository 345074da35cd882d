#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace zsq {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a tuple of words, used to derive independent
/// stream seeds such as (base seed, n, replication) or (seed, component).
std::uint64_t hash64(std::initializer_list<std::uint64_t> words) noexcept;

/// Seedable 64-bit stream. Splitting derives a child stream whose seed
/// depends only on (parent seed, key), never on how much of the parent has
/// been consumed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  RandomStream split(std::uint64_t key) const { return RandomStream(hash64({seed_, key})); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace zsq
