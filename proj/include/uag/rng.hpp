#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace uag {

// Deterministic RNG with a cross-platform stable stream (splitmix64).
// std::mt19937 + std::uniform_*_distribution are not pinned by the standard,
// so seeded runs must not touch them anywhere results are persisted.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection sampling. bound > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Draws an index from a discrete distribution given cumulative weights
  // (ascending, last entry = total mass).
  std::size_t next_weighted(const std::vector<double>& cumulative) {
    const double u = next_double() * cumulative.back();
    std::size_t lo = 0;
    while (lo + 1 < cumulative.size() && cumulative[lo] <= u) ++lo;
    return lo;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      using std::swap;
      swap(items[i - 1], items[next_below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stable 64-bit hash of a byte string (FNV-1a with a seed fold and an
// avalanche finisher). Used for token bucketing and seed derivation;
// std::hash is not stable across platforms.
inline std::uint64_t stable_hash64(std::string_view text, std::uint64_t seed = 0) {
  std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= h >> 33;
  h *= 0xFF51AFD7ED558CCDULL;
  h ^= h >> 33;
  return h;
}

// Derives an independent child seed from a root seed and a label.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return stable_hash64(label, root ^ 0xA24BAED4963EE407ULL);
}

}  // namespace uag
