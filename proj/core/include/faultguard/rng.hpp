#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fg {

/// SplitMix64 generator. Every random decision in the project goes through
/// this so that campaigns replay identically regardless of platform, thread
/// count, or execution order. std::uniform_int_distribution is deliberately
/// avoided (its output is implementation-defined).
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Unbiased integer in [0, bound). bound must be > 0.
  uint64_t next_below(uint64_t bound) {
    // rejection sampling on the top of the range
    const uint64_t threshold = (0 - bound) % bound;
    while (true) {
      const uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Double in [0, 1), 53 bits of entropy.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }
};

/// Folds a list of values into one seed. Used to derive independent
/// per-cell/per-trial generators from (campaign_seed, input_id, node, ...)
/// so results do not depend on scheduling.
inline uint64_t seed_mix(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x243f6a8885a308d3ull;  // arbitrary nonzero start
  for (uint64_t p : parts) {
    SplitMix64 g(h ^ p);
    h = g.next();
  }
  return h;
}

/// FNV-1a over raw bytes; used for weight hashes and config hashes.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace fg
