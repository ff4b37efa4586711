#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

// Deterministic RNG with a fully specified algorithm. The standard library's
// distributions are implementation-defined, so every seeded draw in the
// toolkit goes through this generator to keep outputs identical across
// platforms and compilers.

namespace elmia {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Derive an independent stream seed from a base seed and a string key.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
  std::uint64_t state = seed ^ fnv1a64(key);
  splitmix64_next(state);
  return splitmix64_next(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // A couple of warm-up rounds so that nearby seeds diverge immediately.
    splitmix64_next(state_);
  }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform in [0, n) via rejection sampling; n must be > 0.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool coin() { return (next_u64() & 1ULL) != 0; }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Draw k distinct elements (by partial Fisher-Yates) from `v`, in draw order.
  template <class T>
  std::vector<T> sample(std::vector<T> v, std::size_t k) {
    std::vector<T> out;
    out.reserve(k);
    std::size_t n = v.size();
    for (std::size_t i = 0; i < k && i < v.size(); ++i) {
      std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
      std::swap(v[i], v[j]);
      out.push_back(v[i]);
    }
    return out;
  }

 private:
  std::uint64_t state_;
};

}  // namespace elmia
