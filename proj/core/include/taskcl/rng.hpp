#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace taskcl {

// Platform-independent seeded generator (xoshiro256** seeded via splitmix64).
// std::uniform_*_distribution is avoided because its output differs between
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);
  // Uniform real in [0, 1).
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

// Derives an independent seed for a named stage from the root seed, so that a
// stage run on its own draws the same numbers as inside a full pipeline.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace taskcl
