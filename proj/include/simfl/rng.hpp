#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace simfl {

// Derives an independent stream seed from a master seed and a fixed label.
// Streams for different concerns (coin flips, k-means seeding, shuffling)
// never share draws.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// mt19937_64 with distribution code kept local, so draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

}  // namespace simfl
