#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace mad {

// Caller-owned generator for sequential draws.
using Rng = std::mt19937_64;

// Stateless 64-bit mixer (the SplitMix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for substream (seed, a, b). Distinct index tuples give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(seed) ^ a) + b);
}

// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, so it backs
// the per-(sample, step) substreams of the sampler and the per-row streams of
// the data generators.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t z = state_;
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(z);
  }

 private:
  std::uint64_t state_;
};

// Fills `out` with standard normal draws.
template <class Engine>
void fill_normal(Engine& engine, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(engine);
}

}  // namespace mad
