#pragma once

#include <cstdint>
#include <random>

namespace bayeslista {

// SplitMix64 finalizer. Used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named sub-streams of a run seed.
enum class Stream : std::uint64_t {
  kDesign = 1,
  kTrainTargets,
  kTestTargets,
  kPoolTargets,
  kTrainNoise,
  kTestNoise,
  kPoolNoise,
  kModelInit,
  kShuffle,
  kSplit,
  kAcquisition,
  kPowerIteration,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  return splitmix64(s ^ index);
}

/// Seedable generator: a 64-bit Mersenne Twister seeded through SplitMix64.
///
/// Splitting is done by deriving child seeds with derive_seed(); two
/// generators built from different (seed, stream, index) triples are treated
/// as independent. Sequences are bitwise reproducible for a given build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace bayeslista
