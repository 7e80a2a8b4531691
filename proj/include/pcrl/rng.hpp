#pragma once

#include <cmath>
#include <cstdint>

namespace pcrl {

// Finalizer from SplitMix64: a full 64-bit permutation with good avalanche.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Counter-based splittable generator. A stream is (key, counter); `sub`
// derives a child key from (key, tag) without consuming parent state, so a
// draw keyed by (step, prompt, rollout) does not depend on draw order.
// Identical seeds and tags reproduce identical streams bit-for-bit.
class Rng {
 public:
  Rng() : key_(0) {}
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ kGamma)) {}

  Rng sub(std::uint64_t tag) const {
    Rng child;
    child.key_ = mix64(key_ ^ mix64(tag + kGamma));
    return child;
  }

  template <typename... Tags>
  Rng sub(std::uint64_t tag, Tags... rest) const {
    return sub(tag).sub(static_cast<std::uint64_t>(rest)...);
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller; one value per call.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform in {0, ..., n-1} via multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream tags for the simulator's named substreams.
enum StreamTag : std::uint64_t {
  kStreamUniverse = 1,
  kStreamRollout = 2,
  kStreamCandidates = 3,
  kStreamSkip = 4,
  kStreamPrefilter = 5,
  kStreamProbe = 6,
  kStreamEval = 7,
};

}  // namespace pcrl
