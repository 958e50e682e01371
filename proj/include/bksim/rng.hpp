#pragma once

#include <cstdint>

namespace bk {

/// Purpose tags keep uniforms for different uses statistically separated even
/// under a shared master seed.
enum class StreamPurpose : std::uint64_t {
  Coupling = 1,      // CFTP sandwich / regeneration draws
  Estimation = 2,    // auxiliary estimation draws
  Probe = 3,         // phase probes
  Generation = 4,    // randomized instance generation
};

/// Stateless counter-based uniform stream: position j (any sign) maps to one
/// 64-bit word through a chain of splitmix-style avalanche rounds keyed by
/// (master seed, replicate, purpose). Random access is O(1), so backward
/// simulation never materializes uniforms.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t replicate,
               StreamPurpose purpose)
      : seed_(master_seed), replicate_(replicate),
        purpose_(static_cast<std::uint64_t>(purpose)) {
    std::uint64_t k = mix(master_seed + 0x9E3779B97F4A7C15ull);
    k = mix(k ^ (replicate * 0xD6E8FEB86659FD93ull));
    key_ = mix(k ^ (static_cast<std::uint64_t>(purpose) * 0x2545F4914F6CDD1Dull));
  }

  /// Raw 64 mixed bits at the given position.
  std::uint64_t bits_at(std::int64_t position) const {
    std::uint64_t p = static_cast<std::uint64_t>(position);
    return mix(key_ ^ (p * 0x9E3779B97F4A7C15ull) ^ 0x85EBCA77C2B2AE63ull);
  }

  /// Uniform in [0,1) with 53-bit resolution: (bits >> 11) * 2^-53.
  /// Every value is a dyadic rational, so exact comparisons stay available.
  double uniform_at(std::int64_t position) const {
    return static_cast<double>(bits_at(position) >> 11) * 0x1.0p-53;
  }

  std::uint64_t master_seed() const { return seed_; }
  std::uint64_t replicate() const { return replicate_; }
  std::uint64_t purpose() const { return purpose_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_, replicate_, purpose_, key_ = 0;
};

}  // namespace bk
