#pragma once

#include <cstdint>

namespace qkd {

/// Counter-based per-round random stream.
///
/// Every protocol round draws from its own stream seeded by
/// (session seed, round index), so sessions are reproducible bit-for-bit
/// regardless of how rounds are scheduled across threads.
class RoundRng {
 public:
  RoundRng(std::uint64_t session_seed, std::uint64_t round)
      : state_(mix(session_seed + kGolden * (round + 1))) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>((next_u64() >> 32) % n);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace qkd
