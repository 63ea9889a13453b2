#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// Every random stream in the library is addressed by (seed, index, lane):
// the seed is the key and (index, lane) fill the upper counter words, so a
// stream can be regenerated from its address alone. This is what keeps Monte
// Carlo output independent of how work is split across threads.

#include <array>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <limits>

namespace stochcoll {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(Key key, Counter counter) : key_(key), counter_(counter) {}

  /// Stream addressed by (seed, index, lane); word 0 of the counter is the
  /// block index and starts at `first_block`.
  static Philox4x32 stream(std::uint64_t seed, std::uint64_t index, std::uint32_t lane,
                           std::uint32_t first_block = 0) {
    return Philox4x32({static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
                      {first_block, lane, static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)});
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ == 4) {
      buffer_ = block(counter_, key_);
      ++counter_[0];
      used_ = 0;
    }
    return buffer_[used_++];
  }

  /// The ten-round Philox bijection.
  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  Key key_;
  Counter counter_;
  Counter buffer_{};
  int used_ = 4;
};

/// Uniform double in the open interval (0, 1) with 53 random bits.
inline double uniform_open01(Philox4x32& rng) {
  const std::uint64_t hi = rng();
  const std::uint64_t lo = rng();
  const std::uint64_t bits = ((hi << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Two independent standard normals (Box-Muller), one Philox block.
inline std::array<double, 2> standard_normal_pair(Philox4x32& rng) {
  const double r = std::sqrt(-2.0 * std::log(uniform_open01(rng)));
  const double angle = 2.0 * std::numbers::pi * uniform_open01(rng);
  return {r * std::cos(angle), r * std::sin(angle)};
}

// Stream lanes, one per kind of draw.
namespace lane {
inline constexpr std::uint32_t bath_collision = 1;
inline constexpr std::uint32_t correlation_sweep = 2;
inline constexpr std::uint32_t gamma_tau = 3;
inline constexpr std::uint32_t projector_mean = 4;
inline constexpr std::uint32_t nelson_initial = 5;
inline constexpr std::uint32_t nelson_step = 6;
inline constexpr std::uint32_t minkowski_events = 7;
inline constexpr std::uint32_t test_events = 8;
}  // namespace lane

}  // namespace stochcoll
