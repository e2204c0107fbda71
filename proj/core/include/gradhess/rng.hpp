#pragma once

#include <cstdint>
#include <string_view>

namespace gradhess {

/// Counter-based 64-bit random stream (splitmix64 core) with named
/// substream derivation. Two streams derived with different keys are
/// statistically independent for practical purposes, and every draw is a
/// pure function of (seed, keys, counter) — identical on every platform.
///
/// Substreams make parallel generation order-independent: give each
/// (batch, purpose) pair its own stream and the result does not depend on
/// thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1).
  double next_double();
  /// Uniform integer in [0, bound). Rejection sampled, unbiased.
  std::uint64_t next_below(std::uint64_t bound);
  /// Standard normal via Box-Muller (pair cached).
  double next_gaussian();

  /// Derived stream, keyed by a label such as "inject" or "shuffle".
  RngStream substream(std::string_view name) const;
  /// Derived stream, keyed by an index such as a batch or trial number.
  RngStream substream(std::uint64_t index) const;

 private:
  std::uint64_t state_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace gradhess
