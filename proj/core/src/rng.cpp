#include "gradhess/rng.hpp"

#include <cmath>

namespace gradhess {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : state_(mix64(seed + kGamma)) {}

std::uint64_t RngStream::next_u64() {
  state_ += kGamma;
  return mix64(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound below 2^64.
  const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

double RngStream::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // u1 strictly positive so the log is finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  cached_gaussian_ = radius * std::sin(angle);
  has_cached_gaussian_ = true;
  return radius * std::cos(angle);
}

RngStream RngStream::substream(std::string_view name) const {
  RngStream child(0);
  child.state_ = mix64(state_ ^ fnv1a(name));
  return child;
}

RngStream RngStream::substream(std::uint64_t index) const {
  RngStream child(0);
  child.state_ = mix64(state_ ^ mix64(index + 0x6a09e667f3bcc909ULL));
  return child;
}

}  // namespace gradhess
