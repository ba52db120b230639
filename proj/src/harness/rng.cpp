#include "morl/rng.hpp"

#include <cmath>
#include <numbers>

namespace morl {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kChildSalt = 0xd6e8feb86659fd93ULL;

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t key) : base_(mix64(key + kGolden)), counter_(0) {}

RngStream RngStream::child(std::uint64_t index) const {
  const std::uint64_t derived = mix64(base_ ^ mix64(index * kGolden + kChildSalt));
  return RngStream(derived, 0);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(base_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::exponential() {
  return -std::log(1.0 - uniform());
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  // Rejection-free modulo bias is negligible for the n used here, but do the
  // standard rejection loop anyway; it terminates almost surely.
  const std::uint64_t limit = n * (~0ULL / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace morl
