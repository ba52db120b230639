#pragma once

#include <cstdint>

namespace morl {

/// Counter-based random stream with explicit derivation paths.
///
/// Every draw is a stateless hash of (stream base, counter), so a stream is
/// fully determined by the root key and the sequence of child() indices used
/// to derive it. Copying a stream clones its position: the copy reproduces
/// the original's remaining draws. Streams derived through distinct paths are
/// statistically independent, which is what lets rollouts, tasks, and resumed
/// runs draw the same numbers regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key);

  /// Derive the substream at `index`. Does not advance this stream.
  RngStream child(std::uint64_t index) const;

  /// Derive a substream from an arbitrary 64-bit tag (e.g. a hashed value).
  RngStream child_tagged(std::uint64_t tag) const { return child(tag); }

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();

  /// Standard normal via Box-Muller; consumes two uniforms, keeps no spare.
  double normal();

  /// Unit-rate exponential.
  double exponential();

  /// Uniform integer in [0, n).  n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

 private:
  RngStream(std::uint64_t base, std::uint64_t counter) : base_(base), counter_(counter) {}

  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace morl
