#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace mslab {

/// Counter-based random stream keyed by (seed, stream_id).
///
/// The generator is SplitMix64 started from a hash of both keys, so two
/// streams with the same keys produce identical draws and streams with
/// different ids are decorrelated. Usable as a UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  double normal();
  double uniform();

  /// Independent stream derived from this stream's keys (not its position).
  RngStream child(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace mslab
