#include "mslab/rng.hpp"

namespace mslab {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  state_ = mix64(seed + kGolden) ^ mix64(mix64(stream_id + 0x632BE59BD9B4E019ULL));
}

RngStream::result_type RngStream::operator()() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::normal() { return normal_(*this); }

double RngStream::uniform() { return uniform_(*this); }

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(mix64(seed_ ^ mix64(stream_id_ + kGolden)), index);
}

}  // namespace mslab
