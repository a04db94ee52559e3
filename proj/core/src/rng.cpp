#include "dialoglow/rng.hpp"

#include <stdexcept>

namespace dialoglow {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ (stream * 0xD1B54A32D192ED03ULL + 1))) {}

std::uint64_t CounterRng::at(std::uint64_t index) const {
  // Two rounds of the SplitMix64 finalizer over (key, index).
  return mix64(mix64(key_ + (index + 1) * kGolden) ^ key_);
}

__extension__ using Wide = unsigned __int128;

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("CounterRng::below: n must be positive");
  }
  return static_cast<std::uint64_t>((static_cast<Wide>(next()) * n) >> 64);
}

CounterRng CounterRng::split(std::uint64_t stream_id) const {
  CounterRng child;
  child.key_ = mix64(key_ ^ mix64(stream_id + kGolden));
  child.counter_ = 0;
  return child;
}

}  // namespace dialoglow
