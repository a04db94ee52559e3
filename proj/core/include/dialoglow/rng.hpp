#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace dialoglow {

// Counter-based generator: the i-th draw of a stream is a pure function of
// (key, i), so streams can be split and replayed independently of how the
// work that consumes them is scheduled.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next() { return at(counter_++); }
  std::uint64_t at(std::uint64_t index) const;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return to_unit(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  static double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream; does not advance this generator.
  CounterRng split(std::uint64_t stream_id) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace dialoglow
