#pragma once

#include <cstdint>
#include <string_view>

namespace ergoshift {

// SplitMix64: a small, fast, statistically sound 64-bit generator.
// Used as the single entropy source of the project; every consumer
// derives a named substream so that results are reproducible no matter
// how the work is scheduled.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; convenient for survival-function sampling.
  double next_open() { return 1.0 - next_double(); }

  // Uniform integer in [lo, hi] (inclusive). Bias is negligible for the
  // narrow ranges used here (symbol caps), but we reject to be exact.
  std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent, reproducible stream from (seed, label).
// Identical pairs always yield identical streams; distinct labels give
// streams that are independent for all practical purposes.
inline SplitMix64 substream(std::uint64_t seed, std::string_view label) {
  SplitMix64 mixer(seed ^ fnv1a64(label));
  // A few warm-up steps decorrelate nearby (seed, label) pairs.
  mixer.next();
  mixer.next();
  return SplitMix64(mixer.next());
}

}  // namespace ergoshift
