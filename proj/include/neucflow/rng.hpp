#pragma once

#include <cstdint>
#include <stdexcept>

namespace neucflow {

// Deterministic splittable RNG built on splitmix64. Streams derived via
// split() are independent of the parent and of each other, so concurrent
// consumers (per-query sampling, per-batch shuffles) each take their own
// stream and results do not depend on scheduling.
class SplitRng {
 public:
  explicit SplitRng(uint64_t seed) : state_(mix(seed ^ kGamma)) {}

  uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [0, n), n > 0
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("SplitRng::next_below: n must be > 0");
    return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Derive an independent stream; the parent state is not advanced.
  SplitRng split(uint64_t tag) const {
    return from_state(mix(state_ ^ mix(tag + kGamma)));
  }

  uint64_t state() const { return state_; }

  static SplitRng from_state(uint64_t raw_state) {
    SplitRng r(0);
    r.state_ = raw_state;
    return r;
  }

 private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  uint64_t state_;
};

}  // namespace neucflow
