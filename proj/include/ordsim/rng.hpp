#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ordsim {

// splitmix64; used both as a generator and to derive independent
// per-node streams from the run seed. Chosen over std engines so that
// traces are reproducible bit-for-bit regardless of standard library.
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static Rng stream(uint64_t seed, uint64_t stream_id) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    r.next();  // decorrelate adjacent stream ids
    return r;
  }

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  uint64_t below(uint64_t bound) {
    // Rejection sampling keeps the distribution exact and portable.
    uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  int64_t range(int64_t lo, int64_t hi) {  // inclusive bounds
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  double unit() {  // in [0,1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Pick an element index from a nonempty container.
  template <typename C>
  size_t pick_index(const C& c) {
    return static_cast<size_t>(below(c.size()));
  }

private:
  uint64_t state_;
};

/// Message latency models, all in integer ticks >= 1.
struct LatencyModel {
  enum class Kind { Fixed, Uniform, ExpDiscrete };
  Kind kind = Kind::Uniform;
  int64_t fixed = 1;
  int64_t lo = 1, hi = 10;
  double mean = 8.0;

  int64_t sample(Rng& rng) const {
    switch (kind) {
      case Kind::Fixed:
        return fixed;
      case Kind::Uniform:
        return rng.range(lo, hi);
      case Kind::ExpDiscrete: {
        // Geometric tail with the requested mean, floored at 1 tick.
        double u = rng.unit();
        double p = 1.0 / mean;
        int64_t d = 1 + static_cast<int64_t>(std::floor(std::log1p(-u) / std::log1p(-p)));
        return d < 1 ? 1 : d;
      }
    }
    return 1;
  }
};

}  // namespace ordsim
