#ifndef SPGNN_RNG_HPP
#define SPGNN_RNG_HPP

#include <cmath>
#include <cstdint>

namespace spgnn {

// Counter-based 64-bit generator (splitmix64, Steele et al.). The state
// advances by a fixed odd constant, so the n-th output is a pure function
// of (seed, n); corpora generated with it are reproducible across builds.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4B7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Independent substream derived from this generator's seed. Used to keep
  // e.g. topology sampling and geometry jitter on separate streams.
  Rng substream(uint64_t tag) const {
    Rng r(state_ ^ (0xD1B54A32D192ED03ull * (tag + 1)));
    r.next_u64();
    return r;
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spgnn

#endif
