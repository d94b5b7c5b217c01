#ifndef METASLICE_RNG_HPP_
#define METASLICE_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

namespace metaslice {

// Seeded generator with a fixed, documented algorithm so replays match across
// builds and standard libraries:
//   engine   std::mt19937_64 (fully specified by the standard), seeded with
//            splitmix64(seed)
//   uniform  top 53 bits of one draw scaled by 2^-53, in [0, 1)
//   integer  rejection sampling on 64-bit draws, no modulo bias
// The std:: distribution classes are avoided on purpose; their algorithms are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // k distinct values from [0, n), ascending (Floyd's algorithm).
  std::vector<std::uint64_t> sample_distinct(std::uint64_t n, std::uint64_t k);

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Independent stream for the same experiment seed, e.g. evaluation.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace metaslice

#endif  // METASLICE_RNG_HPP_
