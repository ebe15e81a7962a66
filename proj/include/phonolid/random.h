#ifndef PHONOLID_RANDOM_H_
#define PHONOLID_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace phonolid {

// Portable pseudo-random source.
//
// The engine is std::mt19937_64 seeded with a single 64-bit value, whose
// output sequence is fixed by the C++ standard. Every derived quantity
// (uniform reals, bounded integers, gamma and Dirichlet draws, shuffles) is
// computed here from raw engine output rather than through the
// implementation-defined <random> distributions, so the same seed gives the
// same stream with any conforming standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer on [0, n); rejection sampling removes modulo bias.
  uint64_t Below(uint64_t n);

  double StandardNormal();

  // Marsaglia-Tsang; shape > 0, unit scale.
  double Gamma(double shape);

  // Normalized gamma draws; every entry of `alpha` must be positive.
  std::vector<double> Dirichlet(const std::vector<double>& alpha);

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    // Fisher-Yates from the back.
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(Below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent sub-seeds.
uint64_t MixSeed(uint64_t x);

// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view bytes);

// Seed for a named sub-stream, e.g. one language's shuffle.
inline uint64_t DeriveSeed(uint64_t seed, std::string_view name) {
  return MixSeed(seed ^ Fnv1a64(name));
}

}  // namespace phonolid

#endif  // PHONOLID_RANDOM_H_
