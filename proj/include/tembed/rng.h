#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tembed {

// SplitMix64 finalizer.
constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// Derives an independent seed from a parent seed and a list of indices.
constexpr uint64_t derive_seed(uint64_t seed, uint64_t a) {
  return mix64(seed + kGoldenGamma * (a + 1));
}
constexpr uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// Counter-based generator: the n-th output of stream `s` under key `k` is
// mix64(key(k, s) + (n + 1) * golden_gamma). Bit-identical on every
// platform; no std:: distributions are used because their algorithms are
// implementation-defined.
class CounterRng {
 public:
  static constexpr const char* kAlgorithm =
      "splitmix64-counter: out[n] = mix64(key + (n+1)*0x9e3779b97f4a7c15), "
      "key = mix64(seed + (stream+1)*0x9e3779b97f4a7c15)";

  explicit CounterRng(uint64_t seed, uint64_t stream = 0)
      : key_(derive_seed(seed, stream)) {}

  uint64_t next_u64() { return mix64(key_ + kGoldenGamma * (++counter_)); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, n).
  uint64_t below(uint64_t n) {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<uint64_t>(m);
    if (low < n) {
      const uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Exponential with the given rate.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Box-Muller, one output per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  uint64_t counter() const { return counter_; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

// Fisher-Yates shuffle driven by CounterRng.
template <typename Vec>
void shuffle(Vec& v, CounterRng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng.below(i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace tembed
