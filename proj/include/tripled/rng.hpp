#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tripled {

// Deterministic RNG used everywhere randomness is needed. Two pieces:
//
//  * SplitMix64 turns a 64-bit seed into a stream of well-mixed words and
//    is used only for seeding.
//  * Xoshiro256++ (xorshift family) is the working generator.
//
// Substreams: replicate b of a procedure seeded with s draws from
// Rng::substream(s, b), which mixes (s, b) through SplitMix64 before
// filling the xoshiro state. Replicates are therefore independent of the
// order in which they run, and results are identical across platforms
// because all variate transforms below are written out explicitly
// (std::*_distribution is implementation-defined and never used).

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& word : state_) word = sm.next();
  }

  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    // Mix the stream index in through the SplitMix finalizer so that
    // (seed, b) and (seed, b+1) produce unrelated states.
    SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return Rng(sm.next());
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform on [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller; one spare value is cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // integer in [0, n), n >= 1, by rejection to avoid modulo bias
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // k distinct indices from [0, n), Floyd's algorithm, output sorted
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n,
                                                                std::size_t k) {
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t idx = static_cast<std::size_t>(below(j + 1));
    bool already = false;
    for (std::size_t c : chosen) {
      if (c == idx) {
        already = true;
        break;
      }
    }
    chosen.push_back(already ? j : idx);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace tripled
