#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace kmyriad {

// Stream-splitting scheme: every random draw in a run descends from one
// 64-bit root seed. A stream is addressed by up to three labels
// (purpose tag, replica/head index, epoch/step index); the labels are
// folded into the root with splitmix64 so distinct addresses give
// independent streams. Replica- and step-addressed streams make results
// independent of how work is partitioned across threads.
namespace stream {
inline constexpr std::uint64_t kReset = 0x01;
inline constexpr std::uint64_t kAction = 0x02;
inline constexpr std::uint64_t kInit = 0x03;
inline constexpr std::uint64_t kGoal = 0x04;
inline constexpr std::uint64_t kShuffle = 0x05;
inline constexpr std::uint64_t kEval = 0x06;
inline constexpr std::uint64_t kEpoch = 0x07;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// 64-bit seed for the stream addressed by (root, a, b, c).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = root;
  splitmix64(h);
  h ^= a * 0x9E3779B97F4A7C15ULL;
  splitmix64(h);
  h ^= b * 0xC2B2AE3D27D4EB4FULL;
  splitmix64(h);
  h ^= c * 0x165667B19E3779F9ULL;
  return splitmix64(h);
}

// xoshiro256** with splitmix64 seeding and a Marsaglia polar normal sampler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  // Derive the stream addressed by (root, a, b, c). See the scheme note above.
  static Rng derive(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0);

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the polar method (no trig, deterministic everywhere).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Rng Rng::derive(std::uint64_t root, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  return Rng(derive_seed(root, a, b, c));
}

}  // namespace kmyriad
