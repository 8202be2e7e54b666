#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace okcusum {

inline std::uint64_t splitmix64_step(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic seed derivation; mix64(seed, stream) gives independent streams.
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (0x9E3779B97F4A7C15ULL * (b + 0x0123456789ABCDEFULL));
  splitmix64_step(x);
  return splitmix64_step(x);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return mix64(mix64(a, b), c); }
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return mix64(mix64(a, b, c), d);
}

/// xoshiro256++ with platform-independent samplers; all randomness in the
/// project flows through this so results are reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) si = splitmix64_step(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  /// Exponential with given rate.
  double exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

  /// Laplace with location 0 and given scale.
  double laplace(double scale) {
    const double u = uniform() - 0.5;
    const double au = u < 0 ? -u : u;
    const double mag = -scale * std::log(1.0 - 2.0 * au);
    return u < 0 ? -mag : mag;
  }

  /// k distinct indices in [0, n), order as drawn. Requires k <= n.
  void distinct_indices(std::int64_t n, int k, std::int64_t* out) {
    for (int i = 0; i < k; ++i) {
      std::int64_t v;
      bool dup;
      do {
        v = static_cast<std::int64_t>(uniform_int(static_cast<std::uint64_t>(n)));
        dup = false;
        for (int j = 0; j < i; ++j)
          if (out[j] == v) {
            dup = true;
            break;
          }
      } while (dup);
      out[i] = v;
    }
  }

  /// Fisher-Yates permutation of 0..n-1 (full shuffle).
  std::vector<std::int64_t> permutation(std::int64_t n) {
    std::vector<std::int64_t> p(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(uniform_int(static_cast<std::uint64_t>(i + 1)));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t s_[4]{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace okcusum
