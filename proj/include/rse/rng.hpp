#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

// Counter-free splittable PRNG for reproducible experiments. A stream is
// identified by (seed, stream_id); the generator is a splitmix64 walk whose
// initial state is a mix of both identifiers, so distinct streams are
// decorrelated and the output is independent of host, thread schedule, and
// call order across streams. Normal variates use the Marsaglia polar
// method; bounded integers use rejection sampling. Output is bit-stable
// for a fixed build on a fixed platform.

namespace rse::rng {

struct Stream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

class Generator {
 public:
  explicit Generator(Stream s)
      : state_(mix64(mix64(s.seed + 0x9e3779b97f4a7c15ULL) ^
                     (s.stream_id + 0x6a09e667f3bcc909ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// count i.i.d. standard normals; repeat calls with the same stream return
// the identical vector.
inline Eigen::VectorXd gaussian_sample(Stream s, int count) {
  Generator g(s);
  Eigen::VectorXd out(count);
  for (int i = 0; i < count; ++i) out[i] = g.next_normal();
  return out;
}

// k distinct indices from [0, n) by partial Fisher-Yates, in draw order.
inline std::vector<int> sample_without_replacement(Generator& g, int n, int k) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(g.next_below(n - i));
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  return out;
}

}  // namespace rse::rng
