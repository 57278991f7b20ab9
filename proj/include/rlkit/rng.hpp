#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace rlkit {

// Splittable pseudo-random stream built on splitmix64.
//
// Streams are derived by mixing a master seed with an arbitrary key path
// (run id, purpose tag, ...), so env noise, action sampling and parameter
// init draw from independent streams that are reproducible from
// (master seed, path) alone.  All distributions are implemented here rather
// than through <random> so sequences are identical across standard library
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(mix(key ^ 0x9e3779b97f4a7c15ull)) {}

  static std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  // Derive an independent stream from (master, path...).
  static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t k = mix(master);
    for (std::uint64_t p : path) k = mix(k ^ mix(p));
    return Rng(k);
  }
  static Rng derive(std::uint64_t master, std::uint64_t run_id, std::string_view tag) {
    return derive(master, {run_id, hash_tag(tag)});
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    // rejection sampling to avoid modulo bias
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (no spare caching, keeps the stream
  // position a pure function of the number of draws).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Gamma(shape, 1) by Marsaglia-Tsang; boost for shape < 1.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  // Sample an index from an (unnormalized, nonnegative) weight vector.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace rlkit
