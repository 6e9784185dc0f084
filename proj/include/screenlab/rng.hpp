#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace screenlab {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` of a run seeded with `seed`. Bootstrap replicate
/// b draws from derive_seed(seed, b), so results do not depend on which
/// thread ran which replicate.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Deterministic generator whose output is identical on every platform.
///
/// The engine is std::mt19937_64 (fully specified by the standard); all
/// transforms to uniform, normal and gamma variates are done here rather than
/// through <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); safe to take a log of.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal (Marsaglia polar method).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, 1). Marsaglia-Tsang squeeze for shape >= 1; for shape < 1
  /// the boost Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape);

  /// log of a Gamma(shape, 1) variate. Stays finite for small shapes where the
  /// variate itself underflows.
  double log_gamma_variate(double shape);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace screenlab
