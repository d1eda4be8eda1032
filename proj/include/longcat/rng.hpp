#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace longcat {

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t x);

/// Deterministic child seed for stream `stream` of a parent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seedable random source owned by exactly one chain (or one substream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Independent generator for a sub-task (subject, category, chain...).
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential() { return -std::log(uniform()); }
  /// Gamma with unit scale.
  double gamma(double shape);
  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }
  std::uint64_t index(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace longcat
