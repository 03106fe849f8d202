#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace microgrid {

/// Seeded generator with hand-rolled draw functions so that identical seeds
/// give identical streams on every platform (the std:: distributions are
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    int v = lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
    return v > hi ? hi : v;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Derive an independent stream for a named sub-purpose; forking does not
  /// disturb this generator's own sequence.
  Rng fork(std::uint64_t stream) const {
    return Rng(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace microgrid
