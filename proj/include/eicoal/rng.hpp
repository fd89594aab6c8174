#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace eicoal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent seed for a numbered stream of a run. Replicates, chains and
// retries each get their own stream so results do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 1));
}

// mt19937_64 core with hand-rolled variate transforms. The std::* distribution
// wrappers are implementation-defined, which would break the byte-identical
// rerun contract if the toolchain changes; these transforms are pinned.
class Rng {
 public:
  static constexpr const char* kName = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on (0,1); never returns 0 or 1, safe under log().
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n). Bias is < n / 2^64, irrelevant at simulation scale.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  // Index drawn proportionally to nonnegative weights. Caller guarantees a
  // positive total.
  std::size_t discrete(const std::vector<double>& weights, double total) {
    double x = uniform() * total;
    for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
      x -= weights[j];
      if (x < 0.0) return j;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace eicoal
