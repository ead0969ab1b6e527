#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

namespace cliffscale {

/// Stream purposes. Every random draw in a run is keyed by
/// (master seed, purpose, trial, grid index), so results never depend on
/// scheduling order or thread count.
enum class Purpose : std::uint64_t {
  kTask = 1,
  kData = 2,
  kTest = 3,
  kInit = 4,
  kShuffle = 5,
  kValidation = 6,
  kRegularizerPoints = 7,
  kTarget = 8,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a key tuple into one 64-bit stream id.
inline constexpr std::uint64_t derive_stream(std::uint64_t seed, Purpose purpose,
                                             std::uint64_t trial, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t part : {static_cast<std::uint64_t>(purpose), trial, index}) {
    std::uint64_t t = h ^ (part + 0x632be59bd9b4e019ULL);
    h = splitmix64(t);
  }
  return h;
}

/// xoshiro256** with host-independent normal, gamma and chi-squared draws.
/// Distribution code lives here rather than in <random> because the standard
/// distributions are implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  Rng(std::uint64_t seed, Purpose purpose, std::uint64_t trial = 0, std::uint64_t index = 0)
      : Rng(derive_stream(seed, purpose, trial, index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
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

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Gamma(shape, 1) via Marsaglia–Tsang. For shape < 1 the draw is
  /// Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape) {
    if (shape <= 0.0) return 0.0;
    if (shape < 1.0) {
      double u;
      do u = uniform(); while (u == 0.0);
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
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Sum of `dof` squared standard normals.
  double chi_squared_by_sum(std::uint64_t dof) {
    double acc = 0.0;
    for (std::uint64_t i = 0; i < dof; ++i) {
      const double z = normal();
      acc += z * z;
    }
    return acc;
  }

  double chi_squared_by_gamma(std::uint64_t dof) {
    return 2.0 * gamma(0.5 * static_cast<double>(dof));
  }

  /// Chi-squared draw; exact summation up to 10^4 degrees of freedom,
  /// gamma sampling above.
  double chi_squared(std::uint64_t dof) {
    return dof <= kChiSquaredSumLimit ? chi_squared_by_sum(dof) : chi_squared_by_gamma(dof);
  }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  static constexpr std::uint64_t kChiSquaredSumLimit = 10'000;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cliffscale
