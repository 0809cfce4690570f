#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <utility>

#include "moyal_lab/grid.hpp"
#include "moyal_lab/matrix.hpp"
#include "moyal_lab/phase_space.hpp"

namespace moyal {

/// Counter-based generator: draw i is a pure function of (seed, i), so any
/// subset of draws can be produced in any order or in parallel.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + (counter + 1) * kGolden); }

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Two independent standard normals (Box-Muller over draws 2i and 2i+1).
  std::pair<double, double> normal_pair(std::uint64_t index) const {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
};

/// Random real trigonometric polynomial on the periodic grid containing only
/// modes |a| <= max_mode along x and |b| <= max_mode along p. Zero mean.
inline RealMatrix random_bandlimited_field(const PhaseSpaceGrid& g, std::uint64_t seed, std::size_t max_mode) {
  if (2 * max_mode >= g.nx || 2 * max_mode >= g.np) throw ConfigError("max_mode must stay below the Nyquist mode");
  const CounterRng rng(seed);
  RealMatrix f(g.nx, g.np);
  std::uint64_t counter = 0;
  const double kx = 2.0 * std::numbers::pi / g.x_length();
  const double kp = 2.0 * std::numbers::pi / g.p_length();
  const auto m = static_cast<long>(max_mode);
  for (long a = 0; a <= m; ++a) {
    for (long b = -m; b <= m; ++b) {
      if (a == 0 && b <= 0) continue;  // (0,0) is the mean; (0,-b) duplicates (0,b)
      const double amp = 1.0 / (1.0 + static_cast<double>(a * a + b * b));
      const double ca = amp * (2.0 * rng.uniform(counter++) - 1.0);
      const double sa = amp * (2.0 * rng.uniform(counter++) - 1.0);
      for (std::size_t i = 0; i < g.nx; ++i) {
        const double phx = kx * static_cast<double>(a) * (g.x(i) - g.x_min);
        for (std::size_t j = 0; j < g.np; ++j) {
          const double ph = phx + kp * static_cast<double>(b) * (g.p(j) - g.p_min);
          f(i, j) += ca * std::cos(ph) + sa * std::sin(ph);
        }
      }
    }
  }
  return f;
}

/// Band-limited random state: a uniform background plus a random zero-mean
/// modulation, normalized. May be negative, as Wigner functions may be.
inline WignerState random_bandlimited_state(const PhaseSpaceGrid& g, std::uint64_t seed, std::size_t max_mode = 4) {
  RealMatrix f = random_bandlimited_field(g, seed, max_mode);
  const double background = 1.0 / (g.x_length() * g.p_length());
  for (auto& v : f.flat()) v = background * (1.0 + v);
  return normalized(WignerState(g, std::move(f)));
}

}  // namespace moyal
