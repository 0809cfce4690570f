#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/matrix.hpp"

namespace moyal {

/// Uniform periodic phase-space grid. Sample i on the x axis sits at
/// x_min + i*dx with dx = (x_max - x_min)/nx; x_max itself is the periodic
/// image of x_min and is not a sample. Same for p.
struct PhaseSpaceGrid {
  std::size_t nx = 0;
  std::size_t np = 0;
  double x_min = 0.0, x_max = 0.0;
  double p_min = 0.0, p_max = 0.0;

  double x_length() const noexcept { return x_max - x_min; }
  double p_length() const noexcept { return p_max - p_min; }
  double dx() const noexcept { return x_length() / static_cast<double>(nx); }
  double dp() const noexcept { return p_length() / static_cast<double>(np); }
  double cell_area() const noexcept { return dx() * dp(); }
  double x(std::size_t i) const noexcept { return x_min + static_cast<double>(i) * dx(); }
  double p(std::size_t j) const noexcept { return p_min + static_cast<double>(j) * dp(); }
  /// Largest |p| appearing on the grid.
  double p_abs_max() const noexcept { return std::max(std::abs(p_min), std::abs(p(np - 1))); }
  double x_abs_max() const noexcept { return std::max(std::abs(x_min), std::abs(x(nx - 1))); }

  RealMatrix zeros() const { return RealMatrix(nx, np); }

  bool operator==(const PhaseSpaceGrid&) const = default;
};

namespace detail {

inline void require_axis(std::size_t n, const char* name, std::pair<double, double> range, const char* range_name) {
  if (n < 8 || !std::has_single_bit(n)) {
    throw ConfigError(std::string(name) + " not a power of two >= 8 (got " + std::to_string(n) + ")");
  }
  if (!std::isfinite(range.first) || !std::isfinite(range.second) || !(range.second > range.first)) {
    throw ConfigError(std::string(range_name) + " must be a strictly increasing finite range");
  }
}

}  // namespace detail

inline PhaseSpaceGrid make_grid(std::size_t nx, std::size_t np, std::pair<double, double> x_range,
                                std::pair<double, double> p_range) {
  detail::require_axis(nx, "nx", x_range, "x_range");
  detail::require_axis(np, "np", p_range, "p_range");
  return PhaseSpaceGrid{nx, np, x_range.first, x_range.second, p_range.first, p_range.second};
}

/// Matrix holding f(x_i, p_j).
template <class F>
RealMatrix tabulate(const PhaseSpaceGrid& g, F&& f) {
  RealMatrix m(g.nx, g.np);
  for (std::size_t i = 0; i < g.nx; ++i)
    for (std::size_t j = 0; j < g.np; ++j) m(i, j) = f(g.x(i), g.p(j));
  return m;
}

}  // namespace moyal
