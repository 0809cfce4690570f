#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/fft.hpp"
#include "moyal_lab/grid.hpp"
#include "moyal_lab/matrix.hpp"
#include "moyal_lab/warnings.hpp"

namespace moyal {

enum class Axis { position, momentum };

/// Phase-space quasi-probability density w(x, p, t). Negative values are legal.
struct WignerState {
  PhaseSpaceGrid grid;
  RealMatrix values;
  double time = 0.0;

  WignerState() = default;
  WignerState(PhaseSpaceGrid g, RealMatrix v, double t = 0.0) : grid(g), values(std::move(v)), time(t) {
    if (values.rows() != grid.nx || values.cols() != grid.np) {
      throw ContractError("Wigner values shape does not match the grid");
    }
    for (double x : values.flat()) {
      if (!std::isfinite(x)) throw ContractError("Wigner values must be finite");
    }
  }
};

/// One-dimensional probability density (a marginal of w).
struct DensityProfile {
  Axis axis = Axis::position;
  std::vector<double> values;
  double spacing = 0.0;
  double origin = 0.0;

  double coordinate(std::size_t i) const { return origin + static_cast<double>(i) * spacing; }
  double total() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * spacing;
  }
  double mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += coordinate(i) * values[i];
    return s * spacing;
  }
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += (coordinate(i) - m) * (coordinate(i) - m) * values[i];
    return s * spacing;
  }
};

/// Σ values · dx · dp.
inline double total_probability(const PhaseSpaceGrid& g, const RealMatrix& values) {
  double s = 0.0;
  for (double v : values.flat()) s += v;
  return s * g.cell_area();
}

inline double norm(const WignerState& w) { return total_probability(w.grid, w.values); }

inline WignerState normalized(WignerState w) {
  const double n = norm(w);
  if (!(std::abs(n) > 0.0)) throw ContractError("cannot normalize a state with zero total probability");
  w.values *= 1.0 / n;
  return w;
}

/// Σ observable · w · dx · dp.
inline double expectation(const WignerState& w, const RealMatrix& observable) {
  if (!observable.same_shape(w.values)) throw ContractError("observable shape does not match the grid");
  double s = 0.0;
  for (std::size_t k = 0; k < observable.size(); ++k) s += observable.flat()[k] * w.values.flat()[k];
  return s * w.grid.cell_area();
}

inline RealMatrix position_observable(const PhaseSpaceGrid& g) {
  return tabulate(g, [](double x, double) { return x; });
}
inline RealMatrix momentum_observable(const PhaseSpaceGrid& g) {
  return tabulate(g, [](double, double p) { return p; });
}

/// 2 pi hbar Σ w^2 dx dp; 1 for pure states.
inline double purity(const WignerState& w, double hbar) {
  double s = 0.0;
  for (double v : w.values.flat()) s += v * v;
  return 2.0 * std::numbers::pi * hbar * s * w.grid.cell_area();
}

struct Moments {
  double norm = 0.0;
  double mean_x = 0.0;
  double mean_p = 0.0;
  double var_x = 0.0;
  double var_p = 0.0;
};

inline Moments moments(const WignerState& w) {
  const auto& g = w.grid;
  double n = 0.0, sx = 0.0, sp = 0.0, sxx = 0.0, spp = 0.0;
  for (std::size_t i = 0; i < g.nx; ++i) {
    const double x = g.x(i);
    for (std::size_t j = 0; j < g.np; ++j) {
      const double p = g.p(j);
      const double v = w.values(i, j);
      n += v;
      sx += x * v;
      sp += p * v;
      sxx += x * x * v;
      spp += p * p * v;
    }
  }
  const double a = g.cell_area();
  Moments m;
  m.norm = n * a;
  m.mean_x = sx * a / m.norm;
  m.mean_p = sp * a / m.norm;
  m.var_x = sxx * a / m.norm - m.mean_x * m.mean_x;
  m.var_p = spp * a / m.norm - m.mean_p * m.mean_p;
  return m;
}

inline WignerState gaussian_wigner(const PhaseSpaceGrid& g, double x0, double p0, double sigma_x, double sigma_p,
                                   double hbar = 1.0) {
  if (!(sigma_x > 0.0)) throw ConfigError("sigma_x must be positive");
  if (!(sigma_p > 0.0)) throw ConfigError("sigma_p must be positive");
  if (sigma_x * sigma_p < 0.5 * hbar) {
    std::ostringstream os;
    os << "sub-Heisenberg dispersion: sigma_x*sigma_p = " << sigma_x * sigma_p << " < hbar/2 = " << 0.5 * hbar;
    warn(os.str());
  }
  if (x0 - 3 * sigma_x < g.x_min || x0 + 3 * sigma_x > g.x(g.nx - 1) || p0 - 3 * sigma_p < g.p_min ||
      p0 + 3 * sigma_p > g.p(g.np - 1)) {
    warn("gaussian_wigner: 3-sigma ellipse extends beyond the grid");
  }
  auto values = tabulate(g, [&](double x, double p) {
    const double dx = (x - x0) / sigma_x;
    const double dp = (p - p0) / sigma_p;
    return std::exp(-0.5 * (dx * dx + dp * dp));
  });
  return normalized(WignerState(g, std::move(values)));
}

/// Sum over the other axis; result is renormalized to unit mass.
inline DensityProfile marginal(const WignerState& w, Axis axis) {
  const auto& g = w.grid;
  DensityProfile d;
  d.axis = axis;
  if (axis == Axis::position) {
    d.values.assign(g.nx, 0.0);
    for (std::size_t i = 0; i < g.nx; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.np; ++j) s += w.values(i, j);
      d.values[i] = s * g.dp();
    }
    d.spacing = g.dx();
    d.origin = g.x_min;
  } else {
    d.values.assign(g.np, 0.0);
    for (std::size_t i = 0; i < g.nx; ++i)
      for (std::size_t j = 0; j < g.np; ++j) d.values[j] += w.values(i, j);
    for (auto& v : d.values) v *= g.dx();
    d.spacing = g.dp();
    d.origin = g.p_min;
  }
  const double total = d.total();
  if (!(std::abs(total) > 0.0)) throw ContractError("marginal of a state with zero mass");
  for (auto& v : d.values) v /= total;
  return d;
}

/// Multiplies the transform along `axis` by `symbol(k)` and transforms back.
/// symbol receives the signed angular wavenumber and the DFT bin index.
template <class Symbol>
RealMatrix apply_axis_symbol(const PhaseSpaceGrid& g, const RealMatrix& values, Axis axis, Symbol&& symbol) {
  const bool along_p = axis == Axis::momentum;
  fft::RealAxisFft plan(g.nx, g.np, along_p ? fft::Along::cols_index : fft::Along::rows_index);
  std::vector<fft::Complex> spec(plan.spectrum_size());
  plan.forward(values.data(), spec.data());
  const std::size_t n = plan.length();
  const double period = along_p ? g.p_length() : g.x_length();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < plan.half_rows(); ++r) {
    for (std::size_t c = 0; c < plan.half_cols(); ++c) {
      const std::size_t m = along_p ? c : r;
      spec[r * plan.half_cols() + c] *= symbol(fft::wavenumber(m, n, period), m) * inv_n;
    }
  }
  RealMatrix out(g.nx, g.np);
  plan.backward(spec.data(), out.data());
  return out;
}

/// Spectral d^order/d(axis)^order on the periodic grid. The Nyquist bin is
/// dropped for odd orders so real input stays real.
inline RealMatrix spectral_derivative(const PhaseSpaceGrid& g, const RealMatrix& values, Axis axis, int order = 1) {
  const std::size_t n = axis == Axis::momentum ? g.np : g.nx;
  return apply_axis_symbol(g, values, axis, [&](double k, std::size_t m) -> fft::Complex {
    if (order % 2 != 0 && fft::is_nyquist(m, n)) return 0.0;
    return std::pow(fft::Complex(0.0, k), order);
  });
}

}  // namespace moyal
