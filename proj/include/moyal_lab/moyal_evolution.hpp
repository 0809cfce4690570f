#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/fft.hpp"
#include "moyal_lab/grid.hpp"
#include "moyal_lab/hamiltonian.hpp"
#include "moyal_lab/matrix.hpp"
#include "moyal_lab/parallel.hpp"
#include "moyal_lab/phase_space.hpp"

namespace moyal {

/// Evolution law for w.
struct Method {
  enum class Kind { liouville, moyal_spectral, moyal_truncated, sinh_truncated };

  Kind kind = Kind::liouville;
  int k_max = 0;

  static Method liouville() { return {Kind::liouville, 0}; }
  static Method moyal_spectral() { return {Kind::moyal_spectral, 0}; }
  static Method moyal_truncated(int k_max) { return checked({Kind::moyal_truncated, k_max}); }
  static Method sinh_truncated(int k_max) { return checked({Kind::sinh_truncated, k_max}); }

  bool truncated() const noexcept { return kind == Kind::moyal_truncated || kind == Kind::sinh_truncated; }

  /// "liouville", "moyal_spectral", "moyal_truncated(2)", "sinh_truncated(1)".
  std::string label() const {
    switch (kind) {
      case Kind::liouville: return "liouville";
      case Kind::moyal_spectral: return "moyal_spectral";
      case Kind::moyal_truncated: return "moyal_truncated(" + std::to_string(k_max) + ")";
      case Kind::sinh_truncated: return "sinh_truncated(" + std::to_string(k_max) + ")";
    }
    return {};
  }

  static Method parse(std::string_view text) {
    if (text == "liouville") return liouville();
    if (text == "moyal_spectral") return moyal_spectral();
    for (auto [prefix, kind] : {std::pair{std::string_view("moyal_truncated("), Kind::moyal_truncated},
                                std::pair{std::string_view("sinh_truncated("), Kind::sinh_truncated}}) {
      if (text.starts_with(prefix) && text.ends_with(")")) {
        const auto digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
        int k = -1;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) break;
        return checked({kind, k});
      }
    }
    throw ConfigError("unknown evolution method: " + std::string(text));
  }

  bool operator==(const Method&) const = default;

 private:
  static Method checked(Method m) {
    if (m.k_max < 0) throw ConfigError("k_max must be >= 0");
    return m;
  }
};

struct EvolutionConfig {
  double dt = 0.0;
  std::size_t steps = 0;
  Method method = Method::moyal_spectral();
  std::size_t record_every = 10;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("evolution.dt must be positive");
    if (steps == 0) throw ConfigError("evolution.steps must be positive");
    if (record_every == 0) throw ConfigError("evolution.record_every must be positive");
  }
};

/// dw/dt sampled on the grid.
struct RhsField {
  PhaseSpaceGrid grid;
  RealMatrix values;

  double integral() const { return total_probability(grid, values); }
};

/// Sign pattern of the odd-order series: sine (alternating) or sinh (all positive).
enum class SeriesSign { alternating, positive };

/// (+/-1)^k (hbar/2)^(2k) / (2k+1)!, the weight of the order-(2k+1) bidifferential.
inline double series_coefficient(int k, double hbar, SeriesSign sign) {
  double c = 1.0;
  for (int r = 1; r <= 2 * k + 1; ++r) c /= static_cast<double>(r);
  c *= std::pow(0.5 * hbar, 2 * k);
  if (sign == SeriesSign::alternating && k % 2 != 0) c = -c;
  return c;
}

/// Linear generator of one evolution law on one grid. Multipliers are built
/// once, so repeated application (time stepping) only costs transforms.
///
/// The kinetic part -(p/m) dw/dx is applied in the x-Fourier domain. The
/// potential part is diagonal in (x, y), y the variable conjugate to p:
///   liouville        V'(x) (iy)
///   moyal_spectral   (i/hbar) [V(x + hbar y/2) - V(x - hbar y/2)]
///   *_truncated      sum_k c_k V^(2k+1)(x) (iy)^(2k+1), k = 0..k_max
class WignerGenerator {
 public:
  WignerGenerator(const Hamiltonian& h, const PhaseSpaceGrid& g, Method method)
      : grid_(g),
        method_(method),
        hbar_(h.hbar()),
        along_x_(g.nx, g.np, fft::Along::rows_index),
        along_p_(g.nx, g.np, fft::Along::cols_index) {
    h.require_compatible(g);
    kinetic_k_.resize(g.nx / 2 + 1);
    for (std::size_t m = 0; m < kinetic_k_.size(); ++m) {
      kinetic_k_[m] = fft::is_nyquist(m, g.nx) ? 0.0 : fft::wavenumber(m, g.nx, g.x_length());
    }
    velocity_.resize(g.np);
    for (std::size_t j = 0; j < g.np; ++j) velocity_[j] = g.p(j) / h.mass();
    half_p_ = g.np / 2 + 1;
    symbol_ = Matrix<fft::Complex>(g.nx, half_p_);
    switch (method.kind) {
      case Method::Kind::liouville: build_liouville(h); break;
      case Method::Kind::moyal_spectral: build_spectral(h); break;
      case Method::Kind::moyal_truncated: build_series(h, method.k_max, SeriesSign::alternating); break;
      case Method::Kind::sinh_truncated: build_series(h, method.k_max, SeriesSign::positive); break;
    }
  }

  const PhaseSpaceGrid& grid() const noexcept { return grid_; }
  const Method& method() const noexcept { return method_; }
  double hbar() const noexcept { return hbar_; }

  /// Potential-term multiplier at (x_i, y_m), m in [0, np/2].
  fft::Complex potential_symbol(std::size_t i, std::size_t m) const { return symbol_(i, m); }

  /// Upper bound on the spectral radius of the discrete generator. The
  /// kinetic and potential parts are each skew-symmetric, so eigenvalues are
  /// imaginary with modulus below the sum of the parts' maxima.
  double spectral_radius_bound() const {
    double kin = 0.0;
    for (double k : kinetic_k_) kin = std::max(kin, std::abs(k));
    double vmax = 0.0;
    for (double v : velocity_) vmax = std::max(vmax, std::abs(v));
    double pot = 0.0;
    for (const auto& s : symbol_.flat()) pot = std::max(pot, std::abs(s));
    return kin * vmax + pot;
  }

  RealMatrix apply(const RealMatrix& w) const {
    if (w.rows() != grid_.nx || w.cols() != grid_.np) throw ContractError("state shape does not match generator grid");
    const double inv_nx = 1.0 / static_cast<double>(grid_.nx);
    const double inv_np = 1.0 / static_cast<double>(grid_.np);

    // Kinetic: -(p/m) dw/dx.
    std::vector<fft::Complex> sx(along_x_.spectrum_size());
    along_x_.forward(w.data(), sx.data());
    parallel::parallel_for(kinetic_k_.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t m = b; m < e; ++m) {
        const fft::Complex factor(0.0, kinetic_k_[m] * inv_nx);
        for (std::size_t j = 0; j < grid_.np; ++j) sx[m * grid_.np + j] *= factor;
      }
    });
    RealMatrix dwdx(grid_.nx, grid_.np);
    along_x_.backward(sx.data(), dwdx.data());

    // Potential: multiplier in (x, y).
    std::vector<fft::Complex> sp(along_p_.spectrum_size());
    along_p_.forward(w.data(), sp.data());
    parallel::parallel_for(grid_.nx, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        for (std::size_t m = 0; m < half_p_; ++m) sp[i * half_p_ + m] *= symbol_(i, m) * inv_np;
    });
    RealMatrix out(grid_.nx, grid_.np);
    along_p_.backward(sp.data(), out.data());

    for (std::size_t i = 0; i < grid_.nx; ++i)
      for (std::size_t j = 0; j < grid_.np; ++j) out(i, j) -= velocity_[j] * dwdx(i, j);
    return out;
  }

  RhsField operator()(const WignerState& w) const {
    if (!(w.grid == grid_)) throw ContractError("state grid does not match generator grid");
    return {grid_, apply(w.values)};
  }

 private:
  double y(std::size_t m) const {
    return fft::is_nyquist(m, grid_.np) ? 0.0 : fft::wavenumber(m, grid_.np, grid_.p_length());
  }

  void build_liouville(const Hamiltonian& h) {
    const auto force = h.force_gradient_on(grid_);
    for (std::size_t i = 0; i < grid_.nx; ++i)
      for (std::size_t m = 0; m < half_p_; ++m) symbol_(i, m) = fft::Complex(0.0, force[i] * y(m));
  }

  void build_series(const Hamiltonian& h, int k_max, SeriesSign sign) {
    if (!h.is_polynomial()) throw UnsupportedMethod("truncated series requires a polynomial potential; use moyal_spectral");
    for (int k = 0; k <= k_max; ++k) {
      const std::size_t n = 2 * static_cast<std::size_t>(k) + 1;
      if (n > h.degree()) break;  // d^n V == 0 from here on
      const double c = series_coefficient(k, h.hbar(), sign);
      for (std::size_t i = 0; i < grid_.nx; ++i) {
        const double dv = c * h.potential_derivative(n, grid_.x(i));
        for (std::size_t m = 0; m < half_p_; ++m) symbol_(i, m) += dv * std::pow(fft::Complex(0.0, y(m)), static_cast<int>(n));
      }
    }
  }

  void build_spectral(const Hamiltonian& h) {
    const fft::Complex i_over_hbar(0.0, 1.0 / hbar_);
    if (h.is_polynomial()) {
      for (std::size_t i = 0; i < grid_.nx; ++i) {
        const double x = grid_.x(i);
        for (std::size_t m = 0; m < half_p_; ++m) {
          const double a = 0.5 * hbar_ * y(m);
          symbol_(i, m) = i_over_hbar * (h.potential_value(x + a) - h.potential_value(x - a));
        }
      }
      return;
    }
    // Tabulated: V(x+a) - V(x-a) from the trigonometric interpolant,
    // i.e. multiply V^ by 2i sin(kappa a) and transform back.
    const auto v = h.potential_on(grid_);
    fft::RealAxisFft plan(grid_.nx, 1, fft::Along::rows_index);
    std::vector<fft::Complex> vhat(plan.spectrum_size());
    plan.forward(v.data(), vhat.data());
    std::vector<fft::Complex> work(vhat.size());
    std::vector<double> diff(grid_.nx);
    const double inv_n = 1.0 / static_cast<double>(grid_.nx);
    for (std::size_t m = 0; m < half_p_; ++m) {
      const double a = 0.5 * hbar_ * y(m);
      for (std::size_t q = 0; q < vhat.size(); ++q) {
        const double kappa = fft::is_nyquist(q, grid_.nx) ? 0.0 : fft::wavenumber(q, grid_.nx, grid_.x_length());
        work[q] = vhat[q] * fft::Complex(0.0, 2.0 * std::sin(kappa * a)) * inv_n;
      }
      plan.backward(work.data(), diff.data());
      for (std::size_t i = 0; i < grid_.nx; ++i) symbol_(i, m) = i_over_hbar * diff[i];
    }
  }

  PhaseSpaceGrid grid_;
  Method method_;
  double hbar_;
  fft::RealAxisFft along_x_;
  fft::RealAxisFft along_p_;
  std::vector<double> kinetic_k_;
  std::vector<double> velocity_;
  std::size_t half_p_ = 0;
  Matrix<fft::Complex> symbol_;
};

inline RhsField liouville_rhs(const Hamiltonian& h, const WignerState& w) {
  return WignerGenerator(h, w.grid, Method::liouville())(w);
}

inline RhsField moyal_rhs_spectral(const Hamiltonian& h, const WignerState& w) {
  return WignerGenerator(h, w.grid, Method::moyal_spectral())(w);
}

inline RhsField moyal_rhs_truncated(const Hamiltonian& h, const WignerState& w, int k_max) {
  return WignerGenerator(h, w.grid, Method::moyal_truncated(k_max))(w);
}

inline RhsField sinh_rhs(const Hamiltonian& h, const WignerState& w, int k_max) {
  return WignerGenerator(h, w.grid, Method::sinh_truncated(k_max))(w);
}

inline RhsField evaluate_rhs(const Hamiltonian& h, const WignerState& w, Method method) {
  return WignerGenerator(h, w.grid, method)(w);
}

/// The order-(2k+1) series term c_k d^nV/dx^n d^nw/dp^n on its own.
inline RhsField series_term(const Hamiltonian& h, const WignerState& w, int k, SeriesSign sign) {
  if (k < 0) throw ConfigError("series index must be >= 0");
  const std::size_t n = 2 * static_cast<std::size_t>(k) + 1;
  RealMatrix out = w.grid.zeros();
  if (n > h.degree()) return {w.grid, out};
  const RealMatrix dnw = spectral_derivative(w.grid, w.values, Axis::momentum, static_cast<int>(n));
  const double c = series_coefficient(k, h.hbar(), sign);
  for (std::size_t i = 0; i < w.grid.nx; ++i) {
    const double dv = c * h.potential_derivative(n, w.grid.x(i));
    for (std::size_t j = 0; j < w.grid.np; ++j) out(i, j) = dv * dnw(i, j);
  }
  return {w.grid, out};
}

// ---------------------------------------------------------------------------
// Nonlocal derivative

enum class NonlocalVariant { sinh, sin };

/// (1/s) f(s d/dx) F along x with f = sinh or sin and a real or purely
/// imaginary shift s. For real s the sinh form is the central difference
/// [F(x+s) - F(x-s)]/(2s); the sin form is its continuation s -> i s and
/// amplifies mode kappa by sinh(s kappa)/(s kappa).
inline RealMatrix nonlocal_derivative_at(const PhaseSpaceGrid& g, const RealMatrix& f, std::complex<double> shift,
                                         NonlocalVariant variant) {
  if (f.rows() != g.nx || f.cols() != g.np) throw ContractError("field shape does not match the grid");
  if (shift.real() != 0.0 && shift.imag() != 0.0) throw ContractError("shift must be real or purely imaginary");
  if (std::abs(shift) == 0.0) throw ConfigError("xi must be positive");
  if (std::abs(shift) > 0.5 * g.x_length()) throw DomainWrapError("nonlocal shift exceeds half the periodic domain");
  return apply_axis_symbol(g, f, Axis::position, [&](double kappa, std::size_t m) -> fft::Complex {
    if (kappa == 0.0 || fft::is_nyquist(m, g.nx)) return 0.0;
    const fft::Complex arg = shift * fft::Complex(0.0, kappa);
    if (variant == NonlocalVariant::sin) return std::sin(arg) / shift;
    // the shift pair F(x + s) - F(x - s) as Fourier multipliers
    return (std::exp(arg) - std::exp(-arg)) / (2.0 * shift);
  });
}

inline RealMatrix nonlocal_derivative(const PhaseSpaceGrid& g, const RealMatrix& f, double xi, NonlocalVariant variant) {
  if (!(xi > 0.0)) throw ConfigError("xi must be positive");
  return nonlocal_derivative_at(g, f, xi, variant);
}

struct SubstitutionReport {
  double max_abs_difference = 0.0;
  double field_scale = 0.0;  ///< max |result| of the sin route, for context
  double tolerance = 1e-10;
  bool passed() const { return max_abs_difference <= tolerance; }
};

/// Compares the sinh form at imaginary shift i*xi with the sin form at real
/// xi; sin z = -i sinh(iz) makes them the same operator.
inline SubstitutionReport check_sin_sinh_substitution(const PhaseSpaceGrid& g, const RealMatrix& f, double xi) {
  if (!(xi > 0.0)) throw ConfigError("xi must be positive");
  const RealMatrix via_sinh = nonlocal_derivative_at(g, f, std::complex<double>(0.0, xi), NonlocalVariant::sinh);
  const RealMatrix via_sin = nonlocal_derivative_at(g, f, xi, NonlocalVariant::sin);
  SubstitutionReport r;
  r.max_abs_difference = max_abs_diff(via_sinh, via_sin);
  r.field_scale = max_abs(via_sin);
  return r;
}

// ---------------------------------------------------------------------------
// Time integration

struct StabilityBound {
  double cfl = 0.0;       ///< 0.5 min(dx m / p_max, dp / max|V'|)
  double spectral = 0.0;  ///< 2 sqrt(2) / spectral radius bound (RK4 imaginary-axis limit)
  double dt_max() const { return std::min(cfl, spectral); }
};

inline StabilityBound stability_bound(const Hamiltonian& h, const WignerGenerator& op) {
  const auto& g = op.grid();
  StabilityBound b;
  double vmax = 0.0;
  try {
    for (double f : h.force_gradient_on(g)) vmax = std::max(vmax, std::abs(f));
  } catch (const ConfigError&) {
    vmax = 0.0;  // tabulated without derivative: only the spectral estimate applies
  }
  const double kin = g.dx() * h.mass() / g.p_abs_max();
  const double pot = vmax > 0.0 ? g.dp() / vmax : std::numeric_limits<double>::infinity();
  b.cfl = 0.5 * std::min(kin, pot);
  b.spectral = 2.0 * std::numbers::sqrt2 / op.spectral_radius_bound();
  return b;
}

inline StabilityBound stability_bound(const Hamiltonian& h, const PhaseSpaceGrid& g, Method method) {
  return stability_bound(h, WignerGenerator(h, g, method));
}

namespace detail {

inline bool all_finite(const RealMatrix& m) {
  for (double v : m.flat())
    if (!std::isfinite(v)) return false;
  return true;
}

inline void axpy(RealMatrix& y, double a, const RealMatrix& x) {
  for (std::size_t k = 0; k < y.size(); ++k) y.flat()[k] += a * x.flat()[k];
}

}  // namespace detail

using RhsObserver = std::function<void(const RhsField&)>;

/// Classical RK4 step of size dt (dt may be negative). No renormalization.
inline WignerState rk4_step(const WignerState& w, const WignerGenerator& op, double dt,
                            const RhsObserver& on_rhs = {}) {
  auto f = [&](const RealMatrix& v) {
    RealMatrix r = op.apply(v);
    if (on_rhs) on_rhs(RhsField{op.grid(), r});
    return r;
  };
  const RealMatrix k1 = f(w.values);
  RealMatrix tmp = w.values;
  detail::axpy(tmp, 0.5 * dt, k1);
  const RealMatrix k2 = f(tmp);
  tmp = w.values;
  detail::axpy(tmp, 0.5 * dt, k2);
  const RealMatrix k3 = f(tmp);
  tmp = w.values;
  detail::axpy(tmp, dt, k3);
  const RealMatrix k4 = f(tmp);

  RealMatrix next = w.values;
  const double s = dt / 6.0;
  for (std::size_t k = 0; k < next.size(); ++k) {
    next.flat()[k] += s * (k1.flat()[k] + 2.0 * k2.flat()[k] + 2.0 * k3.flat()[k] + k4.flat()[k]);
  }
  WignerState out;
  out.grid = w.grid;
  out.values = std::move(next);
  out.time = w.time + dt;
  return out;
}

/// One step under cfg.method. Throws DivergenceError on non-finite output.
inline WignerState step(const WignerState& w, const Hamiltonian& h, const EvolutionConfig& cfg) {
  cfg.validate();
  WignerGenerator op(h, w.grid, cfg.method);
  auto next = rk4_step(w, op, cfg.dt);
  if (!detail::all_finite(next.values)) throw DivergenceError("non-finite values at step 1", 1, 0);
  return next;
}

struct Trajectory {
  std::vector<std::size_t> steps;
  std::vector<WignerState> snapshots;
};

struct EvolveHooks {
  /// Called for every recorded snapshot, including the initial state.
  std::function<void(std::size_t step, const WignerState&)> on_snapshot;
  /// Called for every RHS evaluation (four per RK4 step).
  RhsObserver on_rhs;
  /// When false the returned trajectory holds only the final snapshot.
  bool keep_snapshots = true;
};

/// Growth of max|w| beyond this factor over the initial state counts as divergence.
inline constexpr double kRunawayFactor = 1e8;

/// Records step 0, every record_every-th step, and the final step.
inline Trajectory evolve(const WignerState& w0, const Hamiltonian& h, const EvolutionConfig& cfg,
                         const EvolveHooks& hooks = {}) {
  cfg.validate();
  WignerGenerator op(h, w0.grid, cfg.method);
  Trajectory traj;
  std::size_t recorded = 0;
  auto record = [&](std::size_t n, const WignerState& w) {
    if (hooks.on_snapshot) hooks.on_snapshot(n, w);
    if (hooks.keep_snapshots || n == cfg.steps) {
      traj.steps.push_back(n);
      traj.snapshots.push_back(w);
    }
    ++recorded;
  };
  record(0, w0);
  const double limit = kRunawayFactor * std::max(max_abs(w0.values), 1e-300);
  WignerState w = w0;
  for (std::size_t n = 1; n <= cfg.steps; ++n) {
    w = rk4_step(w, op, cfg.dt, hooks.on_rhs);
    w.time = w0.time + static_cast<double>(n) * cfg.dt;
    if (!detail::all_finite(w.values)) {
      throw DivergenceError("non-finite values at step " + std::to_string(n), n, recorded - 1);
    }
    if (max_abs(w.values) > limit) {
      throw DivergenceError("runaway growth at step " + std::to_string(n), n, recorded - 1);
    }
    if (n % cfg.record_every == 0 || n == cfg.steps) record(n, w);
  }
  return traj;
}

/// Number of steps and the (possibly reduced) dt covering total_time exactly
/// with steps no larger than dt_requested.
inline std::pair<std::size_t, double> steps_for(double total_time, double dt_requested) {
  if (!(total_time > 0.0)) throw ConfigError("evolution.total_time must be positive");
  if (!(dt_requested > 0.0)) throw ConfigError("evolution.dt must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(total_time / dt_requested - 1e-9));
  const std::size_t steps = std::max<std::size_t>(1, n);
  return {steps, total_time / static_cast<double>(steps)};
}

}  // namespace moyal
