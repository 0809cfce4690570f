#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/fft.hpp"
#include "moyal_lab/grid.hpp"
#include "moyal_lab/hamiltonian.hpp"
#include "moyal_lab/moyal_evolution.hpp"
#include "moyal_lab/parallel.hpp"
#include "moyal_lab/phase_space.hpp"
#include "moyal_lab/warnings.hpp"

namespace moyal {

using Complex = std::complex<double>;

/// Position-space amplitude psi(x_i) on a periodic uniform axis.
struct WaveFunction {
  std::size_t nx = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  std::vector<Complex> values;
  double time = 0.0;

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(nx); }
  double x(std::size_t i) const noexcept { return x_min + static_cast<double>(i) * dx(); }
  double length() const noexcept { return x_max - x_min; }

  double norm() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * dx();
  }

  std::vector<double> density() const {
    std::vector<double> d(nx);
    for (std::size_t i = 0; i < nx; ++i) d[i] = std::norm(values[i]);
    return d;
  }

  /// A phase-space grid sharing this x axis.
  PhaseSpaceGrid phase_space_grid(std::size_t np, std::pair<double, double> p_range) const {
    return make_grid(nx, np, {x_min, x_max}, p_range);
  }
};

namespace detail {

inline void check_axis(std::size_t nx, std::pair<double, double> x_range) {
  make_grid(nx, 8, x_range, {0.0, 1.0});
}

inline WaveFunction normalize(WaveFunction psi) {
  const double n = psi.norm();
  if (!(n > 0.0)) throw ContractError("cannot normalize a zero wave function");
  const double s = 1.0 / std::sqrt(n);
  for (auto& v : psi.values) v *= s;
  return psi;
}

}  // namespace detail

/// Minimum-uncertainty packet: |psi|^2 has variance sigma_x^2, mean x0, mean momentum p0.
inline WaveFunction coherent_wavefunction(std::size_t nx, std::pair<double, double> x_range, double x0, double p0,
                                          double sigma_x, double hbar = 1.0) {
  detail::check_axis(nx, x_range);
  if (!(sigma_x > 0.0)) throw ConfigError("sigma_x must be positive");
  WaveFunction psi{nx, x_range.first, x_range.second, std::vector<Complex>(nx), 0.0};
  for (std::size_t i = 0; i < nx; ++i) {
    const double d = psi.x(i) - x0;
    psi.values[i] = std::exp(Complex(-d * d / (4.0 * sigma_x * sigma_x), p0 * psi.x(i) / hbar));
  }
  return detail::normalize(std::move(psi));
}

/// a*psi_a + b*psi_b, renormalized. Both must share the axis.
inline WaveFunction superpose(const WaveFunction& psi_a, Complex a, const WaveFunction& psi_b, Complex b) {
  if (psi_a.nx != psi_b.nx || psi_a.x_min != psi_b.x_min || psi_a.x_max != psi_b.x_max) {
    throw ContractError("superposed wave functions live on different axes");
  }
  WaveFunction out = psi_a;
  for (std::size_t i = 0; i < out.nx; ++i) out.values[i] = a * psi_a.values[i] + b * psi_b.values[i];
  return detail::normalize(std::move(out));
}

enum class Parity { even, odd };

/// Two coherent packets at +/- x0 (momenta +/- p0), added or subtracted.
inline WaveFunction cat_wavefunction(std::size_t nx, std::pair<double, double> x_range, double x0, double p0,
                                     double sigma_x, Parity parity, double hbar = 1.0) {
  const auto right = coherent_wavefunction(nx, x_range, x0, p0, sigma_x, hbar);
  const auto left = coherent_wavefunction(nx, x_range, -x0, -p0, sigma_x, hbar);
  return superpose(right, 1.0, left, parity == Parity::even ? 1.0 : -1.0);
}

/// Strang splitting exp(-iV dt/2h) exp(-iT dt/h) exp(-iV dt/2h) with the
/// kinetic factor applied in Fourier space. Phases are built once per dt.
class SplitStepPropagator {
 public:
  SplitStepPropagator(const Hamiltonian& h, std::size_t nx, std::pair<double, double> x_range, double dt)
      : nx_(nx), x_min_(x_range.first), x_max_(x_range.second), dt_(dt), fft_(nx) {
    const auto grid = make_grid(nx, 8, x_range, {0.0, 1.0});
    const auto v = h.potential_on(grid);
    half_potential_.resize(nx);
    for (std::size_t i = 0; i < nx; ++i) half_potential_[i] = std::exp(Complex(0.0, -0.5 * v[i] * dt / h.hbar()));
    kinetic_.resize(nx);
    const double inv_n = 1.0 / static_cast<double>(nx);
    for (std::size_t m = 0; m < nx; ++m) {
      const double k = fft::wavenumber(m, nx, grid.x_length());
      kinetic_[m] = std::exp(Complex(0.0, -h.hbar() * k * k * dt / (2.0 * h.mass()))) * inv_n;
    }
  }

  double dt() const noexcept { return dt_; }

  WaveFunction apply(const WaveFunction& psi) const {
    if (psi.nx != nx_ || psi.x_min != x_min_ || psi.x_max != x_max_) {
      throw ContractError("wave function axis does not match propagator");
    }
    std::vector<Complex> a(nx_), b(nx_);
    for (std::size_t i = 0; i < nx_; ++i) a[i] = half_potential_[i] * psi.values[i];
    fft_.forward(a.data(), b.data());
    for (std::size_t m = 0; m < nx_; ++m) b[m] *= kinetic_[m];
    fft_.backward(b.data(), a.data());
    WaveFunction out = psi;
    for (std::size_t i = 0; i < nx_; ++i) {
      out.values[i] = half_potential_[i] * a[i];
      if (!std::isfinite(out.values[i].real()) || !std::isfinite(out.values[i].imag())) {
        throw DivergenceError("non-finite wave function", 1, 0);
      }
    }
    out.time = psi.time + dt_;
    return out;
  }

 private:
  std::size_t nx_;
  double x_min_, x_max_, dt_;
  fft::ComplexFft fft_;
  std::vector<Complex> half_potential_;
  std::vector<Complex> kinetic_;
};

inline WaveFunction split_step(const WaveFunction& psi, const Hamiltonian& h, double dt) {
  return SplitStepPropagator(h, psi.nx, {psi.x_min, psi.x_max}, dt).apply(psi);
}

/// |phi(p)|^2 on the FFT momentum lattice p_m = hbar k_m, as (p, density) pairs.
inline std::vector<std::pair<double, double>> momentum_density(const WaveFunction& psi, double hbar) {
  fft::ComplexFft fft(psi.nx);
  std::vector<Complex> spec(psi.nx);
  fft.forward(psi.values.data(), spec.data());
  const double dp = 2.0 * std::numbers::pi * hbar / psi.length();
  // Parseval: Σ|psi|^2 dx = Σ|spec|^2 dx / n, so density = |spec|^2 dx / (n dp).
  const double scale = psi.dx() / (static_cast<double>(psi.nx) * dp);
  std::vector<std::pair<double, double>> out(psi.nx);
  for (std::size_t m = 0; m < psi.nx; ++m) {
    out[m] = {hbar * fft::wavenumber(m, psi.nx, psi.length()), std::norm(spec[m]) * scale};
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct TransformReport {
  double max_imag_residue = 0.0;  ///< largest |Im W| before taking the real part
  double norm = 0.0;              ///< Σ W dx dp of the result
  double outer_mass = 0.0;        ///< |psi|^2 mass in the outer eighth at each end
  double leaked_mass = 0.0;       ///< momentum mass outside the requested p range
};

/// W(x,p) = (1/(pi hbar)) ∫ psi*(x+y) psi(x-y) exp(2ipy/hbar) dy with y on the
/// position lattice. psi is taken as zero outside the axis, so x +/- y must
/// both lie on it.
inline WignerState wigner_transform(const WaveFunction& psi, std::size_t np, std::pair<double, double> p_range,
                                    double hbar = 1.0, TransformReport* report = nullptr) {
  const PhaseSpaceGrid g = psi.phase_space_grid(np, p_range);
  const std::size_t n = psi.nx;
  const double dx = psi.dx();

  TransformReport rep;
  {
    const double eighth = psi.length() / 8.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (psi.x(i) < psi.x_min + eighth || psi.x(i) >= psi.x_max - eighth) rep.outer_mass += std::norm(psi.values[i]);
    }
    rep.outer_mass *= dx;
    if (rep.outer_mass > 1e-12) {
      std::ostringstream os;
      os << "wigner_transform: " << rep.outer_mass << " of |psi|^2 lies in the outer quarter of the domain";
      warn(os.str());
    }
  }
  {
    const double nyquist = std::numbers::pi * hbar / (2.0 * dx);
    if (g.p_min < -nyquist - 1e-12 || g.p_max > nyquist + 1e-12) {
      warn("wigner_transform: p_range exceeds the alias-free band |p| <= pi hbar / (2 dx)");
    }
    for (const auto& [p, d] : momentum_density(psi, hbar)) {
      if (p < g.p_min || p >= g.p_max) rep.leaked_mass += d;
    }
    rep.leaked_mass *= 2.0 * std::numbers::pi * hbar / psi.length();
    if (rep.leaked_mass > 1e-9) {
      std::ostringstream os;
      os << "wigner_transform: aliasing, p_range misses momentum mass " << rep.leaked_mass;
      warn(os.str());
    }
  }

  // phase(k, j) = exp(2 i p_k y_j / hbar), j the signed lag index + n/2.
  Matrix<Complex> phase(np, n);
  for (std::size_t k = 0; k < np; ++k) {
    for (std::size_t jj = 0; jj < n; ++jj) {
      const double y = (static_cast<double>(jj) - static_cast<double>(n / 2)) * dx;
      phase(k, jj) = std::exp(Complex(0.0, 2.0 * g.p(k) * y / hbar));
    }
  }

  RealMatrix values(n, np);
  std::vector<double> imag_max(n, 0.0);
  const double scale = dx / (std::numbers::pi * hbar);
  parallel::parallel_for(n, [&](std::size_t b, std::size_t e) {
    std::vector<Complex> lag(n);
    for (std::size_t i = b; i < e; ++i) {
      const auto ii = static_cast<long>(i);
      const auto half = static_cast<long>(n / 2);
      // Only lags with both i+j and i-j inside the axis contribute.
      const long reach = std::min(ii, static_cast<long>(n) - 1 - ii);
      std::fill(lag.begin(), lag.end(), Complex{});
      for (long j = -std::min(reach, half); j <= std::min(reach, half - 1); ++j) {
        lag[static_cast<std::size_t>(j + half)] = std::conj(psi.values[static_cast<std::size_t>(ii + j)]) *
                                                  psi.values[static_cast<std::size_t>(ii - j)];
      }
      for (std::size_t k = 0; k < np; ++k) {
        Complex s{};
        for (std::size_t jj = 0; jj < n; ++jj) s += lag[jj] * phase(k, jj);
        values(i, k) = scale * s.real();
        imag_max[i] = std::max(imag_max[i], std::abs(scale * s.imag()));
      }
    }
  });

  WignerState w(g, std::move(values), psi.time);
  rep.max_imag_residue = *std::max_element(imag_max.begin(), imag_max.end());
  rep.norm = moyal::norm(w);
  if (report) *report = rep;
  return w;
}

struct OracleTrajectory {
  Trajectory wigner;
  WaveFunction final_wavefunction;
};

/// Split-step evolution with Wigner snapshots on the same schedule evolve()
/// uses for `cfg` (step 0, every record_every, final). cfg.method is ignored.
inline OracleTrajectory evolve_oracle(const WaveFunction& psi0, const Hamiltonian& h, const EvolutionConfig& cfg,
                                      std::size_t np, std::pair<double, double> p_range,
                                      const std::function<void(std::size_t, const WignerState&)>& on_snapshot = {}) {
  cfg.validate();
  SplitStepPropagator prop(h, psi0.nx, {psi0.x_min, psi0.x_max}, cfg.dt);
  OracleTrajectory out;
  auto record = [&](std::size_t n, const WaveFunction& psi) {
    auto w = wigner_transform(psi, np, p_range, h.hbar());
    if (on_snapshot) on_snapshot(n, w);
    out.wigner.steps.push_back(n);
    out.wigner.snapshots.push_back(std::move(w));
  };
  record(0, psi0);
  WaveFunction psi = psi0;
  for (std::size_t n = 1; n <= cfg.steps; ++n) {
    try {
      psi = prop.apply(psi);
    } catch (const DivergenceError&) {
      throw DivergenceError("non-finite wave function at step " + std::to_string(n), n, out.wigner.steps.size() - 1);
    }
    psi.time = psi0.time + static_cast<double>(n) * cfg.dt;
    if (n % cfg.record_every == 0 || n == cfg.steps) record(n, psi);
  }
  out.final_wavefunction = std::move(psi);
  return out;
}

/// Convenience form: total time T reached with steps of at most dt.
inline OracleTrajectory evolve_oracle(const WaveFunction& psi0, const Hamiltonian& h, double total_time, double dt,
                                      std::size_t record_every, std::size_t np, std::pair<double, double> p_range) {
  const auto [steps, dt_eff] = steps_for(total_time, dt);
  return evolve_oracle(psi0, h, EvolutionConfig{dt_eff, steps, Method::moyal_spectral(), record_every}, np, p_range);
}

}  // namespace moyal
