#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/grid.hpp"

namespace moyal {

inline constexpr std::size_t kMaxPotentialDegree = 8;

/// V(x) = sum_k c_k x^k.
struct PolynomialPotential {
  std::vector<double> coefficients;
};

/// V sampled on the x axis of a grid. The derivative table is optional; only
/// the spectral Moyal kernel can work without it.
struct TabulatedPotential {
  double x_min = 0.0;
  double x_max = 0.0;
  std::vector<double> values;
  std::optional<std::vector<double>> derivative;
};

/// Separable Hamiltonian H = p^2/(2m) + V(x).
class Hamiltonian {
 public:
  static Hamiltonian polynomial(std::vector<double> coefficients, double mass = 1.0, double hbar = 1.0) {
    while (!coefficients.empty() && coefficients.back() == 0.0) coefficients.pop_back();
    if (coefficients.size() > kMaxPotentialDegree + 1) {
      throw ConfigError("potential degree " + std::to_string(coefficients.size() - 1) + " exceeds 8");
    }
    for (double c : coefficients) {
      if (!std::isfinite(c)) throw ConfigError("potential coefficients must be finite");
    }
    return Hamiltonian(PolynomialPotential{std::move(coefficients)}, mass, hbar);
  }

  static Hamiltonian tabulated(TabulatedPotential table, double mass = 1.0, double hbar = 1.0) {
    if (table.values.empty()) throw ConfigError("tabulated potential is empty");
    if (table.derivative && table.derivative->size() != table.values.size()) {
      throw ConfigError("tabulated potential derivative length differs from values");
    }
    if (!(table.x_max > table.x_min)) throw ConfigError("tabulated potential x range must be increasing");
    return Hamiltonian(std::move(table), mass, hbar);
  }

  /// V = m omega^2 x^2 / 2.
  static Hamiltonian harmonic(double omega = 1.0, double mass = 1.0, double hbar = 1.0) {
    return polynomial({0.0, 0.0, 0.5 * mass * omega * omega}, mass, hbar);
  }

  /// V = lambda x^4 / 4.
  static Hamiltonian quartic(double lambda = 1.0, double mass = 1.0, double hbar = 1.0) {
    return polynomial({0.0, 0.0, 0.0, 0.0, 0.25 * lambda}, mass, hbar);
  }

  double mass() const noexcept { return mass_; }
  double hbar() const noexcept { return hbar_; }

  Hamiltonian with_hbar(double hbar) const {
    Hamiltonian h = *this;
    if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
    h.hbar_ = hbar;
    return h;
  }

  bool is_polynomial() const noexcept { return std::holds_alternative<PolynomialPotential>(potential_); }
  const std::variant<PolynomialPotential, TabulatedPotential>& potential() const noexcept { return potential_; }

  /// Degree of the polynomial potential (0 for V == const or V == 0).
  std::size_t degree() const {
    const auto& c = polynomial_coefficients();
    return c.empty() ? 0 : c.size() - 1;
  }

  const std::vector<double>& polynomial_coefficients() const {
    if (const auto* poly = std::get_if<PolynomialPotential>(&potential_)) return poly->coefficients;
    throw UnsupportedMethod("operation requires a polynomial potential");
  }

  /// n-th derivative of the polynomial potential at x (n = 0 gives V).
  double potential_derivative(std::size_t n, double x) const {
    const auto& c = polynomial_coefficients();
    if (n >= c.size()) return 0.0;
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > n;) {
      double falling = 1.0;
      for (std::size_t r = 0; r < n; ++r) falling *= static_cast<double>(k - r);
      acc = acc * x + c[k] * falling;
    }
    return acc;
  }

  double potential_value(double x) const { return potential_derivative(0, x); }

  /// V(x_i) on the grid's x axis.
  std::vector<double> potential_on(const PhaseSpaceGrid& g) const {
    if (const auto* table = std::get_if<TabulatedPotential>(&potential_)) {
      check_table(*table, g);
      return table->values;
    }
    std::vector<double> v(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) v[i] = potential_value(g.x(i));
    return v;
  }

  /// V'(x_i) on the grid's x axis.
  std::vector<double> force_gradient_on(const PhaseSpaceGrid& g) const {
    if (const auto* table = std::get_if<TabulatedPotential>(&potential_)) {
      check_table(*table, g);
      if (!table->derivative) throw ConfigError("tabulated potential has no derivative data");
      return *table->derivative;
    }
    std::vector<double> v(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) v[i] = potential_derivative(1, g.x(i));
    return v;
  }

  /// Checks a tabulated potential lives on the grid's x axis. No-op for polynomials.
  void require_compatible(const PhaseSpaceGrid& g) const {
    if (const auto* table = std::get_if<TabulatedPotential>(&potential_)) check_table(*table, g);
  }

 private:
  Hamiltonian(std::variant<PolynomialPotential, TabulatedPotential> v, double mass, double hbar)
      : potential_(std::move(v)), mass_(mass), hbar_(hbar) {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("mass must be positive");
    if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ConfigError("hbar must be positive");
  }

  static void check_table(const TabulatedPotential& t, const PhaseSpaceGrid& g) {
    if (t.values.size() != g.nx || t.x_min != g.x_min || t.x_max != g.x_max) {
      throw ContractError("tabulated potential does not match the grid's x axis");
    }
  }

  std::variant<PolynomialPotential, TabulatedPotential> potential_;
  double mass_ = 1.0;
  double hbar_ = 1.0;
};

}  // namespace moyal
