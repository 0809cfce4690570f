#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "moyal_lab/moyal_lab.hpp"

using namespace moyal;

namespace {

using cd = std::complex<double>;
const double kS = std::sqrt(0.5);

PhaseSpaceGrid grid128() { return make_grid(128, 128, {-8.0, 8.0}, {-8.0, 8.0}); }

// Gaussian exp(-(x^2 + p^2)) / pi, the hbar = 1 coherent state at the origin,
// evaluated analytically (no normalization on the grid).
RealMatrix analytic_coherent(const PhaseSpaceGrid& g) {
  return tabulate(g, [](double x, double p) { return std::exp(-x * x - p * p) / std::numbers::pi; });
}

double scale_of(const RealMatrix& m) { return std::max(1.0, max_abs(m)); }

// Reference RHS by brute-force complex DFTs along both axes, using
// w(x, p) = (1/n) Σ_m w^_m exp(i k_m (p - p_min)) with signed wavenumbers.
// `potential(x, y)` is the multiplier of the potential part. Nyquist bins are
// dropped for both parts. Returns the complex result so the caller can check
// that the imaginary part vanishes.
template <class Potential>
Matrix<cd> dft_rhs(const PhaseSpaceGrid& g, const RealMatrix& w, double mass, Potential&& potential) {
  const double two_pi = 2.0 * std::numbers::pi;
  auto signed_mode = [](std::size_t m, std::size_t n) {
    return m < n / 2 ? static_cast<double>(m) : static_cast<double>(m) - static_cast<double>(n);
  };
  Matrix<cd> out(g.nx, g.np);
  // kinetic: -(p/m) d/dx along x
  for (std::size_t j = 0; j < g.np; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      cd acc{};
      for (std::size_t m = 0; m < g.nx; ++m) {
        if (m == g.nx / 2) continue;
        const double k = two_pi * signed_mode(m, g.nx) / g.x_length();
        cd hat{};
        for (std::size_t q = 0; q < g.nx; ++q) hat += w(q, j) * std::exp(cd(0, -k * (g.x(q) - g.x_min)));
        acc += hat * cd(0, k) * std::exp(cd(0, k * (g.x(i) - g.x_min)));
      }
      out(i, j) -= g.p(j) / mass * acc / static_cast<double>(g.nx);
    }
  }
  // potential: multiplier in (x, y)
  for (std::size_t i = 0; i < g.nx; ++i) {
    for (std::size_t j = 0; j < g.np; ++j) {
      cd acc{};
      for (std::size_t m = 0; m < g.np; ++m) {
        if (m == g.np / 2) continue;
        const double y = two_pi * signed_mode(m, g.np) / g.p_length();
        cd hat{};
        for (std::size_t q = 0; q < g.np; ++q) hat += w(i, q) * std::exp(cd(0, -y * (g.p(q) - g.p_min)));
        acc += hat * potential(g.x(i), y) * std::exp(cd(0, y * (g.p(j) - g.p_min)));
      }
      out(i, j) += acc / static_cast<double>(g.np);
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Method plumbing

TEST(Method, ParseAndLabelRoundTrip) {
  for (const char* s : {"liouville", "moyal_spectral", "moyal_truncated(0)", "moyal_truncated(3)", "sinh_truncated(1)"}) {
    EXPECT_EQ(Method::parse(s).label(), s);
  }
  EXPECT_THROW(Method::parse("moyal_truncated(-1)"), ConfigError);
  EXPECT_THROW(Method::parse("moyal_truncated(x)"), ConfigError);
  EXPECT_THROW(Method::parse("methd"), ConfigError);
}

TEST(EvolutionConfig, Contracts) {
  try {
    EvolutionConfig{-0.1, 10, Method::liouville(), 1}.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "evolution.dt must be positive");
  }
  EXPECT_THROW((EvolutionConfig{0.1, 0, Method::liouville(), 1}.validate()), ConfigError);
  EXPECT_THROW((EvolutionConfig{0.1, 1, Method::liouville(), 0}.validate()), ConfigError);
}

TEST(SeriesCoefficient, SineAndSinhWeights) {
  EXPECT_DOUBLE_EQ(series_coefficient(0, 1.0, SeriesSign::alternating), 1.0);
  EXPECT_DOUBLE_EQ(series_coefficient(1, 1.0, SeriesSign::alternating), -1.0 / 24.0);
  EXPECT_DOUBLE_EQ(series_coefficient(1, 1.0, SeriesSign::positive), 1.0 / 24.0);
  EXPECT_DOUBLE_EQ(series_coefficient(2, 1.0, SeriesSign::alternating), 1.0 / 1920.0);
  EXPECT_DOUBLE_EQ(series_coefficient(1, 2.0, SeriesSign::alternating), -1.0 / 6.0);
}

// ---------------------------------------------------------------------------
// liouville_rhs

TEST(LiouvilleRhs, RadialStateIsStationaryUnderHarmonicH) {
  const auto g = grid128();
  const auto w = normalized(WignerState(g, tabulate(g, [](double x, double p) {
    const double r2 = x * x + p * p;
    return std::exp(-0.5 * r2) * (1.0 + 0.3 * std::cos(r2));
  })));
  EXPECT_LE(max_abs(liouville_rhs(Hamiltonian::harmonic(), w).values), 1e-8);
}

TEST(LiouvilleRhs, FreeParticleMatchesAnalyticDerivative) {
  const auto g = grid128();
  const auto w = WignerState(g, analytic_coherent(g));
  const auto rhs = liouville_rhs(Hamiltonian::polynomial({}), w);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.nx; ++i)
    for (std::size_t j = 0; j < g.np; ++j) {
      const double x = g.x(i), p = g.p(j);
      const double expected = -p * (-2.0 * x * w.values(i, j));
      worst = std::max(worst, std::abs(rhs.values(i, j) - expected));
    }
  EXPECT_LE(worst, 1e-6);
}

TEST(LiouvilleRhs, TabulatedWithoutDerivativeRejected) {
  const auto g = make_grid(16, 16, {-4.0, 4.0}, {-4.0, 4.0});
  const auto h = Hamiltonian::tabulated({-4.0, 4.0, std::vector<double>(16, 1.0), std::nullopt});
  const auto w = gaussian_wigner(g, 0, 0, 1, 1);
  EXPECT_THROW(liouville_rhs(h, w), ConfigError);
  EXPECT_NO_THROW(moyal_rhs_spectral(h, w));
}

// ---------------------------------------------------------------------------
// moyal_rhs_spectral

TEST(SpectralRhs, EqualsLiouvilleForHarmonicH) {
  const auto g = grid128();
  const auto h = Hamiltonian::harmonic();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto w = random_bandlimited_state(g, seed);
    EXPECT_LE(max_abs_diff(moyal_rhs_spectral(h, w).values, liouville_rhs(h, w).values), 1e-8);
  }
}

TEST(SpectralRhs, QuarticDiffersFromLiouville) {
  const auto g = grid128();
  const auto h = Hamiltonian::quartic();
  const auto w = gaussian_wigner(g, 1.0, 0.0, kS, kS);
  EXPECT_GE(relative_l2(moyal_rhs_spectral(h, w).values, liouville_rhs(h, w).values), 1e-3);
}

TEST(SpectralRhs, QuarticFirstCorrectionMatchesAnalyticTerm) {
  // For V = x^4/4, the sine operator stops after hbar^2: the difference to
  // Liouville is -(hbar^2/24) V'''(x) d^3w/dp^3 = -(hbar^2/4) x d^3w/dp^3.
  const auto g = grid128();
  for (double hbar : {1.0, 0.5}) {
    const auto h = Hamiltonian::quartic(1.0, 1.0, hbar);
    const auto w = WignerState(g, analytic_coherent(g));
    RealMatrix diff = moyal_rhs_spectral(h, w).values;
    diff -= liouville_rhs(h, w).values;
    const auto expected = tabulate(g, [&](double x, double p) {
      const double d3 = (-8.0 * p * p * p + 12.0 * p) * std::exp(-x * x - p * p) / std::numbers::pi;
      return -(hbar * hbar / 4.0) * x * d3;
    });
    EXPECT_LE(max_abs_diff(diff, expected), 1e-9 * max_abs(expected)) << "hbar = " << hbar;
  }
}

TEST(SpectralRhs, MatchesBruteForceDftAndIsReal) {
  const auto g = make_grid(16, 16, {-6.0, 6.0}, {-6.0, 6.0});
  const auto h = Hamiltonian::polynomial({0.3, -0.2, 0.5, 0.1, 0.25}, 1.7, 0.8);
  const auto w = random_bandlimited_state(g, 17, 3);
  const auto ref = dft_rhs(g, w.values, h.mass(), [&](double x, double y) {
    const double a = 0.5 * h.hbar() * y;
    return cd(0.0, 1.0 / h.hbar()) * (h.potential_value(x + a) - h.potential_value(x - a));
  });
  const auto rhs = moyal_rhs_spectral(h, w).values;
  double imag = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < g.nx; ++i)
    for (std::size_t j = 0; j < g.np; ++j) {
      imag = std::max(imag, std::abs(ref(i, j).imag()));
      diff = std::max(diff, std::abs(ref(i, j).real() - rhs(i, j)));
    }
  EXPECT_LE(imag, 1e-12 * scale_of(rhs));
  EXPECT_LE(diff, 1e-10 * scale_of(rhs));
}

TEST(SpectralRhs, SymbolIsOddInY) {
  // Hermitian symmetry of the potential multiplier: s(x, -y) = conj(s(x, y)),
  // which is what keeps the RHS of a real w real. The half spectrum holds
  // y >= 0 only, so compare against the closed form at -y.
  const auto g = make_grid(32, 32, {-5.0, 5.0}, {-5.0, 5.0});
  const auto h = Hamiltonian::polynomial({0.0, 1.0, -0.5, 0.2, 0.05});
  const WignerGenerator op(h, g, Method::moyal_spectral());
  for (std::size_t i = 0; i < g.nx; i += 3)
    for (std::size_t m = 1; m < g.np / 2; ++m) {
      const double y = fft::wavenumber(m, g.np, g.p_length());
      const double a = -0.5 * y;  // hbar = 1, at -y
      const cd at_minus = cd(0, 1) * (h.potential_value(g.x(i) + a) - h.potential_value(g.x(i) - a));
      EXPECT_NEAR(std::abs(op.potential_symbol(i, m) - std::conj(at_minus)), 0.0, 1e-12);
      EXPECT_NEAR(op.potential_symbol(i, m).real(), 0.0, 1e-15);
    }
}

TEST(SpectralRhs, TabulatedCosineMatchesAnalyticShift) {
  const auto g = make_grid(64, 64, {-8.0, 8.0}, {-8.0, 8.0});
  const double kappa = 2.0 * std::numbers::pi * 3.0 / g.x_length();
  std::vector<double> v(g.nx);
  for (std::size_t i = 0; i < g.nx; ++i) v[i] = 0.7 * std::cos(kappa * g.x(i));
  const auto h = Hamiltonian::tabulated({g.x_min, g.x_max, v, std::nullopt});
  const auto w = gaussian_wigner(g, 0.5, -0.5, 1.0, 1.0);
  const auto ref = dft_rhs(g, w.values, 1.0, [&](double x, double y) {
    // V(x+a) - V(x-a) = -1.4 sin(kappa x) sin(kappa a)
    return cd(0.0, 1.0) * (-1.4 * std::sin(kappa * x) * std::sin(kappa * 0.5 * y));
  });
  const auto rhs = moyal_rhs_spectral(h, w).values;
  double diff = 0.0;
  for (std::size_t i = 0; i < g.nx; ++i)
    for (std::size_t j = 0; j < g.np; ++j) diff = std::max(diff, std::abs(ref(i, j).real() - rhs(i, j)));
  EXPECT_LE(diff, 1e-10 * scale_of(rhs));
  EXPECT_THROW(moyal_rhs_truncated(h, w, 1), UnsupportedMethod);
  EXPECT_THROW(sinh_rhs(h, w, 1), UnsupportedMethod);
}

TEST(SpectralRhs, TabulatedGridMismatchRejected) {
  const auto g = make_grid(16, 16, {-4.0, 4.0}, {-4.0, 4.0});
  const auto h = Hamiltonian::tabulated({-4.0, 4.0, std::vector<double>(32, 0.0), std::nullopt});
  EXPECT_THROW(moyal_rhs_spectral(h, gaussian_wigner(g, 0, 0, 1, 1)), ContractError);
}

// ---------------------------------------------------------------------------
// Truncated and sinh series

TEST(TruncatedRhs, ZeroOrderIsLiouville) {
  const auto g = grid128();
  const auto w = random_bandlimited_state(g, 4);
  for (const auto& h : {Hamiltonian::quartic(), Hamiltonian::polynomial({0, 0.3, 0, -0.1, 0, 0, 0.01})}) {
    const auto l = liouville_rhs(h, w).values;
    EXPECT_LE(max_abs_diff(moyal_rhs_truncated(h, w, 0).values, l), 1e-12 * scale_of(l));
    EXPECT_LE(max_abs_diff(sinh_rhs(h, w, 0).values, l), 1e-12 * scale_of(l));
  }
}

TEST(TruncatedRhs, QuadraticHCollapsesForAnyOrder) {
  const auto g = grid128();
  const auto h = Hamiltonian::polynomial({0.1, -0.4, 0.8}, 1.3, 0.7);
  const auto w = random_bandlimited_state(g, 8);
  const auto l = liouville_rhs(h, w).values;
  for (int k : {1, 2, 5}) {
    EXPECT_LE(max_abs_diff(moyal_rhs_truncated(h, w, k).values, l), 1e-12 * scale_of(l)) << k;
    EXPECT_LE(max_abs_diff(sinh_rhs(h, w, k).values, l), 1e-12 * scale_of(l)) << k;
  }
}

TEST(TruncatedRhs, IsolatedFirstTermMatchesAnalyticOracle) {
  const auto g = grid128();
  const auto h = Hamiltonian::quartic();
  const auto w = WignerState(g, analytic_coherent(g));
  const auto term = series_term(h, w, 1, SeriesSign::alternating).values;
  const auto expected = tabulate(g, [&](double x, double p) {
    const double d3 = (-8.0 * p * p * p + 12.0 * p) * std::exp(-x * x - p * p) / std::numbers::pi;
    return -(1.0 / 24.0) * 6.0 * x * d3;
  });
  EXPECT_LE(max_abs_diff(term, expected), 1e-10 * max_abs(expected));
}

TEST(TruncatedRhs, SinhMinusSineIsTwiceOddTerm) {
  const auto g = grid128();
  const auto h = Hamiltonian::quartic();
  const auto w = gaussian_wigner(g, 0.5, 0.2, kS, kS);
  RealMatrix diff = sinh_rhs(h, w, 1).values;
  diff -= moyal_rhs_truncated(h, w, 1).values;
  // twice the k = 1 sinh term, built independently from the analytic V''' = 6x
  const RealMatrix d3 = spectral_derivative(g, w.values, Axis::momentum, 3);
  const auto expected = tabulate(g, [&](double, double) { return 0.0; });
  RealMatrix twice = expected;
  for (std::size_t i = 0; i < g.nx; ++i)
    for (std::size_t j = 0; j < g.np; ++j) twice(i, j) = 2.0 * (1.0 / 24.0) * 6.0 * g.x(i) * d3(i, j);
  EXPECT_LE(relative_l2(diff, twice), 1e-10);
}

TEST(TruncatedRhs, EvenTermsAgreeOddTermsFlip) {
  // Degree-8 potential has terms k = 0..3; the sine and sinh series agree on
  // k = 0, 2 and differ by twice the k = 1, 3 terms.
  const auto g = make_grid(64, 64, {-4.0, 4.0}, {-6.0, 6.0});
  const auto h = Hamiltonian::polynomial({0, 0, 0.5, 0.1, 0.05, 0.02, 0.01, 0.002, 0.001});
  const auto w = gaussian_wigner(g, 0.3, 0.1, 0.8, 0.9);
  RealMatrix diff = sinh_rhs(h, w, 3).values;
  diff -= moyal_rhs_truncated(h, w, 3).values;
  RealMatrix odd = series_term(h, w, 1, SeriesSign::positive).values;
  odd += series_term(h, w, 3, SeriesSign::positive).values;
  odd *= 2.0;
  EXPECT_LE(relative_l2(diff, odd), 1e-10);
  // even terms coincide between the two sign patterns
  EXPECT_EQ(series_term(h, w, 2, SeriesSign::positive).values, series_term(h, w, 2, SeriesSign::alternating).values);
}

TEST(TruncatedRhs, ConsistentWithSpectralAtMaximalOrder) {
  const auto g = make_grid(64, 64, {-4.0, 4.0}, {-6.0, 6.0});
  const auto w = gaussian_wigner(g, 0.3, 0.1, 0.8, 0.9);
  struct Case {
    Hamiltonian h;
    int k;
  };
  for (const auto& c : {Case{Hamiltonian::quartic(), 1}, Case{Hamiltonian::polynomial({0, 0, 0, 0, 0, 0, 1.0 / 6}), 2},
                        Case{Hamiltonian::polynomial({0, 0.1, 0.5, 0.1, 0.05, 0.02, 0.01, 0.002, 0.001}), 3}}) {
    const auto s = moyal_rhs_spectral(c.h, w).values;
    EXPECT_LE(max_abs_diff(moyal_rhs_truncated(c.h, w, c.k).values, s), 1e-8 * scale_of(s)) << c.k;
    // asking for more terms than exist changes nothing
    EXPECT_EQ(moyal_rhs_truncated(c.h, w, c.k + 3).values, moyal_rhs_truncated(c.h, w, c.k).values);
  }
}

TEST(TruncatedRhs, SexticFirstOmittedTermScalesAsHbarToFourth) {
  // V = x^6/6: truncating after k = 1 omits only the k = 2 term, which
  // carries (hbar/2)^4, so halving hbar shrinks the error by 16.
  const auto g = grid128();
  const auto w = gaussian_wigner(g, 0.5, 0.0, kS, kS);
  std::vector<double> norms;
  for (double hbar : {1.0, 0.5, 0.25}) {
    const auto h = Hamiltonian::polynomial({0, 0, 0, 0, 0, 0, 1.0 / 6}, 1.0, hbar);
    RealMatrix d = moyal_rhs_truncated(h, w, 1).values;
    d -= moyal_rhs_spectral(h, w).values;
    norms.push_back(frobenius(d));
  }
  EXPECT_NEAR(norms[0] / norms[1], 16.0, 1e-4);
  EXPECT_NEAR(norms[1] / norms[2], 16.0, 1e-4);
}

// ---------------------------------------------------------------------------
// Properties shared by all methods

TEST(AllMethods, LinearAndConservative) {
  const auto g = grid128();
  const auto h = Hamiltonian::polynomial({0, 0.2, 0.5, 0.05, 0.02});
  const auto w1 = random_bandlimited_state(g, 21);
  const auto w2 = gaussian_wigner(g, -1.0, 0.5, 0.9, 0.7);
  for (const auto& m : {Method::liouville(), Method::moyal_spectral(), Method::moyal_truncated(1),
                        Method::sinh_truncated(1), Method::moyal_truncated(2)}) {
    const WignerGenerator op(h, g, m);
    RealMatrix combo = w1.values * 0.3;
    combo += w2.values * -1.2;
    const RealMatrix lhs = op.apply(combo);
    RealMatrix rhs = op.apply(w1.values) * 0.3;
    rhs += op.apply(w2.values) * -1.2;
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-12 * scale_of(lhs)) << m.label();
    EXPECT_LE(std::abs(op(w1).integral()), 1e-10) << m.label();
    EXPECT_LE(std::abs(op(w2).integral()), 1e-10) << m.label();
  }
}

// ---------------------------------------------------------------------------
// Nonlocal derivative

namespace {

// Linear ramp x on |x| < 10, smoothly switched off toward the periodic edge of [-16, 16).
RealMatrix embedded_ramp(const PhaseSpaceGrid& g) {
  return tabulate(g, [](double x, double) { return x * 0.5 * (std::erf((x + 10.0) / 1.2) - std::erf((x - 10.0) / 1.2)); });
}

}  // namespace

TEST(NonlocalDerivative, LinearFieldGivesUnitSlope) {
  const auto g = make_grid(256, 8, {-16.0, 16.0}, {-1.0, 1.0});
  const auto f = embedded_ramp(g);
  auto check = [&](const RealMatrix& d, const char* what, double xi) {
    double worst = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
      if (std::abs(g.x(i)) > 3.0) continue;
      for (std::size_t j = 0; j < g.np; ++j) worst = std::max(worst, std::abs(d(i, j) - 1.0));
    }
    EXPECT_LE(worst, 1e-8) << what << " xi = " << xi;
  };
  for (double xi : {0.1, 0.5, 1.0, 2.0}) check(nonlocal_derivative(g, f, xi, NonlocalVariant::sinh), "sinh", xi);
  // the sin variant amplifies mode kappa by sinh(xi kappa)/(xi kappa); keep xi
  // small enough that the ramp's switching edges stay below roundoff
  for (double xi : {0.02, 0.05}) check(nonlocal_derivative(g, f, xi, NonlocalVariant::sin), "sin", xi);
}

TEST(NonlocalDerivative, SinhIsCentralDifference) {
  const auto g = make_grid(128, 8, {-8.0, 8.0}, {-1.0, 1.0});
  const double k = 2.0 * std::numbers::pi * 5.0 / g.x_length();
  const auto f = tabulate(g, [&](double x, double p) { return std::cos(k * x + 0.3) * (1.0 + p); });
  const double xi = 0.7;
  const auto d = nonlocal_derivative(g, f, xi, NonlocalVariant::sinh);
  const auto expected = tabulate(g, [&](double x, double p) {
    return (std::cos(k * (x + xi) + 0.3) - std::cos(k * (x - xi) + 0.3)) * (1.0 + p) / (2.0 * xi);
  });
  EXPECT_LE(max_abs_diff(d, expected), 1e-12);
}

TEST(NonlocalDerivative, SinVariantOnSingleMode) {
  // Multiplier at wavenumber kappa is sin(xi D)/xi with D -> i kappa, i.e.
  // i sinh(xi kappa)/xi, so sin(kappa x) maps to sinh(xi kappa)/xi cos(kappa x).
  const auto g = make_grid(32, 8, {-8.0, 8.0}, {-1.0, 1.0});
  const double kappa = 2.0 * std::numbers::pi / g.x_length();
  const auto f = tabulate(g, [&](double x, double) { return std::sin(kappa * x); });
  const double xi = 1.0;
  const auto d = nonlocal_derivative(g, f, xi, NonlocalVariant::sin);
  const auto expected = tabulate(g, [&](double x, double) { return std::sinh(xi * kappa) / xi * std::cos(kappa * x); });
  EXPECT_LE(max_abs_diff(d, expected), 1e-10);
}

TEST(NonlocalDerivative, SmallShiftReducesToDerivative) {
  const auto g = make_grid(128, 8, {-8.0, 8.0}, {-1.0, 1.0});
  const auto f = tabulate(g, [](double x, double) { return std::exp(-x * x); });
  const auto df = spectral_derivative(g, f, Axis::position);
  for (auto v : {NonlocalVariant::sinh, NonlocalVariant::sin}) {
    const auto d = nonlocal_derivative(g, f, 1e-4, v);
    EXPECT_LE(relative_l2(d, df), 1e-6);
  }
}

TEST(NonlocalDerivative, Contracts) {
  const auto g = make_grid(64, 8, {-8.0, 8.0}, {-1.0, 1.0});
  const auto f = tabulate(g, [](double x, double) { return std::exp(-x * x); });
  EXPECT_THROW(nonlocal_derivative(g, f, 8.5, NonlocalVariant::sinh), DomainWrapError);
  EXPECT_NO_THROW(nonlocal_derivative(g, f, 8.0, NonlocalVariant::sinh));
  EXPECT_THROW(nonlocal_derivative(g, f, 0.0, NonlocalVariant::sin), ConfigError);
  EXPECT_THROW(nonlocal_derivative(g, f, -1.0, NonlocalVariant::sin), ConfigError);
  EXPECT_THROW(check_sin_sinh_substitution(g, f, 9.0), DomainWrapError);
}

TEST(SubstitutionCheck, GaussianAndSingleMode) {
  const auto g = make_grid(128, 8, {-8.0, 8.0}, {-1.0, 1.0});
  const auto gauss = tabulate(g, [](double x, double) { return std::exp(-x * x); });
  EXPECT_LE(check_sin_sinh_substitution(g, gauss, 0.5).max_abs_difference, 1e-10);
  const double kappa = 2.0 * std::numbers::pi / g.x_length();
  const auto mode = tabulate(g, [&](double x, double) { return std::sin(kappa * x); });
  EXPECT_LE(check_sin_sinh_substitution(g, mode, 1.0).max_abs_difference, 1e-12);
}

TEST(SubstitutionCheck, SeededRandomFields) {
  const auto g = make_grid(128, 8, {-8.0, 8.0}, {-1.0, 1.0});
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const auto r = check_sin_sinh_substitution(g, random_bandlimited_field(g, seed, 3), 0.25);
    EXPECT_TRUE(r.passed()) << r.max_abs_difference;
    EXPECT_GT(r.field_scale, 0.0);
  }
}

// ---------------------------------------------------------------------------
// Time stepping

TEST(Step, StationaryStateIsFixedPoint) {
  const auto g = grid128();
  const auto w = normalized(WignerState(g, tabulate(g, [](double x, double p) { return std::exp(-0.5 * (x * x + p * p)); })));
  for (const auto& m : {Method::liouville(), Method::moyal_spectral()}) {
    const auto next = step(w, Hamiltonian::harmonic(), EvolutionConfig{0.01, 1, m, 1});
    EXPECT_LE(max_abs_diff(next.values, w.values), 1e-10);
    EXPECT_DOUBLE_EQ(next.time, 0.01);
  }
}

TEST(Step, ForwardBackwardReturnsToStart) {
  const auto g = grid128();
  const auto w = gaussian_wigner(g, 1.0, 0.5, 0.8, 0.8);
  const WignerGenerator op(Hamiltonian::harmonic(), g, Method::liouville());
  const auto back = rk4_step(rk4_step(w, op, 0.01), op, -0.01);
  EXPECT_LE(max_abs_diff(back.values, w.values), 1e-9);
}

TEST(Step, ForwardBackwardDefectIsSixthOrder) {
  // R(z) R(-z) = 1 + z^6 / 72 + ... for the RK4 stability polynomial R
  const auto g = grid128();
  const auto w = gaussian_wigner(g, 1.0, 0.5, 0.8, 0.8);
  const WignerGenerator op(Hamiltonian::polynomial({0, 0, 0.5, 0, 0.05}), g, Method::liouville());
  auto defect = [&](double dt) { return max_abs_diff(rk4_step(rk4_step(w, op, dt), op, -dt).values, w.values); };
  const double ratio = defect(0.01) / defect(0.005);
  EXPECT_GT(ratio, 48.0);
  EXPECT_LT(ratio, 80.0);
}

TEST(Step, NormalizationDriftPerStep) {
  const auto g = grid128();
  const auto h = Hamiltonian::quartic();
  auto w = gaussian_wigner(g, 1.0, 0.0, kS, kS);
  const WignerGenerator op(h, g, Method::moyal_spectral());
  const double dt = 0.5 * stability_bound(h, op).dt_max();
  for (int n = 0; n < 5; ++n) {
    const auto next = rk4_step(w, op, dt);
    EXPECT_LE(std::abs(norm(next) - norm(w)), 1e-12);
    w = next;
  }
}

TEST(Step, NonFiniteIsDivergence) {
  const auto g = make_grid(16, 16, {-4.0, 4.0}, {-4.0, 4.0});
  const auto w = gaussian_wigner(g, 0, 0, 1, 1);
  try {
    step(w, Hamiltonian::harmonic(), EvolutionConfig{1e300, 1, Method::liouville(), 1});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(StabilityBound, HarmonicCflValue) {
  const auto g = grid128();
  const auto b = stability_bound(Hamiltonian::harmonic(), g, Method::liouville());
  // dx m / p_max = 0.125 / 8, dp / max|V'| = 0.125 / 8
  EXPECT_DOUBLE_EQ(b.cfl, 0.5 * 0.125 / 8.0);
  EXPECT_GT(b.spectral, 0.0);
  EXPECT_LE(b.dt_max(), b.cfl);
}

TEST(Evolve, ScheduleAndFinalTime) {
  const auto g = make_grid(32, 32, {-6.0, 6.0}, {-6.0, 6.0});
  const auto w = gaussian_wigner(g, 1.0, 0.0, kS, kS);
  const auto [steps, dt] = steps_for(1.0, 0.03);
  EXPECT_EQ(steps, 34u);
  EXPECT_NEAR(dt * steps, 1.0, 1e-15);
  const auto traj = evolve(w, Hamiltonian::harmonic(), EvolutionConfig{dt, steps, Method::moyal_spectral(), 10});
  EXPECT_EQ(traj.steps, (std::vector<std::size_t>{0, 10, 20, 30, 34}));
  EXPECT_NEAR(traj.snapshots.back().time, 1.0, 1e-12);
  EXPECT_THROW(steps_for(1.0, -0.1), ConfigError);
}

TEST(Evolve, LiouvilleAndSpectralAgreeForHarmonicH) {
  const auto g = make_grid(64, 64, {-8.0, 8.0}, {-8.0, 8.0});
  const auto h = Hamiltonian::harmonic();
  const auto w = gaussian_wigner(g, 2.0, 0.0, kS, kS);
  const auto dt = 0.9 * stability_bound(h, g, Method::moyal_spectral()).dt_max();
  const auto [steps, dte] = steps_for(1.0, dt);
  const auto a = evolve(w, h, EvolutionConfig{dte, steps, Method::moyal_spectral(), 20});
  const auto b = evolve(w, h, EvolutionConfig{dte, steps, Method::liouville(), 20});
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    EXPECT_LE(max_abs_diff(a.snapshots[k].values, b.snapshots[k].values), 1e-8);
  }
}

TEST(Evolve, QuarticSineAndSinhTrajectoriesDiverge) {
  const auto g = make_grid(64, 64, {-6.0, 6.0}, {-8.0, 8.0});
  const auto h = Hamiltonian::quartic();
  const auto w = gaussian_wigner(g, 1.0, 0.0, kS, kS);
  const double dt = 0.9 * std::min(stability_bound(h, g, Method::moyal_truncated(1)).dt_max(),
                                    stability_bound(h, g, Method::sinh_truncated(1)).dt_max());
  const auto [steps, dte] = steps_for(0.5, dt);
  const auto a = evolve(w, h, EvolutionConfig{dte, steps, Method::moyal_truncated(1), steps});
  const auto b = evolve(w, h, EvolutionConfig{dte, steps, Method::sinh_truncated(1), steps});
  EXPECT_GE(relative_l2(b.snapshots.back().values, a.snapshots.back().values), 1e-3);
}

TEST(Evolve, RunawayReportsStepAndLastSnapshot) {
  const auto g = make_grid(32, 32, {-6.0, 6.0}, {-6.0, 6.0});
  const auto h = Hamiltonian::harmonic();
  const auto w = gaussian_wigner(g, 1.0, 0.0, kS, kS);
  const double dt = 20.0 * stability_bound(h, g, Method::moyal_spectral()).dt_max();
  try {
    evolve(w, h, EvolutionConfig{dt, 1000, Method::moyal_spectral(), 1});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_EQ(e.last_good_snapshot(), e.step() - 1);
  }
}

TEST(Evolve, HooksSeeEveryRhsAndSnapshot) {
  const auto g = make_grid(32, 32, {-6.0, 6.0}, {-6.0, 6.0});
  const auto w = gaussian_wigner(g, 1.0, 0.0, kS, kS);
  std::size_t rhs_calls = 0, snaps = 0;
  EvolveHooks hooks;
  hooks.on_rhs = [&](const RhsField&) { ++rhs_calls; };
  hooks.on_snapshot = [&](std::size_t, const WignerState&) { ++snaps; };
  hooks.keep_snapshots = false;
  const auto t = evolve(w, Hamiltonian::harmonic(), EvolutionConfig{0.001, 25, Method::liouville(), 10}, hooks);
  EXPECT_EQ(rhs_calls, 100u);
  EXPECT_EQ(snaps, 4u);  // 0, 10, 20, 25
  EXPECT_EQ(t.snapshots.size(), 1u);
}
