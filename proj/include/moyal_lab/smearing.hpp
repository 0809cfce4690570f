#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/grid.hpp"
#include "moyal_lab/parallel.hpp"
#include "moyal_lab/phase_space.hpp"
#include "moyal_lab/random.hpp"

namespace moyal {

enum class SmearingShape { gaussian };

/// Zero-mean stochastic offsets (xi, eta) with <xi^2><eta^2> = hbar^2/4.
struct SmearingDistribution {
  double sigma_xi = 0.0;
  double sigma_eta = 0.0;
  double hbar = 1.0;
  SmearingShape shape = SmearingShape::gaussian;

  double variance_product() const { return sigma_xi * sigma_xi * sigma_eta * sigma_eta; }
};

inline SmearingDistribution make_distribution(double sigma_xi, double hbar = 1.0) {
  if (!(sigma_xi > 0.0) || !std::isfinite(sigma_xi)) throw ConfigError("smearing.sigma_xi must be positive");
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ConfigError("smearing.hbar must be positive");
  return SmearingDistribution{sigma_xi, hbar / (2.0 * sigma_xi), hbar, SmearingShape::gaussian};
}

struct SmearingSample {
  double xi = 0.0;
  double eta = 0.0;
  bool operator==(const SmearingSample&) const = default;
};

struct SmearingEnsemble {
  std::vector<SmearingSample> samples;
  std::uint64_t seed = 0;
  SmearingDistribution distribution;
};

/// Sample i is a pure function of (seed, i); batches are filled in parallel.
inline SmearingEnsemble sample(const SmearingDistribution& dist, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("smearing.n must be >= 1");
  SmearingEnsemble ens{std::vector<SmearingSample>(n), seed, dist};
  const CounterRng rng(seed);
  parallel::parallel_for(
      n,
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          const auto [z0, z1] = rng.normal_pair(i);
          ens.samples[i] = {dist.sigma_xi * z0, dist.sigma_eta * z1};
        }
      },
      4096);
  return ens;
}

/// The ensemble with every sample negated appended to it.
inline SmearingEnsemble with_mirror(SmearingEnsemble ens) {
  const std::size_t n = ens.samples.size();
  ens.samples.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) ens.samples.push_back({-ens.samples[i].xi, -ens.samples[i].eta});
  return ens;
}

struct EnsembleStatistics {
  double mean_xi = 0.0, mean_eta = 0.0;
  double var_xi = 0.0, var_eta = 0.0;  ///< second moments about zero, <xi^2> and <eta^2>
  double variance_product() const { return var_xi * var_eta; }
};

inline EnsembleStatistics statistics(const SmearingEnsemble& ens) {
  EnsembleStatistics s;
  for (const auto& v : ens.samples) {
    s.mean_xi += v.xi;
    s.mean_eta += v.eta;
    s.var_xi += v.xi * v.xi;
    s.var_eta += v.eta * v.eta;
  }
  const auto n = static_cast<double>(ens.samples.size());
  s.mean_xi /= n;
  s.mean_eta /= n;
  s.var_xi /= n;
  s.var_eta /= n;
  return s;
}

/// Fraction of samples that may fall off the grid before smeared_density refuses.
inline constexpr double kMaxOffGridFraction = 1e-3;

/// Normalized histogram of the points (x0 + xi, p0 + eta). Cell (i, j) is
/// centered on the grid sample (x_i, p_j).
inline WignerState smeared_density(double x0, double p0, const SmearingEnsemble& ens, const PhaseSpaceGrid& g) {
  RealMatrix counts(g.nx, g.np);
  std::size_t off_grid = 0;
  const double dx = g.dx(), dp = g.dp();
  for (const auto& s : ens.samples) {
    const double fi = std::floor((x0 + s.xi - g.x_min) / dx + 0.5);
    const double fj = std::floor((p0 + s.eta - g.p_min) / dp + 0.5);
    if (fi < 0 || fj < 0 || fi >= static_cast<double>(g.nx) || fj >= static_cast<double>(g.np)) {
      ++off_grid;
      continue;
    }
    counts(static_cast<std::size_t>(fi), static_cast<std::size_t>(fj)) += 1.0;
  }
  if (static_cast<double>(off_grid) > kMaxOffGridFraction * static_cast<double>(ens.samples.size())) {
    throw CoverageError(std::to_string(off_grid) + " of " + std::to_string(ens.samples.size()) +
                        " samples fall outside the grid");
  }
  const double on_grid = static_cast<double>(ens.samples.size() - off_grid);
  if (on_grid == 0.0) throw CoverageError("no samples fall on the grid");
  counts *= 1.0 / (on_grid * g.cell_area());
  return WignerState(g, std::move(counts));
}

/// Σ |a - b| dx dp.
inline double l1_distance(const WignerState& a, const WignerState& b) {
  if (!(a.grid == b.grid)) throw ContractError("states live on different grids");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) s += std::abs(a.values.flat()[k] - b.values.flat()[k]);
  return s * a.grid.cell_area();
}

struct OperatorRelationReport {
  double p_relation_deviation = 0.0;  ///< max |(h/2) dw/dp + (h/(2 s_eta^2)) (p - <p>) w| / max|(h/2) dw/dp|
  double x_relation_deviation = 0.0;  ///< same with x and s_xi
  double gaussian_residual = 0.0;     ///< max |w - moment-matched Gaussian| / max|w|
  bool exactly_testable = true;       ///< false when w is not Gaussian
  double tolerance = 1e-8;
  bool passed() const { return exactly_testable && p_relation_deviation <= tolerance && x_relation_deviation <= tolerance; }
};

/// Tests (h/2) dw/dp = -(h/(2 s_eta^2)) (p - <p>) w and the x counterpart,
/// which is how the relations xi w = (h/2) dw/dp, eta w = (h/2) dw/dx read on
/// a Gaussian state whose widths are the smearing widths.
inline OperatorRelationReport check_operator_relations(const WignerState& w, const SmearingDistribution& dist) {
  const auto& g = w.grid;
  const Moments mom = moments(w);
  OperatorRelationReport r;

  const RealMatrix fitted = tabulate(g, [&](double x, double p) {
    const double a = (x - mom.mean_x), b = (p - mom.mean_p);
    return std::exp(-0.5 * (a * a / mom.var_x + b * b / mom.var_p)) /
           (2.0 * std::numbers::pi * std::sqrt(mom.var_x * mom.var_p));
  });
  r.gaussian_residual = max_abs_diff(w.values, fitted) / max_abs(w.values);
  r.exactly_testable = r.gaussian_residual <= 1e-6;

  const double half_h = 0.5 * dist.hbar;
  auto deviation = [&](Axis axis, double sigma, double mean) {
    const RealMatrix lhs = spectral_derivative(g, w.values, axis) * half_h;
    const RealMatrix rhs = tabulate(g, [&](double x, double p) { return axis == Axis::momentum ? p : x; });
    double worst = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i)
      for (std::size_t j = 0; j < g.np; ++j) {
        const double predicted = -(half_h / (sigma * sigma)) * (rhs(i, j) - mean) * w.values(i, j);
        worst = std::max(worst, std::abs(lhs(i, j) - predicted));
      }
    return worst / max_abs(lhs);
  };
  r.p_relation_deviation = deviation(Axis::momentum, dist.sigma_eta, mom.mean_p);
  r.x_relation_deviation = deviation(Axis::position, dist.sigma_xi, mom.mean_x);
  return r;
}

namespace io {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV "xi,eta" with 17 significant digits.
inline void write_ensemble_csv(std::ostream& out, const SmearingEnsemble& ens) {
  out << "xi,eta\n";
  for (const auto& s : ens.samples) out << format_double(s.xi) << ',' << format_double(s.eta) << '\n';
}

inline nlohmann::ordered_json ensemble_metadata(const SmearingEnsemble& ens) {
  nlohmann::ordered_json j;
  j["seed"] = ens.seed;
  j["n"] = ens.samples.size();
  j["sigma_xi"] = ens.distribution.sigma_xi;
  j["sigma_eta"] = ens.distribution.sigma_eta;
  j["hbar"] = ens.distribution.hbar;
  return j;
}

/// Writes <stem>.csv and <stem>.json.
inline void write_ensemble(const std::filesystem::path& stem, const SmearingEnsemble& ens) {
  std::ofstream csv(stem.string() + ".csv");
  if (!csv) throw Error("cannot write " + stem.string() + ".csv");
  write_ensemble_csv(csv, ens);
  std::ofstream meta(stem.string() + ".json");
  meta << ensemble_metadata(ens).dump(2) << '\n';
}

}  // namespace io

}  // namespace moyal
