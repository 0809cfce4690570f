#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/phase_space.hpp"
#include "moyal_lab/random.hpp"
#include "moyal_lab/schrodinger.hpp"

namespace moyal {

/// A measuring device of n_atoms constituents. n_atoms is held as a double
/// because macroscopic counts (~1e23) exceed 64-bit integers; it must still
/// be integral.
struct MeasurementModel {
  double n_atoms = 1.0;
  double tau_micro = 1.0;
  std::optional<std::vector<double>> tau_samples;  ///< per-atom <tau_i^2>

  void validate() const {
    if (!(n_atoms >= 1.0) || !std::isfinite(n_atoms) || std::floor(n_atoms) != n_atoms) {
      throw ConfigError("measurement.n_atoms must be an integer >= 1");
    }
    if (!(tau_micro > 0.0) || !std::isfinite(tau_micro)) throw ConfigError("measurement.tau_micro must be positive");
    if (tau_samples) {
      if (static_cast<double>(tau_samples->size()) != n_atoms) {
        throw ConfigError("measurement.tau_samples must have n_atoms entries");
      }
      for (double t : *tau_samples) {
        if (!(t >= 0.0)) throw ConfigError("measurement.tau_samples entries must be >= 0");
      }
    }
  }
};

/// (1/N) (Σ <tau_i^2>)^(1/2) when per-atom values are given, tau_micro/sqrt(N) otherwise.
inline double tau_macro(const MeasurementModel& model) {
  model.validate();
  if (model.tau_samples) {
    double s = 0.0;
    for (double t : *model.tau_samples) s += t;
    return std::sqrt(s) / model.n_atoms;
  }
  return model.tau_micro / std::sqrt(model.n_atoms);
}

/// Splits the x axis at `boundary`: x < boundary is the left ("P") cell.
struct CellPartition {
  double boundary = 0.0;
};

struct CellProbabilities {
  double left = 0.0;
  double right = 0.0;
};

enum class Cell { left, right };

inline const char* to_string(Cell c) { return c == Cell::left ? "left" : "right"; }

namespace detail {

inline CellProbabilities split_mass(const std::vector<double>& density, double origin, double spacing,
                                    std::size_t n, const CellPartition& cut) {
  const double upper = origin + static_cast<double>(n) * spacing;
  if (!(cut.boundary > origin && cut.boundary < upper)) throw ContractError("cell boundary outside the grid");
  double left = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += density[i];
    if (origin + static_cast<double>(i) * spacing < cut.boundary) left += density[i];
  }
  CellProbabilities p;
  p.left = left / total;
  p.right = 1.0 - p.left;
  return p;
}

}  // namespace detail

inline CellProbabilities cell_probabilities(const WaveFunction& psi, const CellPartition& cut) {
  return detail::split_mass(psi.density(), psi.x_min, psi.dx(), psi.nx, cut);
}

inline CellProbabilities cell_probabilities(const WignerState& w, const CellPartition& cut) {
  const auto d = marginal(w, Axis::position);
  return detail::split_mass(d.values, d.origin, d.spacing, d.values.size(), cut);
}

/// Keeps the amplitude inside `cell`, zeroes the rest, renormalizes.
inline WaveFunction project_onto(const WaveFunction& psi, const CellPartition& cut, Cell cell) {
  const auto probs = cell_probabilities(psi, cut);
  const double mass = cell == Cell::left ? probs.left : probs.right;
  if (!(mass >= 1e-12)) {
    throw ImpossibleOutcome(std::string("cell '") + to_string(cell) + "' carries probability below 1e-12");
  }
  WaveFunction out = psi;
  for (std::size_t i = 0; i < out.nx; ++i) {
    const bool in_left = out.x(i) < cut.boundary;
    if (in_left != (cell == Cell::left)) out.values[i] = 0.0;
  }
  return detail::normalize(std::move(out));
}

struct CollapseResult {
  Cell outcome = Cell::left;
  WaveFunction collapsed;
};

/// Draws a cell with Born-rule probabilities (one seeded uniform) and projects.
inline CollapseResult project_collapse(const WaveFunction& psi, const CellPartition& cut, std::uint64_t seed) {
  const auto probs = cell_probabilities(psi, cut);
  const double u = CounterRng(seed).uniform(0);
  const Cell outcome = u < probs.left ? Cell::left : Cell::right;
  return {outcome, project_onto(psi, cut, outcome)};
}

/// Outcome only; same draw as project_collapse without building the state.
inline Cell draw_outcome(const CellProbabilities& probs, std::uint64_t seed) {
  return CounterRng(seed).uniform(0) < probs.left ? Cell::left : Cell::right;
}

/// Two-cell box: packets of width sigma centered at +/- separation/2 around a
/// boundary at 0, weights sqrt(weight_left), sqrt(weight_right).
struct TwoCellSetup {
  double separation = 10.0;
  double sigma = std::sqrt(0.5);
  double weight_left = 0.5;
  std::size_t nx = 1024;
  double hbar = 1.0;

  double half_width() const { return std::max(16.0, 0.5 * separation + 12.0 * sigma); }
};

inline WaveFunction two_cell_state(const TwoCellSetup& s) {
  if (!(s.sigma > 0.0)) throw ConfigError("packet sigma must be positive");
  if (s.separation < 8.0 * s.sigma) throw ConfigError("measurement.separation must be >= 8 sigma of the cell packets");
  if (!(s.weight_left >= 0.0 && s.weight_left <= 1.0)) throw ConfigError("measurement.weights must lie in [0, 1]");
  const std::pair range{-s.half_width(), s.half_width()};
  const auto left = coherent_wavefunction(s.nx, range, -0.5 * s.separation, 0.0, s.sigma, s.hbar);
  const auto right = coherent_wavefunction(s.nx, range, 0.5 * s.separation, 0.0, s.sigma, s.hbar);
  return superpose(left, std::sqrt(s.weight_left), right, std::sqrt(1.0 - s.weight_left));
}

struct DebroglieReport {
  CellProbabilities pre;
  double tau_macro = 0.0;
  Cell outcome = Cell::left;
  CellProbabilities post;
  double n_atoms = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> annotations;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["pre"] = {pre.left, pre.right};
    j["tau_macro"] = tau_macro;
    j["outcome"] = to_string(outcome);
    j["post"] = {post.left, post.right};
    j["n_atoms"] = n_atoms;
    j["seed"] = seed;
    return j;
  }
};

inline DebroglieReport debroglie_run(const MeasurementModel& model, double separation, std::uint64_t seed,
                                     TwoCellSetup setup = {}) {
  setup.separation = separation;
  const auto psi = two_cell_state(setup);
  const CellPartition cut{0.0};

  DebroglieReport r;
  r.n_atoms = model.n_atoms;
  r.seed = seed;
  r.tau_macro = tau_macro(model);
  r.pre = cell_probabilities(psi, cut);
  const auto collapse = project_collapse(psi, cut, seed);
  r.outcome = collapse.outcome;
  r.post = cell_probabilities(collapse.collapsed, cut);
  r.annotations = {
      "before measurement the particle occupies both cells with the 'pre' weights",
      "left and right branches carry distinct tau labels; equal laboratory time t is not simultaneity",
      "the device resolves the branch with tau near zero: tau_macro = tau_micro / sqrt(N)",
      std::string("collapse projects onto the ") + to_string(r.outcome) + " cell; tau carries no dynamics here",
  };
  return r;
}

inline DebroglieReport debroglie_run(double separation, double n_atoms, double tau_micro, std::uint64_t seed,
                                     TwoCellSetup setup = {}) {
  return debroglie_run(MeasurementModel{n_atoms, tau_micro, std::nullopt}, separation, seed, setup);
}

}  // namespace moyal
