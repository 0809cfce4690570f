#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/grid.hpp"
#include "moyal_lab/hamiltonian.hpp"
#include "moyal_lab/measurement.hpp"
#include "moyal_lab/moyal_evolution.hpp"
#include "moyal_lab/schrodinger.hpp"

namespace moyal {

using Json = nlohmann::ordered_json;

enum class Experiment { evolve, compare, transform, smear, measure, identity_checks };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::evolve: return "evolve";
    case Experiment::compare: return "compare";
    case Experiment::transform: return "transform";
    case Experiment::smear: return "smear";
    case Experiment::measure: return "measure";
    case Experiment::identity_checks: return "identity_checks";
  }
  return "?";
}

/// Accepts "identity_checks" and "identity-checks".
inline Experiment parse_experiment(std::string_view name) {
  for (auto e : {Experiment::evolve, Experiment::compare, Experiment::transform, Experiment::smear,
                 Experiment::measure, Experiment::identity_checks}) {
    std::string canonical = to_string(e);
    std::string dashed = canonical;
    for (auto& c : dashed)
      if (c == '_') c = '-';
    if (name == canonical || name == dashed) return e;
  }
  throw ConfigError("experiment: unknown experiment '" + std::string(name) + "'");
}

struct GridSpec {
  std::size_t nx = 0, np = 0;
  std::pair<double, double> x_range, p_range;
  PhaseSpaceGrid build() const { return make_grid(nx, np, x_range, p_range); }
};

struct HamiltonianSpec {
  double mass = 1.0;
  double hbar = 1.0;
  std::optional<std::vector<double>> polynomial;
  std::optional<std::vector<double>> tabulated_values;
  std::optional<std::vector<double>> tabulated_derivative;

  Hamiltonian build(const GridSpec& grid) const {
    if (polynomial) return Hamiltonian::polynomial(*polynomial, mass, hbar);
    TabulatedPotential t{grid.x_range.first, grid.x_range.second, *tabulated_values, tabulated_derivative};
    if (t.values.size() != grid.nx) throw ConfigError("hamiltonian.potential.tabulated.values must have grid.nx entries");
    return Hamiltonian::tabulated(std::move(t), mass, hbar);
  }
};

enum class InitialKind { gaussian, coherent, cat };

struct InitialStateSpec {
  InitialKind kind = InitialKind::coherent;
  double x0 = 0.0, p0 = 0.0;
  double sigma_x = 0.0;  ///< gaussian: x width; coherent/cat: wave-packet width
  double sigma_p = 0.0;  ///< gaussian only
  Parity parity = Parity::even;
  bool has_wavefunction() const { return kind != InitialKind::gaussian; }
};

struct EvolutionSpec {
  double dt = 0.0;
  std::optional<std::size_t> steps;
  std::optional<double> total_time;
  std::string method = "moyal_spectral";
  std::size_t record_every = 10;

  /// (steps, dt actually used). With total_time, dt shrinks so steps*dt == T.
  std::pair<std::size_t, double> schedule() const {
    if (steps) return {*steps, dt};
    return steps_for(*total_time, dt);
  }
};

struct SmearingSpec {
  double sigma_xi = 0.0;
  double hbar = 1.0;
  std::size_t n = 0;
  double x0 = 0.0, p0 = 0.0;
};

struct MeasurementSpec {
  double n_atoms = 1.0;
  double tau_micro = 1.0;
  std::optional<std::vector<double>> tau_samples;
  double separation = 10.0;
  std::size_t trials = 1;
  double weight_left = 0.5, weight_right = 0.5;
  std::size_t nx = 1024;  ///< position samples of the two-cell box; cells split at x = 0
};

struct RunConfig {
  Experiment experiment = Experiment::evolve;
  std::optional<GridSpec> grid;
  std::optional<HamiltonianSpec> hamiltonian;
  std::optional<InitialStateSpec> initial_state;
  std::optional<EvolutionSpec> evolution;
  std::vector<std::string> compare_methods;
  std::optional<SmearingSpec> smearing;
  std::optional<MeasurementSpec> measurement;
  std::string output_dir = "moyal_lab_out";
  std::uint64_t seed = 0;

  Json resolved;                       ///< the config with every default filled in
  std::vector<std::string> defaults;   ///< "path = value" for each applied default
};

namespace detail {

/// Wraps a JSON object, tracks which keys were read, and reports leftovers.
class Section {
 public:
  Section(const Json& j, std::string path, Json& echo, std::vector<std::string>& defaults)
      : j_(j), path_(std::move(path)), echo_(echo), defaults_(defaults) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  std::string key_path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
  bool has(std::string_view key) const { return j_.contains(key); }

  const Json& raw(std::string_view key) {
    seen_.insert(std::string(key));
    if (!j_.contains(key)) throw ConfigError("missing key: " + key_path(key));
    return j_.at(std::string(key));
  }

  double number(std::string_view key) {
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key_path(key) + " must be finite");
    echo_[std::string(key)] = v;
    return d;
  }

  double number_or(std::string_view key, double fallback) {
    if (has(key)) return number(key);
    seen_.insert(std::string(key));
    echo_[std::string(key)] = fallback;
    defaults_.push_back(key_path(key) + " = " + Json(fallback).dump());
    return fallback;
  }

  double positive(std::string_view key) {
    const double d = number(key);
    if (!(d > 0.0)) throw ConfigError(key_path(key) + " must be positive");
    return d;
  }

  double positive_or(std::string_view key, double fallback) {
    const double d = number_or(key, fallback);
    if (!(d > 0.0)) throw ConfigError(key_path(key) + " must be positive");
    return d;
  }

  std::uint64_t unsigned_integer(std::string_view key) {
    const Json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(key_path(key) + " must be a non-negative integer");
    echo_[std::string(key)] = v;
    return v.get<std::uint64_t>();
  }

  std::size_t count(std::string_view key) {
    const auto n = unsigned_integer(key);
    if (n == 0) throw ConfigError(key_path(key) + " must be >= 1");
    return static_cast<std::size_t>(n);
  }

  /// Records a default for `key` without reading anything.
  void set_default(std::string_view key, const Json& value) {
    seen_.insert(std::string(key));
    echo_[std::string(key)] = value;
    defaults_.push_back(key_path(key) + " = " + value.dump());
  }

  std::size_t count_or(std::string_view key, std::size_t fallback) {
    if (has(key)) return count(key);
    seen_.insert(std::string(key));
    echo_[std::string(key)] = fallback;
    defaults_.push_back(key_path(key) + " = " + std::to_string(fallback));
    return fallback;
  }

  std::string string(std::string_view key) {
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + " must be a string");
    echo_[std::string(key)] = v;
    return v.get<std::string>();
  }

  std::vector<double> numbers(std::string_view key) {
    const Json& v = raw(key);
    if (!v.is_array()) throw ConfigError(key_path(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(key_path(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
      if (!std::isfinite(out.back())) throw ConfigError(key_path(key) + " entries must be finite");
    }
    echo_[std::string(key)] = v;
    return out;
  }

  std::pair<double, double> range(std::string_view key) {
    const auto v = numbers(key);
    if (v.size() != 2) throw ConfigError(key_path(key) + " must be a [min, max] pair");
    return {v[0], v[1]};
  }

  Section child(std::string_view key) {
    const Json& v = raw(key);
    return Section(v, key_path(key), echo_[std::string(key)], defaults_);
  }

  /// Every key not read so far is an error.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key: " + it.key() + " (path: " + key_path(it.key()) + ")");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const Json& j_;
  std::string path_;
  Json& echo_;
  std::vector<std::string>& defaults_;
  std::set<std::string> seen_;
};

inline std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline GridSpec read_grid(Section s) {
  GridSpec g;
  g.nx = s.count("nx");
  g.np = s.count("np");
  g.x_range = s.range("x_range");
  g.p_range = s.range("p_range");
  s.finish();
  g.build();
  return g;
}

inline HamiltonianSpec read_hamiltonian(Section s) {
  HamiltonianSpec h;
  h.mass = s.positive_or("mass", 1.0);
  h.hbar = s.positive_or("hbar", 1.0);
  Section pot = s.child("potential");
  if (pot.has("polynomial") == pot.has("tabulated")) {
    throw ConfigError("hamiltonian.potential needs exactly one of 'polynomial' or 'tabulated'");
  }
  if (pot.has("polynomial")) {
    h.polynomial = pot.numbers("polynomial");
    Hamiltonian::polynomial(*h.polynomial);  // degree check
  } else {
    Section tab = pot.child("tabulated");
    h.tabulated_values = tab.numbers("values");
    if (tab.has("derivative")) h.tabulated_derivative = tab.numbers("derivative");
    tab.finish();
  }
  pot.finish();
  s.finish();
  return h;
}

inline InitialStateSpec read_initial_state(Section s, double hbar) {
  InitialStateSpec st;
  const std::string kind = s.string("kind");
  st.x0 = s.number_or("x0", 0.0);
  st.p0 = s.number_or("p0", 0.0);
  if (kind == "gaussian") {
    st.kind = InitialKind::gaussian;
    st.sigma_x = s.positive("sigma_x");
    st.sigma_p = s.positive("sigma_p");
  } else if (kind == "coherent" || kind == "cat") {
    st.kind = kind == "coherent" ? InitialKind::coherent : InitialKind::cat;
    st.sigma_x = s.positive_or("sigma_x", std::sqrt(0.5 * hbar));
    if (st.kind == InitialKind::cat) {
      std::string parity = "even";
      if (s.has("parity")) {
        parity = s.string("parity");
      } else {
        s.set_default("parity", parity);
      }
      if (parity != "even" && parity != "odd") throw ConfigError("initial_state.parity must be 'even' or 'odd'");
      st.parity = parity == "even" ? Parity::even : Parity::odd;
    }
  } else {
    throw ConfigError("initial_state.kind must be one of gaussian, coherent, cat");
  }
  s.finish();
  return st;
}

inline EvolutionSpec read_evolution(Section s) {
  EvolutionSpec e;
  e.dt = s.number("dt");
  if (!(e.dt > 0.0)) throw ConfigError("evolution.dt must be positive");
  if (s.has("steps") == s.has("total_time")) {
    throw ConfigError("evolution needs exactly one of 'steps' or 'total_time'");
  }
  if (s.has("steps")) e.steps = s.count("steps");
  if (s.has("total_time")) e.total_time = s.positive("total_time");
  e.record_every = s.count_or("record_every", 10);
  if (!s.has("method")) {
    s.finish();  // a misspelt key is the likelier mistake, so report it first
    throw ConfigError("missing key: evolution.method");
  }
  e.method = s.string("method");
  if (e.method != "schrodinger_oracle") Method::parse(e.method);
  s.finish();
  return e;
}

inline SmearingSpec read_smearing(Section s) {
  SmearingSpec sm;
  sm.sigma_xi = s.number("sigma_xi");
  if (!(sm.sigma_xi > 0.0)) throw ConfigError("smearing.sigma_xi must be positive");
  sm.hbar = s.positive_or("hbar", 1.0);
  sm.n = s.count("n");
  sm.x0 = s.number_or("x0", 0.0);
  sm.p0 = s.number_or("p0", 0.0);
  s.finish();
  return sm;
}

inline MeasurementSpec read_measurement(Section s) {
  MeasurementSpec m;
  m.n_atoms = s.number("n_atoms");
  m.tau_micro = s.positive("tau_micro");
  if (s.has("tau_samples")) m.tau_samples = s.numbers("tau_samples");
  m.separation = s.positive_or("separation", 10.0);
  m.trials = s.count_or("trials", 1);
  if (s.has("weights")) {
    const auto w = s.numbers("weights");
    if (w.size() != 2 || w[0] < 0.0 || w[1] < 0.0 || std::abs(w[0] + w[1] - 1.0) > 1e-12) {
      throw ConfigError("measurement.weights must be two non-negative numbers summing to 1");
    }
    m.weight_left = w[0];
    m.weight_right = w[1];
  } else {
    s.set_default("weights", Json::array({0.5, 0.5}));
  }
  m.nx = s.count_or("nx", 1024);
  s.finish();
  MeasurementModel{m.n_atoms, m.tau_micro, m.tau_samples}.validate();
  return m;
}

}  // namespace detail

/// Strict parse of a run configuration. `experiment_override`, when set,
/// supplies or must match the "experiment" key.
inline RunConfig parse_config(std::string_view text, std::optional<Experiment> experiment_override = std::nullopt) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("parse error at " + detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }

  RunConfig cfg;
  Json& echo = cfg.resolved;
  echo = Json::object();
  detail::Section top(doc, "", echo, cfg.defaults);

  if (top.has("experiment")) {
    cfg.experiment = parse_experiment(top.string("experiment"));
    if (experiment_override && *experiment_override != cfg.experiment) {
      throw ConfigError(std::string("experiment: config says '") + to_string(cfg.experiment) +
                        "' but the command line asked for '" + to_string(*experiment_override) + "'");
    }
  } else if (experiment_override) {
    cfg.experiment = *experiment_override;
  } else {
    throw ConfigError("missing key: experiment");
  }
  echo["experiment"] = to_string(cfg.experiment);

  const Experiment ex = cfg.experiment;
  const bool dynamics = ex == Experiment::evolve || ex == Experiment::compare;
  auto needs = [&](std::string_view key, bool required, bool allowed) {
    if (required && !top.has(key)) throw ConfigError("missing key: " + std::string(key));
    if (!allowed && top.has(key)) {
      throw ConfigError("unknown key: " + std::string(key) + " (path: " + std::string(key) + "; not used by experiment " +
                        to_string(ex) + ")");
    }
    return top.has(key);
  };

  if (needs("grid", dynamics || ex == Experiment::transform || ex == Experiment::smear,
            dynamics || ex == Experiment::transform || ex == Experiment::smear)) {
    cfg.grid = detail::read_grid(top.child("grid"));
  }
  if (needs("hamiltonian", dynamics, dynamics || ex == Experiment::transform)) {
    cfg.hamiltonian = detail::read_hamiltonian(top.child("hamiltonian"));
  } else if (ex == Experiment::transform) {
    // transform without dynamics still needs hbar; echo the default Hamiltonian
    cfg.hamiltonian = HamiltonianSpec{1.0, 1.0, std::vector<double>{}, std::nullopt, std::nullopt};
    echo["hamiltonian"] = Json{{"mass", 1.0}, {"hbar", 1.0}, {"potential", Json{{"polynomial", Json::array()}}}};
    cfg.defaults.push_back("hamiltonian = free particle, mass 1, hbar 1");
  }
  if (needs("initial_state", dynamics || ex == Experiment::transform, dynamics || ex == Experiment::transform)) {
    cfg.initial_state = detail::read_initial_state(top.child("initial_state"), cfg.hamiltonian->hbar);
  }
  if (needs("evolution", dynamics, dynamics || ex == Experiment::transform)) {
    cfg.evolution = detail::read_evolution(top.child("evolution"));
  }
  if (needs("compare", ex == Experiment::compare, ex == Experiment::compare)) {
    detail::Section c = top.child("compare");
    const Json& list = c.raw("methods");
    if (!list.is_array() || list.size() < 2) throw ConfigError("compare.methods must list at least two methods");
    for (const auto& m : list) {
      if (!m.is_string()) throw ConfigError("compare.methods entries must be strings");
      const auto name = m.get<std::string>();
      if (name != "schrodinger_oracle") Method::parse(name);
      cfg.compare_methods.push_back(name);
    }
    echo["compare"]["methods"] = list;
    c.finish();
  }
  if (needs("smearing", ex == Experiment::smear, ex == Experiment::smear)) {
    cfg.smearing = detail::read_smearing(top.child("smearing"));
  }
  if (needs("measurement", ex == Experiment::measure, ex == Experiment::measure)) {
    cfg.measurement = detail::read_measurement(top.child("measurement"));
  }

  if (top.has("output_dir")) {
    cfg.output_dir = top.string("output_dir");
  } else {
    top.set_default("output_dir", cfg.output_dir);
  }
  if (top.has("seed")) {
    cfg.seed = top.unsigned_integer("seed");
  } else {
    top.set_default("seed", cfg.seed);
  }
  top.finish();

  // Semantic checks spanning sections.
  if (cfg.evolution) {
    const bool oracle_needed = cfg.evolution->method == "schrodinger_oracle" ||
                               std::find(cfg.compare_methods.begin(), cfg.compare_methods.end(), "schrodinger_oracle") !=
                                   cfg.compare_methods.end() ||
                               ex == Experiment::transform;
    if (oracle_needed && cfg.initial_state && !cfg.initial_state->has_wavefunction()) {
      throw ConfigError("initial_state.kind must be coherent or cat when the Schrodinger oracle runs");
    }
    if (ex == Experiment::evolve && cfg.evolution->method == "schrodinger_oracle") {
      throw ConfigError("evolution.method: use the transform experiment for the Schrodinger oracle");
    }
  }
  if (ex == Experiment::transform && cfg.initial_state && !cfg.initial_state->has_wavefunction()) {
    throw ConfigError("initial_state.kind must be coherent or cat for transform");
  }
  return cfg;
}

}  // namespace moyal
