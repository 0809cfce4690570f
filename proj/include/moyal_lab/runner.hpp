#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moyal_lab/config.hpp"
#include "moyal_lab/errors.hpp"
#include "moyal_lab/grid_io.hpp"
#include "moyal_lab/measurement.hpp"
#include "moyal_lab/moyal_evolution.hpp"
#include "moyal_lab/phase_space.hpp"
#include "moyal_lab/random.hpp"
#include "moyal_lab/schrodinger.hpp"
#include "moyal_lab/smearing.hpp"
#include "moyal_lab/warnings.hpp"

namespace moyal {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 1;
inline constexpr int divergence = 2;
inline constexpr int check_failed = 3;
}  // namespace exit_code

// ---------------------------------------------------------------------------
// Property suites shared by the identity-checks experiment and the tests.

struct CheckLine {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed() const { return value <= tolerance; }
};

/// sin/sinh substitution over `fields` seeded random fields and each xi.
inline std::vector<CheckLine> substitution_suite(std::uint64_t seed, std::size_t fields = 20,
                                                 std::vector<double> xis = {0.1, 0.25, 0.5, 1.0}) {
  const auto g = make_grid(128, 8, {-8.0, 8.0}, {-1.0, 1.0});
  std::vector<CheckLine> out;
  for (std::size_t f = 0; f < fields; ++f) {
    const RealMatrix field = random_bandlimited_field(g, seed + f, 3);
    for (double xi : xis) {
      const auto r = check_sin_sinh_substitution(g, field, xi);
      char name[96];
      std::snprintf(name, sizeof name, "substitution seed=%llu xi=%g", static_cast<unsigned long long>(seed + f), xi);
      out.push_back({name, r.max_abs_difference, r.tolerance});
    }
  }
  return out;
}

/// All four methods on a quadratic Hamiltonian, pairwise L-infinity distance.
inline std::vector<CheckLine> quadratic_collapse_suite(std::uint64_t seed, std::size_t states = 5,
                                                       const RhsObserver& on_rhs = {}) {
  const auto g = make_grid(128, 128, {-8.0, 8.0}, {-8.0, 8.0});
  const auto h = Hamiltonian::harmonic();
  const std::vector<Method> methods = {Method::liouville(), Method::moyal_spectral(), Method::moyal_truncated(1),
                                       Method::sinh_truncated(1)};
  std::vector<WignerGenerator> ops;
  for (const auto& m : methods) ops.emplace_back(h, g, m);
  std::vector<CheckLine> out;
  for (std::size_t s = 0; s < states; ++s) {
    const auto w = random_bandlimited_state(g, seed + s);
    std::vector<RealMatrix> rhs;
    for (const auto& op : ops) {
      rhs.push_back(op.apply(w.values));
      if (on_rhs) on_rhs(RhsField{g, rhs.back()});
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < rhs.size(); ++a)
      for (std::size_t b = a + 1; b < rhs.size(); ++b) worst = std::max(worst, max_abs_diff(rhs[a], rhs[b]));
    char name[96];
    std::snprintf(name, sizeof name, "quadratic_collapse seed=%llu", static_cast<unsigned long long>(seed + s));
    out.push_back({name, worst, 1e-8});
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace runner_detail {

namespace fs = std::filesystem;

inline std::string dir_name(const std::string& method) {
  std::string out;
  for (char c : method) {
    if (c == '(') {
      out += '_';
    } else if (c != ')') {
      out += c;
    }
  }
  return out;
}

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

class ObservablesCsv {
 public:
  ObservablesCsv(const fs::path& path, double hbar) : out_(path), hbar_(hbar) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "t,norm,mean_x,mean_p,var_x,var_p,purity\n";
  }
  void row(const WignerState& w) {
    const Moments m = moments(w);
    out_ << io::format_double(w.time) << ',' << io::format_double(norm(w)) << ',' << io::format_double(m.mean_x) << ','
         << io::format_double(m.mean_p) << ',' << io::format_double(m.var_x) << ',' << io::format_double(m.var_p) << ','
         << io::format_double(purity(w, hbar_)) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
  double hbar_;
};

class ComparisonCsv {
 public:
  explicit ComparisonCsv(const fs::path& path) : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "t,l2_distance\n";
  }
  void row(double t, double d) {
    out_ << io::format_double(t) << ',' << io::format_double(d) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline fs::path snapshot_path(const fs::path& dir, std::size_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "snap_%08zu.wig", step);
  return dir / name;
}

inline void write_manifest(const fs::path& dir, double dt, std::size_t steps, const std::string& method,
                           std::size_t record_every, double hbar) {
  Json m;
  m["dt"] = dt;
  m["steps"] = steps;
  m["method"] = method;
  m["record_every"] = record_every;
  m["hbar"] = hbar;
  write_json(dir / "manifest.json", m);
}

struct InitialState {
  WignerState wigner;
  std::optional<WaveFunction> wavefunction;
  std::optional<TransformReport> transform;
};

inline InitialState initial_state(const InitialStateSpec& s, const GridSpec& gs, double hbar) {
  const auto g = gs.build();
  if (s.kind == InitialKind::gaussian) return {gaussian_wigner(g, s.x0, s.p0, s.sigma_x, s.sigma_p, hbar), {}, {}};
  WaveFunction psi = s.kind == InitialKind::coherent
                         ? coherent_wavefunction(gs.nx, gs.x_range, s.x0, s.p0, s.sigma_x, hbar)
                         : cat_wavefunction(gs.nx, gs.x_range, s.x0, s.p0, s.sigma_x, s.parity, hbar);
  TransformReport rep;
  auto w = wigner_transform(psi, gs.np, gs.p_range, hbar, &rep);
  return {std::move(w), std::move(psi), rep};
}

/// One trajectory written to `dir`; optional comparison against a reference
/// trajectory already on disk.
struct TrajectoryRun {
  std::size_t steps_done = 0;
  double max_rhs_integral = 0.0;
  std::optional<WignerState> final_state;
  double final_l2 = std::nan("");
};

inline TrajectoryRun run_trajectory(const std::string& method, const InitialState& init, const Hamiltonian& h,
                                    std::size_t steps, double dt, std::size_t record_every, const GridSpec& gs,
                                    const fs::path& dir, const std::optional<fs::path>& reference,
                                    const std::vector<fs::path>& comparison_files) {
  fs::create_directories(dir);
  write_manifest(dir, dt, steps, method, record_every, h.hbar());
  ObservablesCsv obs(dir / "observables.csv", h.hbar());
  std::vector<std::unique_ptr<ComparisonCsv>> cmp;
  for (const auto& p : comparison_files) cmp.push_back(std::make_unique<ComparisonCsv>(p));

  TrajectoryRun run;
  auto on_snapshot = [&](std::size_t n, const WignerState& w) {
    io::write_grid_dump(snapshot_path(dir, n), w);
    obs.row(w);
    if (reference) {
      const auto ref = io::read_grid_dump(snapshot_path(*reference, n));
      run.final_l2 = relative_l2(w.values, ref.values);
      for (auto& c : cmp) c->row(w.time, run.final_l2);
    }
    run.steps_done = n;
    run.final_state = w;
  };

  if (method == "schrodinger_oracle") {
    if (!init.wavefunction) throw ConfigError("the Schrodinger oracle needs a coherent or cat initial state");
    evolve_oracle(*init.wavefunction, h, EvolutionConfig{dt, steps, Method::moyal_spectral(), record_every}, gs.np,
                  gs.p_range, on_snapshot);
  } else {
    EvolveHooks hooks;
    hooks.keep_snapshots = false;
    hooks.on_snapshot = on_snapshot;
    hooks.on_rhs = [&](const RhsField& f) { run.max_rhs_integral = std::max(run.max_rhs_integral, std::abs(f.integral())); };
    evolve(init.wigner, h, EvolutionConfig{dt, steps, Method::parse(method), record_every}, hooks);
  }
  return run;
}

inline Json stability_json(const Hamiltonian& h, const PhaseSpaceGrid& g, const std::string& method, double dt) {
  Json j;
  if (method == "schrodinger_oracle") return j;
  const auto b = stability_bound(h, g, Method::parse(method));
  j["cfl"] = b.cfl;
  j["spectral"] = b.spectral;
  j["dt_max"] = b.dt_max();
  if (dt > b.dt_max()) {
    warn("evolution.dt = " + io::format_double(dt) + " exceeds the stability bound " + io::format_double(b.dt_max()) +
         " for " + method);
  }
  return j;
}

}  // namespace runner_detail

struct RunOutcome {
  int exit_code = exit_code::ok;
  Json summary;
};

/// Executes one experiment, writing all artifacts and summary.json under
/// cfg.output_dir. Divergence and validation failures are reported through the
/// exit code; the summary is written in every case.
inline RunOutcome run(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  using namespace runner_detail;
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);

  RunOutcome result;
  Json& summary = result.summary;
  summary["experiment"] = to_string(cfg.experiment);
  summary["config"] = cfg.resolved;
  summary["defaults_applied"] = cfg.defaults;
  summary["incomplete"] = true;
  Json diag = Json::object();

  ScopedWarningCapture warnings;
  try {
    switch (cfg.experiment) {
      case Experiment::evolve:
      case Experiment::compare: {
        const auto& gs = *cfg.grid;
        const auto g = gs.build();
        const auto h = cfg.hamiltonian->build(gs);
        const auto init = initial_state(*cfg.initial_state, gs, h.hbar());
        const auto [steps, dt] = cfg.evolution->schedule();
        diag["steps"] = steps;
        diag["dt_effective"] = dt;
        diag["initial_norm"] = norm(init.wigner);

        std::vector<std::string> methods =
            cfg.experiment == Experiment::evolve ? std::vector<std::string>{cfg.evolution->method} : cfg.compare_methods;
        std::optional<fs::path> reference;
        for (std::size_t i = 0; i < methods.size(); ++i) {
          const auto& m = methods[i];
          Json md;
          md["stability"] = stability_json(h, g, m, dt);
          const fs::path dir = cfg.experiment == Experiment::evolve ? out / "trajectory" : out / dir_name(m);
          std::vector<fs::path> cmp_files;
          if (reference) cmp_files.push_back(dir / "comparison.csv");
          if (i == 1) cmp_files.push_back(out / "comparison.csv");
          try {
            const auto run = run_trajectory(m, init, h, steps, dt, cfg.evolution->record_every, gs, dir, reference,
                                            cmp_files);
            const auto& fin = *run.final_state;
            md["final_time"] = fin.time;
            md["final_norm"] = norm(fin);
            md["norm_drift"] = std::abs(norm(fin) - norm(init.wigner));
            md["final_purity"] = purity(fin, h.hbar());
            md["recurrence_linf"] = max_abs_diff(fin.values, init.wigner.values);
            if (m != "schrodinger_oracle") md["max_rhs_integral"] = run.max_rhs_integral;
            if (reference) md["final_l2_distance"] = run.final_l2;
          } catch (const DivergenceError& e) {
            md["divergence"] = {{"message", e.what()}, {"step", e.step()}, {"last_good_snapshot", e.last_good_snapshot()}};
            diag[m] = md;
            throw;
          }
          diag[m] = md;
          log << m << ": done (" << steps << " steps)\n";
          if (i == 0) reference = dir;
        }
        break;
      }

      case Experiment::transform: {
        const auto& gs = *cfg.grid;
        const double hbar = cfg.hamiltonian->hbar;
        const auto init = initial_state(*cfg.initial_state, gs, hbar);
        const auto& rep = *init.transform;
        diag["max_imag_residue"] = rep.max_imag_residue;
        diag["norm"] = rep.norm;
        diag["outer_mass"] = rep.outer_mass;
        diag["leaked_mass"] = rep.leaked_mass;
        diag["purity"] = purity(init.wigner, hbar);
        const auto rho = init.wavefunction->density();
        const auto marg = marginal(init.wigner, Axis::position);
        double worst = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i) worst = std::max(worst, std::abs(marg.values[i] - rho[i]));
        diag["position_marginal_error"] = worst;
        io::write_grid_dump(out / "wigner.wig", init.wigner);
        if (cfg.evolution) {
          const auto h = cfg.hamiltonian->build(gs);
          const auto [steps, dt] = cfg.evolution->schedule();
          diag["steps"] = steps;
          diag["dt_effective"] = dt;
          const auto run = run_trajectory("schrodinger_oracle", init, h, steps, dt, cfg.evolution->record_every, gs,
                                          out / "trajectory", std::nullopt, {});
          diag["final_norm"] = norm(*run.final_state);
          diag["final_purity"] = purity(*run.final_state, hbar);
        } else {
          ObservablesCsv obs(out / "observables.csv", hbar);
          obs.row(init.wigner);
        }
        break;
      }

      case Experiment::smear: {
        const auto& s = *cfg.smearing;
        const auto g = cfg.grid->build();
        const auto dist = make_distribution(s.sigma_xi, s.hbar);
        const auto ens = sample(dist, s.n, cfg.seed);
        io::write_ensemble(out / "ensemble", ens);
        const auto density = smeared_density(s.x0, s.p0, ens, g);
        io::write_grid_dump(out / "density.wig", density);
        const auto st = statistics(ens);
        const double target = 0.25 * s.hbar * s.hbar;
        diag["sigma_eta"] = dist.sigma_eta;
        diag["mean_xi"] = st.mean_xi;
        diag["mean_eta"] = st.mean_eta;
        diag["variance_product"] = st.variance_product();
        diag["variance_product_relative_error"] = std::abs(st.variance_product() - target) / target;
        ScopedWarningCapture quiet;  // reference Gaussian may be sub-grid; its warnings are not the user's
        const auto analytic = gaussian_wigner(g, s.x0, s.p0, dist.sigma_xi, dist.sigma_eta, s.hbar);
        diag["l1_vs_gaussian"] = l1_distance(density, analytic);
        break;
      }

      case Experiment::measure: {
        const auto& m = *cfg.measurement;
        const MeasurementModel model{m.n_atoms, m.tau_micro, m.tau_samples};
        TwoCellSetup setup;
        setup.weight_left = m.weight_left;
        setup.nx = m.nx;
        const auto report = debroglie_run(model, m.separation, cfg.seed, setup);
        Json rj = report.to_json();
        write_json(out / "report.json", rj);
        diag["report"] = rj;
        diag["annotations"] = report.annotations;

        setup.separation = m.separation;
        const auto probs = cell_probabilities(two_cell_state(setup), CellPartition{0.0});
        std::ofstream csv(out / "outcomes.csv");
        if (!csv) throw Error("cannot write outcomes.csv");
        csv << "trial,seed,outcome\n";
        std::size_t left = 0;
        for (std::size_t t = 0; t < m.trials; ++t) {
          const std::uint64_t s = cfg.seed + t;
          const Cell c = draw_outcome(probs, s);
          if (c == Cell::left) ++left;
          csv << t << ',' << s << ',' << to_string(c) << '\n';
        }
        const double n = static_cast<double>(m.trials);
        diag["trials"] = m.trials;
        diag["left_frequency"] = static_cast<double>(left) / n;
        diag["left_probability"] = probs.left;
        diag["binomial_sigma"] = std::sqrt(probs.left * probs.right / n);
        break;
      }

      case Experiment::identity_checks: {
        bool all = true;
        auto emit = [&](const std::vector<CheckLine>& lines) {
          for (const auto& l : lines) {
            log << (l.passed() ? "PASS " : "FAIL ") << l.name << " value=" << io::format_double(l.value)
                << " tol=" << l.tolerance << '\n';
            all = all && l.passed();
          }
        };
        emit(substitution_suite(cfg.seed));
        emit(quadratic_collapse_suite(cfg.seed));
        diag["all_passed"] = all;
        if (!all) result.exit_code = exit_code::check_failed;
        break;
      }
    }
    summary["incomplete"] = false;
  } catch (const DivergenceError& e) {
    result.exit_code = exit_code::divergence;
    summary["error"] = e.what();
    summary["divergence_step"] = e.step();
    log << "divergence: " << e.what() << '\n';
  } catch (const Error& e) {
    result.exit_code = exit_code::validation;
    summary["error"] = e.what();
    log << "error: " << e.what() << '\n';
  }

  summary["diagnostics"] = diag;
  summary["warnings"] = warnings.messages();
  summary["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_json(out / "summary.json", summary);
  for (const auto& w : warnings.messages()) log << "warning: " << w << '\n';
  return result;
}

}  // namespace moyal
