// moyal-lab: batch front end for the phase-space lab.
//
//   moyal-lab <experiment> --config <path> [--output-dir <path>] [--seed <u64>]
//   moyal-lab identity-checks [--seed <u64>]
//
// Exit status: 0 success, 1 validation error, 2 numerical divergence,
// 3 identity check failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "moyal_lab/config.hpp"
#include "moyal_lab/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw moyal::ConfigError("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Validation failed before a run existed; still leave a summary when we know where.
void write_failure_summary(const std::string& dir, const std::string& experiment, const std::string& message) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  moyal::Json s;
  s["experiment"] = experiment;
  s["incomplete"] = true;
  s["error"] = message;
  s["wall_clock_seconds"] = 0.0;
  std::ofstream(std::filesystem::path(dir) / "summary.json") << s.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wigner-function phase-space lab"};
  std::string experiment;
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("experiment", experiment, "evolve | compare | transform | smear | measure | identity-checks")
      ->required();
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--output-dir", output_dir, "overrides output_dir from the config");
  app.add_option("--seed", seed, "overrides seed from the config");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ex = moyal::parse_experiment(experiment);
    std::string text;
    if (config_path.empty()) {
      if (ex != moyal::Experiment::identity_checks) throw moyal::ConfigError("--config is required for " + experiment);
      text = "{}";
    } else {
      text = read_file(config_path);
    }

    // Command-line overrides are applied to the document so they are echoed
    // in the resolved config like every other value.
    auto doc = moyal::Json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) {
      if (!output_dir.empty()) doc["output_dir"] = output_dir;
      if (seed) doc["seed"] = *seed;
      text = doc.dump();
    }
    const auto cfg = moyal::parse_config(text, ex);
    for (const auto& d : cfg.defaults) std::cerr << "default: " << d << '\n';
    const auto outcome = moyal::run(cfg, std::cout);
    return outcome.exit_code;
  } catch (const moyal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_failure_summary(output_dir, experiment, e.what());
    return moyal::exit_code::validation;
  }
}
