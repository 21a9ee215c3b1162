#include <algorithm>
#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varreg/cli/experiment.hpp"

namespace varreg::cli {

namespace {

// Registers --a-b and --a_b so config files may use either spelling.
template <typename T>
CLI::Option* add(CLI::App& app, const std::string& key, T& target, const std::string& help) {
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  std::string names = "--" + dashed;
  if (dashed != key) names += ",--" + key;
  return app.add_option(names, target, help);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational regularization experiments: certified solves, Bregman iteration, "
               "estimate studies and risk certification"};
  app.name("varreg");
  app.set_config("--config", "", "INI file of key = value pairs (same keys as the long options)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(0, 1);

  ExperimentConfig cfg;
  std::string experiment;
  add(app, "experiment", experiment, "Experiment kind (alternative to the subcommand)");
  for (Experiment e : all_experiments()) {
    app.add_subcommand(std::string(to_string(e)), "Run the " + std::string(to_string(e)) + " experiment")
        ->fallthrough();
  }

  add(app, "operator", cfg.op.kind, "identity | dense | convolution | spectral | radon");
  add(app, "n", cfg.op.n, "Solution dimension (non-radon operators)");
  add(app, "m", cfg.op.m, "Rows of the random dense operator (0: n)");
  add(app, "kernel", cfg.op.kernel, "Convolution kernel")->delimiter(',');
  add(app, "spectrum_lo", cfg.op.spectrum_lo, "Smallest squared singular value (spectral)");
  add(app, "spectrum_hi", cfg.op.spectrum_hi, "Largest squared singular value (spectral)");
  add(app, "matrix_file", cfg.op.matrix_file, "Numeric CSV for the dense operator");
  add(app, "grid_n", cfg.op.grid_n, "Radon image side length");
  add(app, "angles", cfg.op.angles, "Radon angles (0: 2 grid_n)");
  add(app, "offsets", cfg.op.offsets, "Radon offsets per angle (0: 2 grid_n)");
  add(app, "regularizer", cfg.regularizer, "quadratic | l1 | tv");
  add(app, "alpha", cfg.alpha, "Regularization parameter");
  add(app, "alpha_grid", cfg.alpha_grid, "Comma-separated alpha values")->delimiter(',');
  add(app, "data", cfg.data, "Comma-separated data vector")->delimiter(',');
  add(app, "noise_sigma", cfg.noise_sigma, "Noise standard deviation");
  add(app, "delta0", cfg.delta0, "Initial noise level of the convergence schedule");
  add(app, "n_max", cfg.n_max, "Last halving index of the convergence schedule");
  add(app, "c", cfg.c, "alpha_n = c delta_n (0: 1/|z*|)");
  add(app, "alpha_rule", cfg.alpha_rule, "linear | quadratic");
  add(app, "samples", cfg.samples, "Rays per sampled design");
  add(app, "replicates", cfg.replicates, "Monte Carlo replicates");
  add(app, "instances", cfg.instances, "Certification instances");
  add(app, "iterations", cfg.iterations, "Bregman iterations");
  add(app, "seed", cfg.seed, "Top-level seed");
  add(app, "tol", cfg.tol, "Solver tolerance");
  add(app, "max_iters", cfg.max_iters, "Solver iteration cap");
  add(app, "out", cfg.out, "Output directory")->envname("VARREG_OUT_DIR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto subs = app.get_subcommands();
    if (!subs.empty()) {
      const std::string name = subs.front()->get_name();
      if (!experiment.empty() && experiment != name) {
        throw ConfigError("experiment", "'" + experiment + "' conflicts with subcommand '" + name + "'");
      }
      experiment = name;
    }
    if (experiment.empty()) throw ConfigError("experiment", "no experiment given");
    cfg.experiment = parse_experiment(experiment);
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "varreg: invalid configuration: " << e.what() << '\n';
    return 2;
  }

  try {
    const auto result = run_experiment(cfg);
    emit_report(result, cfg, cfg.out);
    write_summary(result, out);
    return result.passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    err << "varreg: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "varreg: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace varreg::cli
