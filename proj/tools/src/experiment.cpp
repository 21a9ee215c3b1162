#include "varreg/cli/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include "varreg/bregman_iteration.hpp"
#include "varreg/estimates.hpp"
#include "varreg/operators.hpp"
#include "varreg/regularizers.hpp"
#include "varreg/risk.hpp"
#include "varreg/rng.hpp"
#include "varreg/solvers.hpp"

namespace varreg::cli {

namespace {

using csv::format_double;

const std::vector<std::pair<Experiment, std::string_view>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string_view>> names{
      {Experiment::solve, "solve"},
      {Experiment::bregman, "bregman"},
      {Experiment::debias, "debias"},
      {Experiment::convergence, "convergence"},
      {Experiment::bias_variance, "bias_variance"},
      {Experiment::operator_error, "operator_error"},
      {Experiment::risk_theorem, "risk_theorem"},
      {Experiment::radon_demo, "radon_demo"}};
  return names;
}

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

int effective_angles(const OperatorSpec& op) { return op.angles > 0 ? op.angles : 2 * op.grid_n; }
int effective_offsets(const OperatorSpec& op) { return op.offsets > 0 ? op.offsets : 2 * op.grid_n; }

Index operator_rows(const OperatorSpec& op) {
  if (op.kind == "radon") return static_cast<Index>(effective_angles(op)) * effective_offsets(op);
  if (op.kind == "dense" && op.matrix_file.empty()) return op.m > 0 ? op.m : op.n;
  return op.n;
}

bool is_risk(Experiment e) { return e == Experiment::operator_error || e == Experiment::risk_theorem; }

}  // namespace

std::string_view to_string(Experiment e) {
  for (const auto& [kind, name] : experiment_names()) {
    if (kind == e) return name;
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view text) {
  for (const auto& [kind, name] : experiment_names()) {
    if (name == text) return kind;
  }
  throw ConfigError("experiment", "unknown experiment '" + std::string(text) + "'");
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> all = [] {
    std::vector<Experiment> v;
    for (const auto& entry : experiment_names()) v.push_back(entry.first);
    return v;
  }();
  return all;
}

int ExperimentResult::pass_count() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const CheckLine& c) {
    return c.status == Status::pass;
  }));
}

int ExperimentResult::fail_count() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const CheckLine& c) {
    return c.status == Status::fail;
  }));
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> kinds{"identity", "dense", "convolution", "spectral", "radon"};
  if (std::find(kinds.begin(), kinds.end(), op.kind) == kinds.end()) {
    throw ConfigError("operator", "unknown operator kind '" + op.kind + "'");
  }
  if (op.n < 1) throw ConfigError("n", "must be >= 1");
  if (op.m < 0) throw ConfigError("m", "must be >= 0");
  if (!positive(op.spectrum_lo) || !positive(op.spectrum_hi) || op.spectrum_lo > op.spectrum_hi) {
    throw ConfigError("spectrum_lo", "need 0 < spectrum_lo <= spectrum_hi");
  }
  if (op.grid_n < 2) throw ConfigError("grid_n", "must be >= 2");
  if (op.angles < 0) throw ConfigError("angles", "must be >= 0");
  if (op.offsets < 0) throw ConfigError("offsets", "must be >= 0");
  try {
    parse_regularizer_kind(regularizer);
  } catch (const std::exception&) {
    throw ConfigError("regularizer", "unknown regularizer '" + regularizer + "'");
  }
  if (!positive(alpha)) throw ConfigError("alpha", "must be positive and finite");
  for (double a : alpha_grid) {
    if (!positive(a)) throw ConfigError("alpha_grid", "entries must be positive and finite");
  }
  for (double x : data) {
    if (!std::isfinite(x)) throw ConfigError("data", "entries must be finite");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma", "must be >= 0");
  if (!positive(delta0)) throw ConfigError("delta0", "must be positive");
  if (n_max < 0) throw ConfigError("n_max", "must be >= 0");
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("c", "must be >= 0 (0 selects 1/|z*|)");
  if (alpha_rule != "linear" && alpha_rule != "quadratic") {
    throw ConfigError("alpha_rule", "must be 'linear' or 'quadratic'");
  }
  if (samples < 1) throw ConfigError("samples", "must be >= 1");
  if (replicates < 2) throw ConfigError("replicates", "must be >= 2");
  if (instances < 1) throw ConfigError("instances", "must be >= 1");
  if (iterations < 1) throw ConfigError("iterations", "must be >= 1");
  if (!positive(tol)) throw ConfigError("tol", "must be positive");
  if (max_iters < 1) throw ConfigError("max_iters", "must be >= 1");
  if (out.empty()) throw ConfigError("out", "must not be empty");

  const RegularizerKind reg = parse_regularizer_kind(regularizer);
  if (experiment == Experiment::debias && reg != RegularizerKind::l1) {
    throw ConfigError("regularizer", "debias requires l1");
  }
  if (experiment == Experiment::radon_demo && op.kind != "radon") {
    throw ConfigError("operator", "radon_demo requires the radon operator");
  }
  if (experiment == Experiment::bias_variance && alpha_grid.size() < 3) {
    throw ConfigError("alpha_grid", "bias_variance needs at least 3 values");
  }
  if (is_risk(experiment) && operator_rows(op) < 8 * samples) {
    throw ConfigError("samples", "the population grid needs at least 8 rays per sample (" +
                                     std::to_string(operator_rows(op)) + " rays for " + std::to_string(samples) +
                                     " samples)");
  }
}

namespace {

struct Setup {
  LinearMap map;
  Regularizer reg;
  SolverConfig solver;
};

LinearMap build_operator(const ExperimentConfig& cfg) {
  const OperatorSpec& op = cfg.op;
  const std::uint64_t seed = substream_seed(cfg.seed, "operator");
  if (op.kind == "identity") return make_identity(op.n);
  if (op.kind == "dense") {
    if (!op.matrix_file.empty()) {
      std::ifstream in(op.matrix_file);
      if (!in) throw ConfigError("matrix_file", "cannot open '" + op.matrix_file + "'");
      return make_dense(csv::read_matrix(in));
    }
    const Index m = op.m > 0 ? op.m : op.n;
    Rng rng(seed);
    DenseMatrix a(m, op.n);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
    return make_dense(a / std::sqrt(static_cast<double>(m)));
  }
  if (op.kind == "convolution") {
    const std::vector<double> kernel = op.kernel.empty() ? std::vector<double>{0.25, 0.5, 0.25} : op.kernel;
    return make_convolution(kernel, op.n);
  }
  if (op.kind == "spectral") {
    std::vector<double> s(static_cast<std::size_t>(op.n));
    for (Index i = 0; i < op.n; ++i) {
      const double t = op.n > 1 ? static_cast<double>(i) / static_cast<double>(op.n - 1) : 0.0;
      s[static_cast<std::size_t>(i)] = std::sqrt(op.spectrum_hi * std::pow(op.spectrum_lo / op.spectrum_hi, t));
    }
    return make_spectral(s, seed);
  }
  return make_radon(RadonGeometry::uniform(op.grid_n, effective_angles(op), effective_offsets(op)));
}

Regularizer build_regularizer(const ExperimentConfig& cfg, const LinearMap& map) {
  switch (parse_regularizer_kind(cfg.regularizer)) {
    case RegularizerKind::quadratic: return Regularizer::quadratic();
    case RegularizerKind::l1: return Regularizer::l1();
    case RegularizerKind::tv_aniso:
      if (cfg.op.kind == "radon") return Regularizer::tv_2d(cfg.op.grid_n, cfg.op.grid_n);
      return Regularizer::tv_1d(map.in_dim());
  }
  throw ConfigError("regularizer", "unsupported");
}

Setup make_setup(const ExperimentConfig& cfg) {
  LinearMap map = build_operator(cfg);
  Regularizer reg = build_regularizer(cfg, map);
  SolverConfig solver;
  solver.tol = cfg.tol;
  solver.max_iters = cfg.max_iters;
  solver.seed = cfg.seed;
  return {std::move(map), std::move(reg), solver};
}

// Data for single-problem experiments: explicit, or a source instance plus noise.
struct Problem {
  DataVector data;
  std::optional<SourceInstance> instance;
  double noise_norm = 0.0;
};

Problem make_problem(const ExperimentConfig& cfg, const Setup& s) {
  Problem p;
  if (!cfg.data.empty()) {
    if (static_cast<Index>(cfg.data.size()) != s.map.out_dim()) {
      throw ConfigError("data", "expected " + std::to_string(s.map.out_dim()) + " values, got " +
                                    std::to_string(cfg.data.size()));
    }
    p.data = Eigen::Map<const Vector>(cfg.data.data(), static_cast<Index>(cfg.data.size()));
    return p;
  }
  p.instance = construct_source_instance(s.map, s.reg, substream_seed(cfg.seed, "instance"));
  const Vector noise = cfg.noise_sigma * Rng(cfg.seed, "noise").gaussian_vector(s.map.out_dim());
  p.noise_norm = noise.norm();
  p.data = p.instance->v_star + noise;
  return p;
}

CheckLine check(bool ok, std::string id, std::string detail) {
  return {ok ? Status::pass : Status::fail, std::move(id), std::move(detail)};
}

CheckLine info(std::string id, std::string detail) { return {Status::info, std::move(id), std::move(detail)}; }

std::string bound_detail(const EstimateReport& r) {
  return "lhs=" + format_double(r.lhs) + " rhs=" + format_double(r.rhs) + " slack=" + format_double(r.slack);
}

ExperimentResult run_solve(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const Problem prob = make_problem(cfg, s);
  ExperimentResult res;
  const auto sol = solve_variational(s.map, prob.data, cfg.alpha, s.reg, s.solver);
  csv::Table table({"index", "u_alpha", "p_alpha"});
  for (Index i = 0; i < sol.u_alpha.size(); ++i) {
    table.add_row({static_cast<long long>(i), sol.u_alpha[i], sol.p_alpha[i]});
  }
  res.tables.emplace_back("solution", std::move(table));
  res.checks.push_back(check(sol.optimality_defect <= sol.defect_target, "optimality",
                             "defect=" + format_double(sol.optimality_defect) +
                                 " target=" + format_double(sol.defect_target) + " method=" + sol.method));
  res.metrics = {{"objective", objective(s.map, prob.data, s.reg, sol.u_alpha, cfg.alpha)},
                 {"J_value", sol.J_value},
                 {"optimality_defect", sol.optimality_defect},
                 {"iterations", static_cast<double>(sol.iterations)}};
  return res;
}

ExperimentResult run_bregman(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const Problem prob = make_problem(cfg, s);
  BregmanOptions opts;
  opts.iterations = cfg.iterations;
  if (prob.instance) opts.reference = prob.instance->u_star;
  if (prob.instance && cfg.noise_sigma > 0.0) opts.noise_level = prob.noise_norm;
  const auto trace = bregman_iterate(s.map, prob.data, cfg.alpha, s.reg, opts, s.solver);
  ExperimentResult res;
  csv::Table table({"k", "residual", "J_value", "bregman_to_ref"});
  bool monotone = true;
  bool ref_monotone = true;
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& st = trace.steps[k];
    csv::Cell ref = st.bregman_to_ref ? csv::Cell{*st.bregman_to_ref} : csv::Cell{std::string()};
    table.add_row({static_cast<long long>(st.k), st.residual, st.J_value, ref});
    if (k > 0) {
      const auto& prev = trace.steps[k - 1];
      monotone = monotone && st.residual <= prev.residual + 1e-10 * (1.0 + prev.residual);
      if (st.bregman_to_ref && prev.bregman_to_ref) {
        ref_monotone = ref_monotone && *st.bregman_to_ref <= *prev.bregman_to_ref + 10.0 * cfg.tol;
      }
    }
  }
  res.tables.emplace_back("bregman", std::move(table));
  res.checks.push_back(check(monotone, "residual_monotone",
                             "final residual=" + format_double(trace.steps.back().residual)));
  if (opts.reference) {
    res.checks.push_back(info("reference_distance", ref_monotone ? "nonincreasing" : "not monotone"));
  }
  if (opts.noise_level) {
    res.checks.push_back(info("discrepancy_stop", trace.stopped_by_discrepancy
                                                      ? "stopped at k=" + std::to_string(trace.steps.back().k)
                                                      : "not reached"));
  }
  res.metrics = {{"steps", static_cast<double>(trace.steps.size() - 1)},
                 {"final_residual", trace.steps.back().residual}};
  return res;
}

ExperimentResult run_debias(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const Problem prob = make_problem(cfg, s);
  const auto r = debias_two_step(s.map, prob.data, cfg.alpha, s.reg, s.solver);
  ExperimentResult res;
  csv::Table table({"index", "u_alpha", "u_debiased"});
  for (Index i = 0; i < r.u_debiased.size(); ++i) {
    table.add_row({static_cast<long long>(i), r.first_step.u_alpha[i], r.u_debiased[i]});
  }
  res.tables.emplace_back("debias", std::move(table));
  if (r.empty_support) res.checks.push_back(info("support", "empty: u_alpha = 0, refit returns 0"));
  res.checks.push_back(check(r.residual_debiased <= r.residual_first + 1e-10, "residual",
                             "first=" + format_double(r.residual_first) +
                                 " debiased=" + format_double(r.residual_debiased)));
  res.checks.push_back(check(r.bregman_to_first_step <= 1e-8, "zero_bregman",
                             "d=" + format_double(r.bregman_to_first_step)));
  res.metrics = {{"support_size", static_cast<double>(r.support.size())},
                 {"residual_first", r.residual_first},
                 {"residual_debiased", r.residual_debiased}};
  if (prob.instance) res.metrics.emplace_back("error_to_truth", (r.u_debiased - prob.instance->u_star).norm());
  return res;
}

ExperimentResult run_convergence(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const auto inst = construct_source_instance(s.map, s.reg, substream_seed(cfg.seed, "instance"));
  ConvergenceOptions opts;
  opts.delta0 = cfg.delta0;
  opts.n_max = cfg.n_max;
  opts.c = cfg.c > 0.0 ? cfg.c : 1.0 / inst.z_star.norm();
  opts.rule = cfg.alpha_rule == "quadratic" ? AlphaRule::quadratic : AlphaRule::linear;
  opts.seed = cfg.seed;
  opts.assert_rate = s.reg.kind() == RegularizerKind::quadratic;
  const auto r = convergence_study(s.map, s.reg, inst, opts, s.solver);
  ExperimentResult res;
  csv::Table table({"n", "delta", "alpha", "bregman", "bound", "output_err", "J_value"});
  for (const auto& row : r.rows) {
    table.add_row({static_cast<long long>(row.n), row.delta, row.alpha, row.bregman, row.bound, row.output_err,
                   row.J_value});
    res.checks.push_back(check(row.within_bound, "n=" + std::to_string(row.n),
                               "bregman=" + format_double(row.bregman) + " bound=" + format_double(row.bound)));
  }
  res.tables.emplace_back("convergence", std::move(table));
  const std::string ratio = "fitted ratio per halving=" + format_double(r.fitted_ratio);
  if (!r.convergence_asserted) {
    res.checks.push_back(info("convergence", "alpha_n = delta_n^2 violates delta^2/alpha -> 0; not asserted; " + ratio));
  } else {
    if (opts.assert_rate) {
      res.checks.push_back(check(r.rate_in_band, "rate", ratio + " band=[0.4,0.6]"));
    } else {
      res.checks.push_back(info("rate", ratio));
    }
    res.checks.push_back(check(r.rows.back().bregman <= r.rows.front().bregman, "decrease",
                               "first=" + format_double(r.rows.front().bregman) +
                                   " last=" + format_double(r.rows.back().bregman)));
    res.checks.push_back(check(r.J_converged, "J_limit",
                               "|J(u_n)-J(u*)|=" + format_double(r.J_gap_final) + " J(u*)=" + format_double(r.J_star)));
  }
  res.metrics = {{"c", opts.c}, {"fitted_ratio", r.fitted_ratio}, {"J_star", r.J_star}, {"J_gap_final", r.J_gap_final}};
  return res;
}

ExperimentResult run_bias_variance(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const auto inst = construct_source_instance(s.map, s.reg, substream_seed(cfg.seed, "instance"));
  BiasVarianceOptions opts;
  opts.noise_sigma = cfg.noise_sigma;
  opts.alpha_grid = cfg.alpha_grid;
  opts.replicates = cfg.replicates;
  opts.seed = cfg.seed;
  const auto r = bias_variance_study(s.map, s.reg, inst, opts, s.solver);
  ExperimentResult res;
  csv::Table table({"alpha", "mean_bregman", "stderr", "bound"});
  for (const auto& row : r.rows) {
    table.add_row({row.alpha, row.mean_bregman, row.stderr_bregman, row.bound});
    res.checks.push_back(check(row.holds, "alpha=" + format_double(row.alpha),
                               "mean=" + format_double(row.mean_bregman) + " stderr=" +
                                   format_double(row.stderr_bregman) + " bound=" + format_double(row.bound)));
  }
  res.tables.emplace_back("bias_variance", std::move(table));
  res.checks.push_back(check(r.noise_moment_ok, "noise_moment",
                             "mean |v-v*|^2=" + format_double(r.noise_energy_mean) +
                                 " stderr=" + format_double(r.noise_energy_stderr)));
  res.checks.push_back(info("u_shape", std::string(r.interior_minimum ? "interior" : "boundary") +
                                           " minimum at alpha=" + format_double(r.rows[r.argmin].alpha)));
  res.metrics = {{"argmin_alpha", r.rows[r.argmin].alpha},
                 {"interior_minimum", r.interior_minimum ? 1.0 : 0.0},
                 {"noise_energy_mean", r.noise_energy_mean}};
  return res;
}

// Relative change of the population mean of (F u)^2 when the ray grid is refined twofold.
double radon_quadrature_error(const ExperimentConfig& cfg, const Vector& u) {
  const auto coarse = RadonGeometry::uniform(cfg.op.grid_n, effective_angles(cfg.op), effective_offsets(cfg.op));
  const auto fine = RadonGeometry::uniform(cfg.op.grid_n, 2 * effective_angles(cfg.op), 2 * effective_offsets(cfg.op));
  const double a = make_radon(coarse).apply(u).squaredNorm() / static_cast<double>(coarse.out_dim());
  const double b = make_radon(fine).apply(u).squaredNorm() / static_cast<double>(fine.out_dim());
  return b > 0.0 ? std::abs(a - b) / b : 0.0;
}

ExperimentResult run_risk(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const LinearMap population = make_sampled(s.map, SampledDesign::full(s.map.out_dim()));
  const bool theorem = cfg.experiment == Experiment::risk_theorem;
  ExperimentResult res;
  csv::Table table({"instance", "lhs", "rhs", "slack", "holds"});
  csv::Table terms({"instance", "term", "value"});
  std::optional<Vector> first_truth;
  for (int i = 0; i < cfg.instances; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const std::string id = "instance " + std::to_string(i);
    const double alpha = cfg.alpha_grid.empty() ? cfg.alpha
                                                : cfg.alpha_grid[static_cast<std::size_t>(i) % cfg.alpha_grid.size()];
    try {
      const auto inst = construct_source_instance(population, s.reg, substream_seed(cfg.seed, "instance", idx));
      if (!first_truth) first_truth = inst.u_star;
      const auto design =
          draw_design(s.map.out_dim(), cfg.samples, cfg.noise_sigma, substream_seed(cfg.seed, "design", idx));
      const auto pair = make_risk_pair(s.map, inst.u_star, design, cfg.noise_sigma);
      const auto r = theorem ? check_risk_theorem(pair, s.reg, inst.u_star, inst.p_star, inst.z_star, alpha, s.solver)
                             : check_operator_error_estimate(pair, s.reg, inst, alpha, s.solver);
      table.add_row({static_cast<long long>(i), r.lhs, r.rhs, r.slack, r.holds});
      terms.add_row({static_cast<long long>(i), std::string("alpha"), alpha});
      for (const auto& [name, value] : r.components) terms.add_row({static_cast<long long>(i), name, value});
      res.checks.push_back(check(r.holds, id, bound_detail(r)));
    } catch (const std::exception& e) {
      res.checks.push_back(check(false, id, std::string("error: ") + e.what()));
    }
  }
  const std::string stem = theorem ? "risk_theorem" : "operator_error";
  res.tables.emplace_back(stem, std::move(table));
  res.tables.emplace_back(stem + "_terms", std::move(terms));
  res.metrics = {{"population_rays", static_cast<double>(s.map.out_dim())},
                 {"samples", static_cast<double>(cfg.samples)}};
  if (cfg.op.kind == "radon" && first_truth) {
    res.metrics.emplace_back("quadrature_error", radon_quadrature_error(cfg, *first_truth));
  }
  return res;
}

ExperimentResult run_radon_demo(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  const int g = cfg.op.grid_n;
  const Vector phantom = disk_phantom(g, 0.5);
  const Vector noise = cfg.noise_sigma * Rng(cfg.seed, "noise").gaussian_vector(s.map.out_dim());
  const Vector sinogram = s.map.apply(phantom) + noise;
  const auto sol = solve_variational(s.map, sinogram, cfg.alpha, s.reg, s.solver);
  ExperimentResult res;
  res.grids.emplace_back("phantom", csv::as_grid(phantom, g, g));
  res.grids.emplace_back("sinogram", csv::as_grid(sinogram, effective_angles(cfg.op), effective_offsets(cfg.op)));
  res.grids.emplace_back("reconstruction", csv::as_grid(sol.u_alpha, g, g));
  const double rel = (sol.u_alpha - phantom).norm() / phantom.norm();
  csv::Table table({"alpha", "relative_error", "optimality_defect", "J_value", "iterations"});
  table.add_row({cfg.alpha, rel, sol.optimality_defect, sol.J_value, static_cast<long long>(sol.iterations)});
  res.tables.emplace_back("radon_demo", std::move(table));
  res.checks.push_back(check(sol.optimality_defect <= sol.defect_target, "optimality",
                             "defect=" + format_double(sol.optimality_defect) +
                                 " target=" + format_double(sol.defect_target)));
  res.checks.push_back(info("reconstruction", "relative error=" + format_double(rel)));
  res.metrics = {{"relative_error", rel}, {"optimality_defect", sol.optimality_defect}};
  return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult res;
  switch (config.experiment) {
    case Experiment::solve: res = run_solve(config); break;
    case Experiment::bregman: res = run_bregman(config); break;
    case Experiment::debias: res = run_debias(config); break;
    case Experiment::convergence: res = run_convergence(config); break;
    case Experiment::bias_variance: res = run_bias_variance(config); break;
    case Experiment::operator_error:
    case Experiment::risk_theorem: res = run_risk(config); break;
    case Experiment::radon_demo: res = run_radon_demo(config); break;
  }
  res.experiment = config.experiment;
  return res;
}

}  // namespace varreg::cli
