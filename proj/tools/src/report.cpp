#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "varreg/cli/experiment.hpp"

namespace varreg::cli {

namespace {

std::string_view status_word(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::info: return "INFO";
  }
  return "INFO";
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json op{{"kind", c.op.kind},         {"n", c.op.n},
                            {"m", c.op.m},               {"kernel", c.op.kernel},
                            {"spectrum_lo", c.op.spectrum_lo}, {"spectrum_hi", c.op.spectrum_hi},
                            {"matrix_file", c.op.matrix_file}, {"grid_n", c.op.grid_n},
                            {"angles", c.op.angles},     {"offsets", c.op.offsets}};
  return {{"experiment", std::string(to_string(c.experiment))},
          {"operator", op},
          {"regularizer", c.regularizer},
          {"alpha", c.alpha},
          {"alpha_grid", c.alpha_grid},
          {"data", c.data},
          {"noise_sigma", c.noise_sigma},
          {"delta0", c.delta0},
          {"n_max", c.n_max},
          {"c", c.c},
          {"alpha_rule", c.alpha_rule},
          {"samples", c.samples},
          {"replicates", c.replicates},
          {"instances", c.instances},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"tol", c.tol},
          {"max_iters", c.max_iters}};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_summary(const ExperimentResult& result, std::ostream& out) {
  out << "experiment: " << to_string(result.experiment) << '\n';
  for (const auto& c : result.checks) out << status_word(c.status) << ' ' << c.id << ": " << c.detail << '\n';
  const int certified = result.pass_count() + result.fail_count();
  out << "passed " << result.pass_count() << " of " << certified << " checks\n";
  out << "RESULT: " << (result.passed() ? "PASS" : "FAIL") << '\n';
}

void emit_report(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [stem, table] : result.tables) {
    auto out = open_output(dir / (stem + ".csv"));
    table.write(out);
  }
  for (const auto& [stem, grid] : result.grids) {
    auto out = open_output(dir / (stem + ".csv"));
    csv::write_grid(out, grid);
  }
  {
    auto out = open_output(dir / "summary.txt");
    write_summary(result, out);
  }
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"status", status_word(c.status)}, {"id", c.id}, {"detail", c.detail}});
  }
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [name, value] : result.metrics) metrics[name] = value;
  const nlohmann::ordered_json doc{{"schema_version", 1},
                                   {"config", config_json(config)},
                                   {"checks", checks},
                                   {"passed", result.pass_count()},
                                   {"failed", result.fail_count()},
                                   {"metrics", metrics}};
  auto out = open_output(dir / "summary.json");
  out << doc.dump(2) << '\n';
}

}  // namespace varreg::cli
