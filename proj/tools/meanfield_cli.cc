// Command-line front end: scenario runs, parameter sweeps and model analysis.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "meanfield/analysis.h"
#include "meanfield/config.h"
#include "meanfield/csv.h"
#include "meanfield/rng.h"
#include "meanfield/scenario.h"

namespace {

using namespace meanfield;

ScenarioConfig resolve_config(const std::string& config_path, const std::string& preset_name) {
  if (!preset_name.empty()) {
    ScenarioConfig base = preset(preset_name);
    if (config_path.empty()) return base;
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config: cannot read " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    return apply_overrides(base, ss.str());
  }
  if (config_path.empty()) throw ConfigError("config: give --config and/or --preset");
  return load_config(config_path);
}

int cmd_run(const std::string& config, const std::string& preset_name,
            std::optional<std::uint64_t> seed, const std::string& out) {
  ScenarioConfig cfg = resolve_config(config, preset_name);
  if (seed) cfg.seed = *seed;
  const ScenarioResult r = run_scenario(cfg);
  write_outputs(r, out);
  std::cout << format_summary(r.summary) << "outputs             " << out << '\n';
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& preset_name,
              std::optional<std::uint64_t> seed, const std::string& axis_name,
              const std::vector<double>& values, const std::string& out) {
  ScenarioConfig cfg = resolve_config(config, preset_name);
  if (seed) cfg.seed = *seed;
  const SweepAxis axis = axis_name == "N" ? SweepAxis::kPopulation : SweepAxis::kFraction;
  const auto rows = sweep(cfg, axis, values);
  std::filesystem::create_directories(out);
  const std::string path = (std::filesystem::path(out) / "sweep.csv").string();
  write_sweep(rows, axis, path);
  std::cout << (axis == SweepAxis::kPopulation ? "N" : "fraction") << "\tN\tn\tnormalized_rms\n";
  for (const auto& row : rows) {
    std::cout << row.value << '\t' << row.N << '\t' << row.n << '\t' << row.normalized_rms << '\n';
  }
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_analyze(const std::string& model_path, const std::string& what, int horizon,
                double zeta_amplitude, int modes, std::uint64_t seed, const std::string& out) {
  const BuiltModel m = build_model(load_model(model_path));
  const Matrix A = m.family(0.0).transpose();
  const int d = static_cast<int>(A.rows());
  std::filesystem::create_directories(out);
  const auto path = [&](const char* f) { return (std::filesystem::path(out) / f).string(); };
  csv::write_matrix(path("P0.csv"), m.family(0.0), m.family.state_space().labels());

  if (what == "grammian") {
    const int T = horizon > 0 ? horizon : d;
    std::vector<Matrix> seq;
    std::mt19937_64 eng(rng::derive(seed, rng::kReference));
    std::uniform_real_distribution<double> u(-zeta_amplitude, zeta_amplitude);
    for (int t = 0; t + 1 < T; ++t) {
      seq.push_back(zeta_amplitude > 0 ? Matrix(m.family(u(eng)).transpose()) : A);
    }
    const Grammian g = observability_grammian(seq, m.C, T);
    csv::write_spectrum(path("grammian_spectrum.csv"), g.report.spectrum);
    std::cout << "grammian horizon    " << T << "\nnumerical_rank      " << g.report.numerical_rank
              << "\ntolerance           " << g.report.tolerance << "\nlargest             "
              << g.report.spectrum.front() << "\nsmallest            " << g.report.spectrum.back()
              << "\nwrote " << path("grammian_spectrum.csv") << '\n';
  } else if (what == "symmetry") {
    const SymmetryReport s = symmetry_check(A, m.C);
    csv::write_spectrum(path("observability_singular_values.csv"), s.observability.spectrum);
    std::cout << "applicable          " << (s.applicable ? "yes" : "no (odd dimension)")
              << "\nsymmetric_form      " << (s.is_symmetric_form ? "yes" : "no")
              << "\nblock_mismatch      " << s.block_mismatch << "\nv0_dimension        "
              << s.v0_basis.cols() << "\nmax_response        " << s.max_response
              << "\nobservability_rank  " << s.observability.numerical_rank << " (bound "
              << d / 2 + 1 << ")\nwrote " << path("observability_singular_values.csv") << '\n';
    if (s.v0_basis.cols() > 0) {
      std::vector<std::string> labels;
      for (int j = 0; j < s.v0_basis.cols(); ++j) labels.push_back("v" + std::to_string(j + 1));
      csv::write_matrix(path("v0_basis.csv"), s.v0_basis, labels);
    }
  } else {
    const EigenModes em = eigen_modes(A, modes);
    std::vector<std::string> labels;
    for (std::size_t j = 0; j < em.eigenvalues.size(); ++j) labels.push_back("mode" + std::to_string(j + 1));
    csv::write_matrix(path("modes.csv"), em.modes, labels);
    std::cout << "mode\tre(lambda)\tim(lambda)\t|lambda|\n";
    for (std::size_t j = 0; j < em.eigenvalues.size(); ++j) {
      const auto l = em.eigenvalues[j];
      std::cout << j + 1 << '\t' << l.real() << '\t' << l.imag() << '\t' << std::abs(l) << '\n';
    }
    std::cout << "wrote " << path("modes.csv") << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field load population simulator, filters and observability tools"};
  app.require_subcommand(1);

  std::string config, preset_name, out = "out", axis, model_path, what;
  std::optional<std::uint64_t> seed;
  std::vector<double> values;
  int horizon = 0, modes = 7;
  double zeta_amplitude = 0.0;
  std::uint64_t analyze_seed = 1;

  auto* run = app.add_subcommand("run", "Run one scenario and write traces");
  run->add_option("--config", config, "JSON scenario file");
  std::string preset_help = "Named scenario:";
  for (const auto& n : preset_names()) preset_help += " " + n;
  run->add_option("--preset", preset_name, preset_help);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Output directory")->capture_default_str();

  auto* sw = app.add_subcommand("sweep", "Normalized tracking error across N or sampling fraction");
  sw->add_option("--config", config, "JSON scenario file");
  sw->add_option("--preset", preset_name, preset_help);
  sw->add_option("--seed", seed, "Override the scenario seed");
  sw->add_option("--axis", axis, "N or fraction")->required()->check(CLI::IsMember({"N", "fraction"}));
  sw->add_option("--values", values, "Axis values")->required()->expected(1, -1);
  sw->add_option("--out", out, "Output directory")->capture_default_str();

  auto* an = app.add_subcommand("analyze", "Observability and eigenmode analysis of a model");
  an->add_option("--model", model_path, "JSON model file")->required();
  an->add_option("what", what, "grammian | symmetry | modes")
      ->required()
      ->check(CLI::IsMember({"grammian", "symmetry", "modes"}));
  an->add_option("--horizon", horizon, "Grammian horizon (default: d)");
  an->add_option("--zeta-amplitude", zeta_amplitude,
                 "Draw zeta_t uniformly in [-a, a] for a time-varying Grammian (0: time-invariant)");
  an->add_option("--modes", modes, "Number of modes")->capture_default_str();
  an->add_option("--seed", analyze_seed, "Seed for the zeta draws")->capture_default_str();
  an->add_option("--out", out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, preset_name, seed, out);
    if (*sw) return cmd_sweep(config, preset_name, seed, axis, values, out);
    if (*an) return cmd_analyze(model_path, what, horizon, zeta_amplitude, modes, analyze_seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
