#include "ldr/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ldr/calibration.hpp"
#include "ldr/errors.hpp"
#include "ldr/experiment.hpp"
#include "ldr/gradcheck.hpp"
#include "ldr/topk_dro.hpp"

namespace ldr {

namespace {

std::vector<double> read_vector(std::istream& in) {
  std::vector<double> q;
  std::string token;
  while (in >> token) {
    for (char& ch : token)
      if (ch == ',') ch = ' ';
    std::istringstream parts(token);
    std::string piece;
    while (parts >> piece) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(piece, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != piece.size()) throw ConfigError("not a number in q: '" + piece + "'");
      q.push_back(v);
    }
  }
  if (q.empty()) throw ConfigError("expected a q vector on standard input");
  return q;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

int run_experiment_command(const std::string& config_path, std::optional<std::uint64_t> seed, bool emit_leaderboard) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (seed) config.seeds = {*seed};
  const Dataset data = load_dataset(config.dataset);
  const auto results = run_experiment(config, data);
  std::cout << "dataset,loss,noise,seed,lr,val_top1,test_top1,test_top1_std\n";
  for (const auto& r : results)
    std::cout << r.dataset << ',' << r.loss << ',' << r.noise << ',' << r.seed << ',' << r.lr << ','
              << r.val_top1 << ',' << r.test_mean[0] << ',' << r.test_std[0] << '\n';
  if (emit_leaderboard) {
    const auto rows = leaderboard_from(results);
    const std::string csv = leaderboard_csv(rows);
    write_file(config.output_dir / "leaderboard.csv", csv);
    std::cout << '\n' << csv;
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Label-distributionally-robust losses: experiments and checks", "ldr"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Override the random seed");

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train with cross-validated grid search from a JSON config");
  train_cmd->add_option("--config", config_path, "JSON experiment config")->required();
  auto* bench_cmd = app.add_subcommand("bench", "Run a loss x noise grid and emit a rank leaderboard");
  bench_cmd->add_option("--config", config_path, "JSON experiment config")->required();

  std::size_t instances = 200;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad_cmd->add_option("--instances", instances, "Random instances per suite")->check(CLI::PositiveNumber);

  std::string calib_out;
  auto* calib_cmd = app.add_subcommand("calibrate", "Check top-k calibration claims numerically");
  calib_cmd->add_option("--instances", instances, "Random distributions per claim")->check(CLI::PositiveNumber);
  calib_cmd->add_option("--output", calib_out, "Write the CSV here instead of standard output");

  std::size_t k = 1;
  double lambda = 1.0;
  auto* proj_cmd = app.add_subcommand("project", "Solve the KL-regularized problem over Omega(k) for q on stdin");
  proj_cmd->add_option("--k", k, "Cap parameter k")->required()->check(CLI::PositiveNumber);
  proj_cmd->add_option("--lambda", lambda, "Regularization strength")->required();

  std::string synth_dir = "results";
  SynthConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "Two-probe synthetic protocol with decision grids");
  synth_cmd->add_option("--output-dir", synth_dir, "Directory for decision_grids.csv and probes.csv");
  synth_cmd->add_option("--pretrain-epochs", synth.pretrain_epochs);
  synth_cmd->add_option("--finetune-epochs", synth.finetune_epochs);
  synth_cmd->add_option("--hidden", synth.hidden);
  synth_cmd->add_option("--resolution", synth.grid_resolution)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return run_experiment_command(config_path, seed, false);
    if (*bench_cmd) return run_experiment_command(config_path, seed, true);

    if (*grad_cmd) {
      const auto suites = run_gradcheck_suites(instances, seed.value_or(2024));
      bool ok = true;
      for (const auto& s : suites) {
        std::cout << (s.passed ? "PASS " : "FAIL ") << s.name << "  instances=" << s.instances
                  << "  max_rel_error=" << std::scientific << std::setprecision(3) << s.max_rel_error
                  << std::defaultfloat << '\n';
        ok = ok && s.passed;
      }
      return ok ? kExitOk : kExitValidation;
    }

    if (*calib_cmd) {
      const auto claims = run_calibration_suite(instances, seed.value_or(7));
      const std::string csv = calibration_csv(claims);
      if (calib_out.empty()) std::cout << csv;
      else write_file(calib_out, csv);
      for (const auto& c : claims)
        if (!c.passed) return kExitValidation;
      return kExitOk;
    }

    if (*proj_cmd) {
      const auto q = read_vector(std::cin);
      if (k > q.size()) throw ConfigError("--k must not exceed the length of q");
      const auto r = omega_k_argmax(q, lambda, OmegaK{k});
      std::cout << std::setprecision(12);
      for (std::size_t i = 0; i < r.p.size(); ++i) std::cout << (i ? " " : "") << r.p[i];
      std::cout << "\nobjective " << r.objective << '\n';
      return kExitOk;
    }

    if (*synth_cmd) {
      if (seed) synth.seed = *seed;
      const auto report = run_synthetic_protocol(synth);
      std::ostringstream probes;
      probes << "schema_version,pretrain_accuracy,lambda_clean_probe,lambda_mislabeled_probe,lambda_mean_rest\n"
             << kSchemaVersion << ',' << report.pretrain_accuracy << ',' << report.lambda_clean_probe << ','
             << report.lambda_mislabeled_probe << ',' << report.lambda_mean_rest << '\n';
      write_file(std::filesystem::path(synth_dir) / "decision_grids.csv",
                 decision_grids_csv(report, synth.grid_resolution));
      write_file(std::filesystem::path(synth_dir) / "probes.csv", probes.str());
      std::cout << probes.str();
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitConfig;
}

}  // namespace ldr
