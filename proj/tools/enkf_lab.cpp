// enkf-lab: batch front end for single ensemble updates, config-driven
// experiments, and record reports.
//
// Exit codes: 0 success, 2 invalid input (parse/validation), 3 numeric failure.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "enkf/io.hpp"

namespace {

namespace fs = std::filesystem;

int run_update_cmd(const std::string& problem_path, std::uint64_t seed,
                   const std::string& out_path, std::optional<double> rho,
                   std::optional<double> rho_up, std::optional<double> rho_pp,
                   const std::string& method_override) {
  enkf::io::UpdateRequest req = enkf::io::load_update_request(problem_path);
  if (!method_override.empty()) req.method = method_override;
  if (rho) req.rho = rho;
  if (rho_up) req.rho_up = rho_up;
  if (rho_pp) req.rho_pp = rho_pp;
  const enkf::io::json out = enkf::io::run_update(req, seed);
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw enkf::InvalidInputError("out: cannot open '" + out_path + "' for writing");
    f << out.dump(2) << "\n";
  }
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir,
                       std::optional<std::uint64_t> master_seed, bool quiet) {
  enkf::io::ExperimentConfig cfg = enkf::io::load_experiment_config(config_path);
  if (master_seed) cfg.spec.master_seed = *master_seed;

  fs::path dir = !out_dir.empty() ? fs::path(out_dir)
                 : !cfg.spec.out_path.empty() ? fs::path(cfg.spec.out_path)
                                              : fs::path(".");
  fs::create_directories(dir);

  const std::vector<enkf::TrialRecord> records = enkf::run_experiment(cfg.spec);
  const fs::path records_path = dir / (cfg.spec.id + "_records.csv");
  enkf::io::write_records_csv(records_path.string(), records);

  const enkf::io::ExperimentSummary summary = enkf::io::summarize(records, &cfg);
  const fs::path summary_path = dir / (cfg.spec.id + "_summary.json");
  std::ofstream f(summary_path, std::ios::binary);
  if (!f) throw enkf::InvalidInputError("out: cannot open summary file for writing");
  f << summary.data.dump(2) << "\n";

  if (!quiet) {
    std::cout << "records: " << records_path.string() << " (" << records.size() << " rows)\n";
    std::cout << "summary: " << summary_path.string() << "\n";
    std::cout << summary.text_table;
  }
  return 0;
}

int run_report_cmd(const std::string& records_path, const std::string& config_path,
                   const std::string& out_path) {
  const std::vector<enkf::TrialRecord> records = enkf::io::read_records_csv(records_path);
  std::optional<enkf::io::ExperimentConfig> cfg;
  if (!config_path.empty()) cfg = enkf::io::load_experiment_config(config_path);

  const enkf::io::ExperimentSummary summary =
      enkf::io::summarize(records, cfg ? &*cfg : nullptr);
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw enkf::InvalidInputError("out: cannot open '" + out_path + "' for writing");
    f << summary.data.dump(2) << "\n";
  }
  std::cout << summary.text_table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble Kalman update laboratory"};
  app.require_subcommand(1);

  // update
  auto* update = app.add_subcommand("update", "run a single ensemble update");
  std::string problem_path;
  std::string update_out;
  std::string method_override;
  std::uint64_t seed = 0;
  double rho = -1.0, rho_up = -1.0, rho_pp = -1.0;
  update->add_option("--problem", problem_path, "problem JSON file")->required();
  update->add_option("--seed", seed, "RNG seed");
  update->add_option("--method", method_override, "override the problem file's method");
  update->add_option("--out", update_out, "output JSON path (default: stdout)");
  update->add_option("--rho", rho, "localization radius override");
  update->add_option("--rho-up", rho_up, "LEKI cross-covariance radius");
  update->add_option("--rho-pp", rho_pp, "LEKI prediction-covariance radius");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a config-driven experiment");
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
  std::int64_t master_seed_flag = -1;
  experiment->add_option("--config", config_path, "experiment config JSON")->required();
  experiment->add_option("--out-dir", out_dir, "output directory");
  experiment->add_option("--master-seed", master_seed_flag, "override the config master seed");
  experiment->add_flag("--quiet", quiet, "suppress the summary table");

  // report
  auto* report = app.add_subcommand("report", "summarize a records CSV");
  std::string records_path;
  std::string report_config;
  std::string report_out;
  report->add_option("--records", records_path, "records CSV path")->required();
  report->add_option("--config", report_config, "config with checks to evaluate");
  report->add_option("--out", report_out, "summary JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (update->parsed()) {
      return run_update_cmd(problem_path, seed, update_out,
                            rho >= 0.0 ? std::optional<double>(rho) : std::nullopt,
                            rho_up >= 0.0 ? std::optional<double>(rho_up) : std::nullopt,
                            rho_pp >= 0.0 ? std::optional<double>(rho_pp) : std::nullopt,
                            method_override);
    }
    if (experiment->parsed()) {
      return run_experiment_cmd(config_path, out_dir,
                                master_seed_flag >= 0
                                    ? std::optional<std::uint64_t>(
                                          static_cast<std::uint64_t>(master_seed_flag))
                                    : std::nullopt,
                                quiet);
    }
    return run_report_cmd(records_path, report_config, report_out);
  } catch (const enkf::InvalidInputError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const enkf::NotPositiveDefiniteError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const enkf::NotPsdError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const enkf::Error& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
}
