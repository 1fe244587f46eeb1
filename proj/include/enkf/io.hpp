#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "enkf/experiments.hpp"

// Config parsing, record serialization, and summary/report generation for the
// command-line front end. All randomness flows from the config's master seed;
// serialization is deterministic (sorted JSON keys, shortest round-trip
// doubles, fixed CSV column order).

namespace enkf::io {

using nlohmann::json;

// Pass/fail thresholds evaluated by the report stage.
struct ExperimentChecks {
  std::optional<double> slope_target;
  double slope_tol = 0.15;
  std::string metric = "mean";  // mean | cov
  std::string method;           // method whose rate is fitted; defaults per kind
  std::optional<double> min_win_rate;
  std::string candidate;  // win-rate comparison: candidate beats baseline
  std::string baseline;
};

struct ExperimentConfig {
  ExperimentSpec spec;
  ExperimentChecks checks;
};

json covariance_spec_to_json(const CovarianceSpec& spec);
// default_dim fills in the dimension when the spec omits it.
CovarianceSpec covariance_spec_from_json(const json& j, Index default_dim);

ExperimentConfig parse_experiment_config(const json& j);
ExperimentConfig load_experiment_config(const std::string& path);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const std::string& field);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const std::string& field);

// CSV schema (fixed order):
// experiment,N,seed,method,error_mean,error_cov,offset_norm,radius,r2,r_inf
std::string records_to_csv(const std::vector<TrialRecord>& records);
void write_records_csv(const std::string& path, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_records_csv(const std::string& path);

struct ExperimentSummary {
  json data;
  std::string text_table;
  bool all_checks_pass = true;
};

// Medians per (method, N), rate fits for both error metrics, win rates for
// paired method tags, and check evaluation when a config is supplied.
ExperimentSummary summarize(const std::vector<TrialRecord>& records,
                            const ExperimentConfig* config);

// Single-update request (the `update` subcommand's problem file).
struct UpdateRequest {
  std::string method;  // po | etkf | eakf | loc-po | loc-sr | eki | leki
  std::optional<Matrix> members;
  std::optional<GaussianPrior> prior;
  Index ensemble_size = 0;
  ForwardMap forward;
  CovarianceMatrix gamma;
  Vector y;
  double alpha = 1.0;
  std::optional<double> rho;
  std::optional<double> rho_up;
  std::optional<double> rho_pp;
  double t_param = 1.0;
  double c_param = 1.0;

  UpdateRequest(std::string m, ForwardMap f, CovarianceMatrix g, Vector y_in);
};

UpdateRequest parse_update_request(const json& j);
UpdateRequest load_update_request(const std::string& path);

// Executes the requested update; the seed drives ensemble sampling (when
// members are not given) and the perturbation draws.
json run_update(const UpdateRequest& request, std::uint64_t seed);

}  // namespace enkf::io
