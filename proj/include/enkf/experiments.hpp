#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "enkf/eki.hpp"
#include "enkf/filter.hpp"
#include "enkf/oracle.hpp"

// Monte Carlo harness instantiating the error-scaling laws as desk-scale
// checks: rate fits, method comparisons, bound overlays. Trials are
// independent given derived seeds and run under OpenMP; records are keyed and
// sorted canonically, so results are order- and thread-count-independent.

namespace enkf {

enum class ExperimentKind {
  mean_rate,
  cov_rate,
  po_vs_sr,
  loc_vs_sample,
  eki_meanfield,
  leki_vs_eki,
  multistep_rate,
  radius_sweep,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentSpec {
  std::string id;
  ExperimentKind kind = ExperimentKind::mean_rate;
  Index d = 0;
  Index k = 0;
  CovarianceSpec prior_cov;          // prior covariance generator
  std::string forward = "identity";  // identity | random-linear | tanh
  CovarianceSpec gamma_cov;          // observation noise generator (defaults to I_k)
  double gamma_scale = 1.0;
  std::string method = "sr";         // rate kinds: sr | po
  std::vector<Index> n_grid;
  int seeds = 0;
  std::uint64_t master_seed = 0;

  // Localization calibration: radii from the theorem formulas with (t, c),
  // unless explicit radii are supplied.
  double t_param = 1.0;
  double c_cov = 1.0;
  double c_cross = 1.0;
  std::optional<double> rho;
  std::optional<double> rho_up;
  std::optional<double> rho_pp;
  std::vector<double> rho_multipliers;  // radius_sweep grid

  Index n_ref = 100000;  // mean-field oracle sample count
  Index steps = 0;       // multistep horizon T
  double spectral_radius = 0.9;

  std::string out_path;
};

struct TrialRecord {
  std::string experiment;
  Index n = 0;
  int seed = 0;
  std::string method;
  double error_mean = 0.0;
  double error_cov = 0.0;
  double offset_norm = 0.0;
  double radius = 0.0;
  double r2 = 0.0;
  double r_inf = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_std = 0.0;
  int points = 0;
};

// Deterministic 64-bit seed derivation: two rounds of splitmix64 over the
// master seed xor the FNV-1a hash of the stream label, plus the trial index.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t master, std::string_view label, std::uint64_t index);

// Runs the full grid x seeds. Trial failures are tolerated up to 10% of the
// grid (reported on stderr); beyond that the run aborts with NumericError.
std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec);

// Least-squares line on (ln N, ln error).
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

enum class BoundKind { mean, cov };

struct BoundConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double phi = 0.0;  // 1 for PO, 0 for SR
};

// Theorem bound displays evaluated verbatim on the N grid.
std::vector<std::pair<Index, double>> theorem_bound_curve(BoundKind kind,
                                                          const BoundConstants& constants,
                                                          const CovarianceMatrix& c,
                                                          const LinearProblem& problem,
                                                          const std::vector<Index>& n_grid);

enum class ErrorMetric { mean, cov };

// Fraction of (N, seed)-paired trials where A's error is smaller; ties 0.5.
double compare_win_rate(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b,
                        ErrorMetric metric = ErrorMetric::mean);

double median(std::vector<double> values);

// Median error per N for one method tag, sorted by N.
std::vector<std::pair<Index, double>> medians_by_n(const std::vector<TrialRecord>& records,
                                                   const std::string& method,
                                                   ErrorMetric metric);

}  // namespace enkf
