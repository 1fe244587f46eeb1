#include "enkf/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <tuple>

#include "enkf/kernels.hpp"

namespace enkf {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::mean_rate: return "mean_rate";
    case ExperimentKind::cov_rate: return "cov_rate";
    case ExperimentKind::po_vs_sr: return "po_vs_sr";
    case ExperimentKind::loc_vs_sample: return "loc_vs_sample";
    case ExperimentKind::eki_meanfield: return "eki_meanfield";
    case ExperimentKind::leki_vs_eki: return "leki_vs_eki";
    case ExperimentKind::multistep_rate: return "multistep_rate";
    case ExperimentKind::radius_sweep: return "radius_sweep";
  }
  throw InvalidInputError("unknown experiment kind");
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "mean_rate") return ExperimentKind::mean_rate;
  if (s == "cov_rate") return ExperimentKind::cov_rate;
  if (s == "po_vs_sr") return ExperimentKind::po_vs_sr;
  if (s == "loc_vs_sample") return ExperimentKind::loc_vs_sample;
  if (s == "eki_meanfield") return ExperimentKind::eki_meanfield;
  if (s == "leki_vs_eki") return ExperimentKind::leki_vs_eki;
  if (s == "multistep_rate") return ExperimentKind::multistep_rate;
  if (s == "radius_sweep") return ExperimentKind::radius_sweep;
  throw InvalidInputError("kind: unknown experiment kind '" + s + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(splitmix64(master ^ h) + index);
}

namespace {

int resolve_threads() {
  const char* env = std::getenv("ENKF_LAB_THREADS");
  if (env == nullptr) return omp_get_max_threads();
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    throw InvalidInputError("ENKF_LAB_THREADS: must be a positive integer");
  }
  return static_cast<int>(v);
}

Matrix observation_matrix(const ExperimentSpec& spec) {
  if (spec.forward == "identity") {
    if (spec.k > spec.d) {
      throw InvalidInputError("forward: identity observation needs k <= d");
    }
    return Matrix::Identity(spec.k, spec.d);
  }
  if (spec.forward == "random-linear") {
    const Matrix z = standard_normal(spec.k, spec.d,
                                     mix_seed(spec.master_seed, spec.id + "/A", 0));
    return z / std::sqrt(static_cast<double>(spec.d));
  }
  throw InvalidInputError("forward: '" + spec.forward + "' is not a linear map");
}

// Everything derived once per experiment from the master seed.
struct Setup {
  Setup(GaussianPrior p, CovarianceMatrix g, ForwardMap f, Vector y_in, EffectiveDims pd)
      : prior(std::move(p)),
        gamma(std::move(g)),
        forward(std::move(f)),
        y(std::move(y_in)),
        prior_dims(pd) {}

  GaussianPrior prior;
  CovarianceMatrix gamma;
  ForwardMap forward;
  Vector y;
  EffectiveDims prior_dims;

  // linear kinds
  std::optional<LinearProblem> linear;
  Vector mu_exact;
  Matrix sigma_exact;

  // eki kinds
  std::optional<EkiProblem> eki;
  std::optional<PopulationMoments> pop;
  EffectiveDims pp_dims;
  Vector u_star;
  Vector eta_star;
  Vector upsilon_star;

  // multistep
  std::optional<FilterProblem> filter;
  Vector mu_exact_terminal;
  Matrix sigma_exact_terminal;
};

ForwardMap build_forward(const ExperimentSpec& spec) {
  if (spec.forward == "tanh") return ForwardMap::tanh_bandwidth(spec.d, spec.k);
  return ForwardMap::linear(observation_matrix(spec));
}

Setup build_setup(const ExperimentSpec& spec) {
  const CovarianceMatrix c = make_covariance(spec.prior_cov);
  if (c.dim() != spec.d) {
    throw InvalidInputError("prior_cov: dimension disagrees with d");
  }
  CovarianceSpec gspec = spec.gamma_cov.dim > 0 ? spec.gamma_cov
                                                : CovarianceSpec::identity(spec.k);
  CovarianceMatrix gamma = make_covariance(gspec);
  if (gamma.dim() != spec.k) {
    throw InvalidInputError("gamma_cov: dimension disagrees with k");
  }
  if (spec.gamma_scale != 1.0) {
    gamma = CovarianceMatrix(spec.gamma_scale * gamma.mat());
  }

  GaussianPrior prior(Vector::Zero(spec.d), c);
  ForwardMap forward = build_forward(spec);

  // Fixed data: y = G(u*) + eta with truth and noise drawn once.
  const Vector u_truth =
      sample_ensemble(prior, 2, mix_seed(spec.master_seed, spec.id + "/truth", 0)).member(0);
  const Vector data_noise =
      sample_noise(gamma, 2, mix_seed(spec.master_seed, spec.id + "/data-noise", 0)).member(0);
  Vector y = forward(u_truth) + data_noise;

  Setup s(std::move(prior), gamma, std::move(forward), std::move(y), effective_dims(c));

  switch (spec.kind) {
    case ExperimentKind::mean_rate:
    case ExperimentKind::cov_rate:
    case ExperimentKind::po_vs_sr:
    case ExperimentKind::loc_vs_sample:
    case ExperimentKind::radius_sweep: {
      s.linear.emplace(s.forward.matrix(), s.gamma, s.y);
      auto [mu, sigma] = oracle::exact_posterior(s.prior.mean, s.prior.cov, *s.linear);
      s.mu_exact = std::move(mu);
      s.sigma_exact = sigma.mat();
      break;
    }
    case ExperimentKind::eki_meanfield:
    case ExperimentKind::leki_vs_eki: {
      s.eki.emplace(s.forward, s.gamma, s.y);
      s.pop = population_moments_mc(s.prior, s.forward, spec.n_ref,
                                    mix_seed(spec.master_seed, spec.id + "/oracle", 0));
      s.pp_dims = effective_dims(s.pop->c_pp);
      s.u_star = sample_ensemble(s.prior, 2,
                                 mix_seed(spec.master_seed, spec.id + "/fixed-u", 0))
                     .member(0);
      s.eta_star = sample_noise(s.gamma, 2,
                                mix_seed(spec.master_seed, spec.id + "/fixed-eta", 0))
                       .member(0);
      s.upsilon_star = mean_field_update(s.u_star, s.eta_star, *s.pop, *s.eki);
      break;
    }
    case ExperimentKind::multistep_rate: {
      if (spec.steps < 1) throw InvalidInputError("steps: multistep needs steps >= 1");
      std::vector<Matrix> dynamics;
      std::vector<Matrix> observation;
      std::vector<Vector> ys;
      Matrix m0 = standard_normal(spec.d, spec.d,
                                  mix_seed(spec.master_seed, spec.id + "/dynamics", 0));
      m0 *= spec.spectral_radius / operator_norm(m0);
      const Matrix a = observation_matrix(spec);
      // Simulated truth drives the observations; one noise draw per step.
      Vector x = u_truth;
      const Matrix step_noise =
          sample_noise(s.gamma, std::max<Index>(2, spec.steps),
                       mix_seed(spec.master_seed, spec.id + "/obs-noise", 0))
              .members();
      for (Index t = 0; t < spec.steps; ++t) {
        x = m0 * x;
        dynamics.push_back(m0);
        observation.push_back(a);
        ys.push_back(a * x + step_noise.col(t));
      }
      s.filter.emplace(std::move(dynamics), std::move(observation), std::move(ys), s.gamma,
                       s.prior.mean, s.prior.cov);
      FilterTrace exact = kalman_filter(*s.filter);
      s.mu_exact_terminal = exact.steps.back().analysis_mean;
      s.sigma_exact_terminal = exact.steps.back().analysis_cov.mat();
      break;
    }
  }
  return s;
}

double cov_error(const Matrix& a, const Matrix& b) {
  return operator_norm(SymmetricMatrix(a - b));
}

TrialRecord base_record(const ExperimentSpec& spec, const Setup& s, Index n, int seed) {
  TrialRecord r;
  r.experiment = spec.id;
  r.n = n;
  r.seed = seed;
  r.r2 = s.prior_dims.r2;
  r.r_inf = s.prior_dims.r_inf;
  return r;
}

std::vector<TrialRecord> run_trial(const ExperimentSpec& spec, const Setup& s, Index n,
                                   int seed, std::uint64_t trial_index) {
  const std::uint64_t ens_seed = mix_seed(spec.master_seed, spec.id + "/ensemble", trial_index);
  const std::uint64_t noise_seed = mix_seed(spec.master_seed, spec.id + "/noise", trial_index);
  std::vector<TrialRecord> out;

  switch (spec.kind) {
    case ExperimentKind::mean_rate:
    case ExperimentKind::cov_rate: {
      const Ensemble e = sample_ensemble(s.prior, n, ens_seed);
      UpdateResult res = spec.method == "po" ? po_update(e, *s.linear, noise_seed)
                                             : etkf_update(e, *s.linear);
      TrialRecord r = base_record(spec, s, n, seed);
      r.method = spec.method;
      r.error_mean = (res.mu_hat - s.mu_exact).norm();
      r.error_cov = cov_error(res.sigma_hat.mat(), s.sigma_exact);
      r.offset_norm = res.diagnostics.offset_norm.value_or(0.0);
      out.push_back(std::move(r));
      break;
    }
    case ExperimentKind::po_vs_sr: {
      const Ensemble e = sample_ensemble(s.prior, n, ens_seed);
      UpdateResult po = po_update(e, *s.linear, noise_seed);
      UpdateResult sr = etkf_update(e, *s.linear);
      TrialRecord rp = base_record(spec, s, n, seed);
      rp.method = "po";
      rp.error_mean = (po.mu_hat - s.mu_exact).norm();
      rp.error_cov = cov_error(po.sigma_hat.mat(), s.sigma_exact);
      rp.offset_norm = po.diagnostics.offset_norm.value_or(0.0);
      TrialRecord rs = base_record(spec, s, n, seed);
      rs.method = "sr";
      rs.error_mean = (sr.mu_hat - s.mu_exact).norm();
      rs.error_cov = cov_error(sr.sigma_hat.mat(), s.sigma_exact);
      out.push_back(std::move(rp));
      out.push_back(std::move(rs));
      break;
    }
    case ExperimentKind::loc_vs_sample: {
      const Ensemble e = sample_ensemble(s.prior, n, ens_seed);
      const CovarianceMatrix c_hat = sample_cov(e);
      const double rho = spec.rho.value_or(theorem_radius_cov(
          s.prior_dims.max_diag, s.prior_dims.r_inf, n, spec.t_param, spec.c_cov));
      const Matrix thresholded = threshold(c_hat.mat(), rho);
      const Matrix clipped = positive_part(SymmetricMatrix(thresholded)).mat();

      TrialRecord sample = base_record(spec, s, n, seed);
      sample.method = "sample";
      sample.error_cov = cov_error(c_hat.mat(), s.prior.cov.mat());
      TrialRecord loc = base_record(spec, s, n, seed);
      loc.method = "loc";
      loc.radius = rho;
      loc.error_cov = cov_error(thresholded, s.prior.cov.mat());
      TrialRecord pp = base_record(spec, s, n, seed);
      pp.method = "loc-pp";
      pp.radius = rho;
      pp.error_cov = cov_error(clipped, s.prior.cov.mat());
      out.push_back(std::move(sample));
      out.push_back(std::move(loc));
      out.push_back(std::move(pp));
      break;
    }
    case ExperimentKind::radius_sweep: {
      const Ensemble e = sample_ensemble(s.prior, n, ens_seed);
      const CovarianceMatrix c_hat = sample_cov(e);
      const double rho_star = theorem_radius_cov(s.prior_dims.max_diag, s.prior_dims.r_inf, n,
                                                 spec.t_param, spec.c_cov);
      for (double mult : spec.rho_multipliers) {
        const double rho = mult * rho_star;
        TrialRecord r = base_record(spec, s, n, seed);
        r.method = "loc";
        r.radius = rho;
        r.error_cov = cov_error(threshold(c_hat.mat(), rho), s.prior.cov.mat());
        out.push_back(std::move(r));
      }
      break;
    }
    case ExperimentKind::eki_meanfield: {
      Matrix members = sample_ensemble(s.prior, n, ens_seed).members();
      members.col(0) = s.u_star;
      Matrix noise = sample_noise(s.gamma, n, noise_seed).members();
      noise.col(0) = s.eta_star;
      UpdateResult res = eki_update(Ensemble(std::move(members)), *s.eki, noise);
      TrialRecord r = base_record(spec, s, n, seed);
      r.method = "eki";
      r.error_mean = (res.updated.member(0) - s.upsilon_star).norm();
      out.push_back(std::move(r));
      break;
    }
    case ExperimentKind::leki_vs_eki: {
      const Ensemble e = sample_ensemble(s.prior, n, ens_seed);
      const Matrix noise = sample_noise(s.gamma, n, noise_seed).members();
      const double rho_up = spec.rho_up.value_or(theorem_radius_cross(
          s.prior_dims.max_diag, s.pp_dims.max_diag, s.prior_dims.r_inf, s.pp_dims.r_inf, n,
          spec.t_param, spec.c_cross));
      const double rho_pp = spec.rho_pp.value_or(theorem_radius_cov(
          s.pp_dims.max_diag, s.pp_dims.r_inf, n, spec.t_param, spec.c_cov));

      UpdateResult eki = eki_update(e, *s.eki, noise);
      UpdateResult leki = leki_update(e, *s.eki, rho_up, rho_pp, noise);

      // Mean-field targets share each member's (u_n, eta_n).
      const Matrix gain_mf = nonlinear_gain(s.pop->c_up, s.pop->c_pp, s.gamma, s.eki->alpha);
      const Matrix g_vals = s.eki->forward.apply(e.members());
      const Matrix innov = kernels::add_col(-(g_vals + noise), s.eki->y);
      const Matrix target = e.members() + kernels::matmul(gain_mf, innov);

      const double dist_eki =
          (eki.updated.members() - target).colwise().norm().mean();
      const double dist_leki =
          (leki.updated.members() - target).colwise().norm().mean();

      TrialRecord re = base_record(spec, s, n, seed);
      re.method = "eki";
      re.error_mean = dist_eki;
      TrialRecord rl = base_record(spec, s, n, seed);
      rl.method = "leki";
      rl.error_mean = dist_leki;
      rl.radius = rho_up;
      out.push_back(std::move(re));
      out.push_back(std::move(rl));
      break;
    }
    case ExperimentKind::multistep_rate: {
      FilterTrace trace = sr_enkf(*s.filter, n, ens_seed);
      TrialRecord r = base_record(spec, s, n, seed);
      r.method = "sr-enkf";
      r.error_mean = (trace.steps.back().analysis_mean - s.mu_exact_terminal).norm();
      r.error_cov = cov_error(trace.steps.back().analysis_cov.mat(), s.sigma_exact_terminal);
      out.push_back(std::move(r));
      break;
    }
  }
  return out;
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.id.empty()) throw InvalidInputError("id: experiment id must be nonempty");
  if (spec.d < 1 || spec.k < 1) throw InvalidInputError("d/k: dimensions must be >= 1");
  if (spec.n_grid.empty()) throw InvalidInputError("n_grid: must be nonempty");
  for (std::size_t i = 0; i + 1 < spec.n_grid.size(); ++i) {
    if (spec.n_grid[i] >= spec.n_grid[i + 1]) {
      throw InvalidInputError("n_grid: must be strictly increasing");
    }
  }
  for (Index n : spec.n_grid) {
    if (n < 2) throw InvalidInputError("n_grid: ensemble sizes must be >= 2");
  }
  const int min_seeds = spec.kind == ExperimentKind::radius_sweep ? 1 : 30;
  if (spec.seeds < min_seeds) {
    throw InvalidInputError("seeds: median-based experiments need >= 30 seeds");
  }
  if ((spec.kind == ExperimentKind::mean_rate || spec.kind == ExperimentKind::cov_rate) &&
      spec.method != "sr" && spec.method != "po") {
    throw InvalidInputError("method: rate experiments accept 'sr' or 'po'");
  }
  if (spec.kind == ExperimentKind::radius_sweep && spec.rho_multipliers.empty()) {
    throw InvalidInputError("rho_multipliers: radius_sweep needs a multiplier grid");
  }
}

}  // namespace

std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec) {
  validate_spec(spec);
  const Setup setup = build_setup(spec);

  const std::size_t n_tasks = spec.n_grid.size() * static_cast<std::size_t>(spec.seeds);
  std::vector<std::vector<TrialRecord>> slots(n_tasks);
  std::atomic<std::size_t> failures{0};
  const int threads = resolve_threads();

  const long total = static_cast<long>(n_tasks);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (long ti = 0; ti < total; ++ti) {
    const std::size_t i_n = static_cast<std::size_t>(ti) / spec.seeds;
    const int seed = static_cast<int>(static_cast<std::size_t>(ti) % spec.seeds);
    try {
      slots[ti] = run_trial(spec, setup, spec.n_grid[i_n], seed,
                            static_cast<std::uint64_t>(ti));
    } catch (const std::exception& ex) {
#pragma omp critical(enkf_trial_failure)
      std::cerr << "trial " << ti << " of " << spec.id << " failed: " << ex.what() << "\n";
      ++failures;
    }
  }

  if (failures > 0 && 10 * failures > n_tasks) {
    throw NumericError("run_experiment: more than 10% of trials failed");
  }

  std::vector<TrialRecord> records;
  for (auto& slot : slots) {
    for (auto& r : slot) records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.experiment, a.method, a.n, a.seed, a.radius) <
           std::tie(b.experiment, b.method, b.n, b.seed, b.radius);
  });
  return records;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  // Two points determine the line exactly; slope assertions use >= 3.
  if (points.size() < 2) throw InvalidInputError("fit_rate: need at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  for (const auto& [n, err] : points) {
    if (!(n > 0.0) || !(err > 0.0)) {
      throw InvalidInputError("fit_rate: points must be positive");
    }
    xs.push_back(std::log(n));
    ys.push_back(std::log(err));
  }
  const double m = static_cast<double>(points.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) throw InvalidInputError("fit_rate: degenerate abscissae");
  RateFit fit;
  fit.slope = (m * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.points = static_cast<int>(points.size());
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ssr += r * r;
  }
  fit.residual_std = points.size() > 2 ? std::sqrt(ssr / (m - 2.0)) : 0.0;
  return fit;
}

std::vector<std::pair<Index, double>> theorem_bound_curve(BoundKind kind,
                                                          const BoundConstants& constants,
                                                          const CovarianceMatrix& c,
                                                          const LinearProblem& problem,
                                                          const std::vector<Index>& n_grid) {
  if (!(constants.c1 > 0.0) || !(constants.c2 >= 0.0) ||
      !(constants.phi == 0.0 || constants.phi == 1.0)) {
    throw InvalidInputError("theorem_bound_curve: invalid constants");
  }
  const double r2c = effective_dims(c).r2;
  const double r2g = effective_dims(problem.gamma()).r2;
  std::vector<std::pair<Index, double>> out;
  for (Index n : n_grid) {
    const double x = r2c / static_cast<double>(n);
    const double g = r2g / static_cast<double>(n);
    double value = 0.0;
    if (kind == BoundKind::mean) {
      value = constants.c1 * std::max(std::sqrt(x), std::pow(x, 1.5)) +
              constants.phi * constants.c2 *
                  std::max(std::sqrt(g), x * std::sqrt(g));
    } else {
      const double tail = constants.c2 *
                          std::max({std::sqrt(x), std::pow(x, 3.0),
                                    std::max(std::sqrt(g), g) * std::max(1.0, x * x)});
      value = constants.c1 * std::max(std::sqrt(x), x * x) + constants.phi * tail;
    }
    out.emplace_back(n, value);
  }
  return out;
}

double compare_win_rate(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b,
                        ErrorMetric metric) {
  if (a.empty() || a.size() != b.size()) {
    throw InvalidInputError("compare_win_rate: record lists must pair up");
  }
  std::map<std::pair<Index, int>, double> bmap;
  for (const auto& r : b) {
    bmap[{r.n, r.seed}] = metric == ErrorMetric::mean ? r.error_mean : r.error_cov;
  }
  if (bmap.size() != b.size()) {
    throw InvalidInputError("compare_win_rate: duplicate (N, seed) keys");
  }
  double wins = 0.0;
  for (const auto& r : a) {
    auto it = bmap.find({r.n, r.seed});
    if (it == bmap.end()) {
      throw InvalidInputError("compare_win_rate: unpaired record");
    }
    const double ea = metric == ErrorMetric::mean ? r.error_mean : r.error_cov;
    if (ea < it->second) {
      wins += 1.0;
    } else if (ea == it->second) {
      wins += 0.5;
    }
  }
  return wins / static_cast<double>(a.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInputError("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  return m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

std::vector<std::pair<Index, double>> medians_by_n(const std::vector<TrialRecord>& records,
                                                   const std::string& method,
                                                   ErrorMetric metric) {
  std::map<Index, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.method != method) continue;
    groups[r.n].push_back(metric == ErrorMetric::mean ? r.error_mean : r.error_cov);
  }
  std::vector<std::pair<Index, double>> out;
  for (auto& [n, vals] : groups) out.emplace_back(n, median(std::move(vals)));
  return out;
}

}  // namespace enkf
