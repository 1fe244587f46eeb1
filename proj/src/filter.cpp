#include "enkf/filter.hpp"

#include <cmath>
#include <utility>

#include "enkf/kernels.hpp"

namespace enkf {

FilterProblem::FilterProblem(std::vector<Matrix> m, std::vector<Matrix> a,
                             std::vector<Vector> y, CovarianceMatrix g, Vector mu0,
                             CovarianceMatrix sigma0)
    : dynamics(std::move(m)),
      observation(std::move(a)),
      observations(std::move(y)),
      gamma(std::move(g)),
      init_mean(std::move(mu0)),
      init_cov(std::move(sigma0)) {
  const std::size_t t = dynamics.size();
  if (t == 0 || observation.size() != t || observations.size() != t) {
    throw InvalidInputError("FilterProblem: per-step inputs must share one length");
  }
  const Index d = init_mean.size();
  if (init_cov.dim() != d) throw InvalidInputError("FilterProblem: init covariance dimension");
  const Index k = gamma.dim();
  for (std::size_t i = 0; i < t; ++i) {
    if (dynamics[i].rows() != d || dynamics[i].cols() != d) {
      throw InvalidInputError("FilterProblem: dynamics must be d x d");
    }
    if (observation[i].rows() != k || observation[i].cols() != d) {
      throw InvalidInputError("FilterProblem: observation maps must be k x d");
    }
    if (observations[i].size() != k) {
      throw InvalidInputError("FilterProblem: observation dimension mismatch");
    }
  }
  Eigen::LLT<Matrix> llt(gamma.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("FilterProblem: Gamma is not positive definite");
  }
}

FilterTrace kalman_filter(const FilterProblem& fp) {
  FilterTrace trace;
  Vector mu = fp.init_mean;
  CovarianceMatrix sigma = fp.init_cov;
  for (Index t = 0; t < fp.steps(); ++t) {
    const Matrix& m_t = fp.dynamics[t];
    Vector fm = m_t * mu;
    Matrix fc = m_t * sigma.mat() * m_t.transpose();
    CovarianceMatrix forecast_cov(0.5 * (fc + fc.transpose()));
    LinearProblem problem(fp.observation[t], fp.gamma, fp.observations[t]);
    Vector am = mean_update(fm, forecast_cov, problem);
    CovarianceMatrix ac = cov_update(forecast_cov, problem);
    trace.steps.push_back(FilterStep{fm, forecast_cov, am, ac});
    mu = std::move(am);
    sigma = trace.steps.back().analysis_cov;
  }
  return trace;
}

FilterTrace sr_enkf(const FilterProblem& fp, Index n, std::uint64_t seed) {
  if (n < 2) throw InvalidInputError("sr_enkf: need N >= 2");
  GaussianPrior init(fp.init_mean, fp.init_cov);
  Matrix members = sample_ensemble(init, n, seed).members();

  FilterTrace trace;
  for (Index t = 0; t < fp.steps(); ++t) {
    members = kernels::matmul(fp.dynamics[t], members);
    Ensemble forecast(members);
    Vector fm = sample_mean(forecast);
    CovarianceMatrix fc = sample_cov(forecast);

    LinearProblem problem(fp.observation[t], fp.gamma, fp.observations[t]);
    const Matrix x = kernels::subtract_col(members, fm) /
                     std::sqrt(static_cast<double>(n - 1));
    const Matrix factor = detail::sr_factor_symmetric(x, problem);
    const Vector mu_hat = mean_update(fm, fc, problem);
    Ensemble analysis = sr_backout(factor, mu_hat);
    members = analysis.members();

    trace.steps.push_back(
        FilterStep{std::move(fm), std::move(fc), sample_mean(analysis), sample_cov(analysis)});
    trace.mean_drift.push_back((trace.steps.back().analysis_mean - mu_hat).norm());
  }
  return trace;
}

}  // namespace enkf
