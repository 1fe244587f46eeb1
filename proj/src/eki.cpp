#include "enkf/eki.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "enkf/kernels.hpp"

namespace enkf {

EkiProblem::EkiProblem(ForwardMap f, CovarianceMatrix g, Vector y_in, double alpha_in)
    : forward(std::move(f)), gamma(std::move(g)), y(std::move(y_in)), alpha(alpha_in) {
  if (gamma.dim() != forward.output_dim() || y.size() != forward.output_dim()) {
    throw InvalidInputError("EkiProblem: dimension mismatch");
  }
  if (!(alpha > 0.0)) throw InvalidInputError("EkiProblem: alpha must be > 0");
  Eigen::LLT<Matrix> llt(gamma.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("EkiProblem: Gamma is not positive definite");
  }
}

double data_misfit(const Vector& u, const EkiProblem& prob) {
  const Vector r = prob.y - prob.forward(u);
  Eigen::LLT<Matrix> llt(prob.gamma.mat());
  return 0.5 * r.dot(llt.solve(r));
}

double lm_objective(const Vector& w, const Vector& u_n, const Vector& eta_n,
                    const Matrix& g_mat, const CovarianceMatrix& c_hat,
                    const EkiProblem& prob) {
  if (w.size() != c_hat.dim() || g_mat.cols() != w.size() ||
      g_mat.rows() != prob.obs_dim() || eta_n.size() != prob.obs_dim()) {
    throw InvalidInputError("lm_objective: dimension mismatch");
  }
  const Vector r = prob.y - eta_n - prob.forward(u_n) - g_mat * w;
  Eigen::LLT<Matrix> llt(prob.gamma.mat());
  const double misfit = 0.5 * r.dot(llt.solve(r));
  const double reg = 0.5 / prob.alpha * w.dot(pseudo_inverse(c_hat.mat()) * w);
  return misfit + reg;
}

Matrix statistical_linearization(const Ensemble& e, const Ensemble& g_values) {
  const Matrix c_up = sample_cross_cov(e, g_values);
  const CovarianceMatrix c_hat = sample_cov(e);
  return c_up.transpose() * pseudo_inverse(c_hat.mat());
}

namespace {

UpdateResult eki_core(const Ensemble& e, const EkiProblem& prob, const Matrix& gain,
                      const Matrix& g_vals, const Matrix& perturbations) {
  if (perturbations.rows() != prob.obs_dim() || perturbations.cols() != e.size()) {
    throw InvalidInputError("eki_update: perturbation matrix must be k x N");
  }
  const Matrix innov = kernels::add_col(-(g_vals + perturbations), prob.y);
  Ensemble updated(e.members() + kernels::matmul(gain, innov));
  Vector mu_hat = sample_mean(updated);
  CovarianceMatrix sigma_hat = sample_cov(updated);
  UpdateDiagnostics diag;
  diag.gain = gain;
  return UpdateResult{std::move(updated), std::move(mu_hat), std::move(sigma_hat),
                      std::move(diag)};
}

}  // namespace

UpdateResult eki_update(const Ensemble& e, const EkiProblem& prob, std::uint64_t seed) {
  return eki_update(e, prob, sample_noise(prob.gamma, e.size(), seed).members());
}

UpdateResult eki_update(const Ensemble& e, const EkiProblem& prob, const Matrix& perturbations) {
  const Matrix g_vals = prob.forward.apply(e.members());
  const Ensemble g_ens(g_vals);
  const Matrix c_up = sample_cross_cov(e, g_ens);
  const CovarianceMatrix c_pp = sample_cov(g_ens);
  const Matrix gain = nonlinear_gain(c_up, c_pp, prob.gamma, prob.alpha);
  return eki_core(e, prob, gain, g_vals, perturbations);
}

Vector mean_field_update(const Vector& u_n, const Vector& eta_n, const PopulationMoments& pop,
                         const EkiProblem& prob) {
  if (u_n.size() != prob.state_dim() || eta_n.size() != prob.obs_dim()) {
    throw InvalidInputError("mean_field_update: dimension mismatch");
  }
  const Matrix gain = nonlinear_gain(pop.c_up, pop.c_pp, prob.gamma, prob.alpha);
  return u_n + gain * (prob.y - prob.forward(u_n) - eta_n);
}

UpdateResult leki_update(const Ensemble& e, const EkiProblem& prob, double rho_up,
                         double rho_pp, std::uint64_t seed) {
  return leki_update(e, prob, rho_up, rho_pp,
                     sample_noise(prob.gamma, e.size(), seed).members());
}

UpdateResult leki_update(const Ensemble& e, const EkiProblem& prob, double rho_up,
                         double rho_pp, const Matrix& perturbations) {
  if (!(rho_up >= 0.0) || !(rho_pp >= 0.0)) {
    throw InvalidInputError("leki_update: radii must be >= 0");
  }
  const Matrix g_vals = prob.forward.apply(e.members());
  const Ensemble g_ens(g_vals);
  const Matrix c_up = threshold(sample_cross_cov(e, g_ens), rho_up);
  const CovarianceMatrix c_pp =
      positive_part(SymmetricMatrix(threshold(sample_cov(g_ens).mat(), rho_pp)));
  const Matrix gain = nonlinear_gain(c_up, c_pp, prob.gamma, prob.alpha);
  UpdateResult out = eki_core(e, prob, gain, g_vals, perturbations);
  out.diagnostics.radius_used = rho_up;
  out.diagnostics.radius_used_pp = rho_pp;
  return out;
}

PopulationMoments population_moments_linear(const GaussianPrior& prior, const Matrix& a) {
  if (a.cols() != prior.dim()) {
    throw InvalidInputError("population_moments_linear: dimension mismatch");
  }
  Matrix pp = a * prior.cov.mat() * a.transpose();
  return PopulationMoments{prior.cov.mat() * a.transpose(),
                           CovarianceMatrix(0.5 * (pp + pp.transpose())), a * prior.mean};
}

PopulationMoments population_moments_mc(const GaussianPrior& prior, const ForwardMap& forward,
                                        Index n_ref, std::uint64_t seed) {
  if (n_ref < 2) throw InvalidInputError("population_moments_mc: need n_ref >= 2");
  if (forward.input_dim() != prior.dim()) {
    throw InvalidInputError("population_moments_mc: dimension mismatch");
  }
  const Index d = prior.dim();
  const Index k = forward.output_dim();

  Matrix l;
  try {
    l = cholesky_pd(prior.cov);
  } catch (const NotPositiveDefiniteError&) {
    l = sqrt_factor(prior.cov);
  }

  // Single pass over fixed-size batches, accumulating raw sums; one generator
  // stream so the result is independent of batch size.
  const Index batch = std::min<Index>(n_ref, 16384);
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector sum_u = Vector::Zero(d);
  Vector sum_g = Vector::Zero(k);
  Matrix sum_ug = Matrix::Zero(d, k);
  Matrix sum_gg = Matrix::Zero(k, k);

  Matrix z(d, batch);
  Index done = 0;
  while (done < n_ref) {
    const Index m = std::min(batch, n_ref - done);
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < d; ++i) z(i, j) = gauss(eng);
    }
    const Matrix zb = z.leftCols(m);
    const Matrix u = kernels::add_col(kernels::matmul(l, zb), prior.mean);
    const Matrix g = forward.apply(u);
    sum_u += u.rowwise().sum();
    sum_g += g.rowwise().sum();
    sum_ug += kernels::crossprod(u, g);
    sum_gg += kernels::crossprod(g, g);
    done += m;
  }

  const double nn = static_cast<double>(n_ref);
  const Vector mean_u = sum_u / nn;
  const Vector mean_g = sum_g / nn;
  Matrix c_up = (sum_ug - nn * mean_u * mean_g.transpose()) / (nn - 1.0);
  Matrix pp = (sum_gg - nn * mean_g * mean_g.transpose()) / (nn - 1.0);
  return PopulationMoments{std::move(c_up),
                           positive_part(SymmetricMatrix(0.5 * (pp + pp.transpose()))), mean_g};
}

}  // namespace enkf
