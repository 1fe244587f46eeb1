#include "enkf/oracle.hpp"

namespace enkf::oracle {

std::pair<Vector, CovarianceMatrix> exact_posterior(const Vector& m, const CovarianceMatrix& c,
                                                    const LinearProblem& problem) {
  if (m.size() != problem.state_dim() || c.dim() != problem.state_dim()) {
    throw InvalidInputError("exact_posterior: dimension mismatch");
  }
  const Matrix& a = problem.a();
  const Matrix s = a * c.mat() * a.transpose() + problem.gamma().mat();
  const Matrix s_inv = s.inverse();
  const Matrix cat = c.mat() * a.transpose();
  Vector mu = m + cat * s_inv * (problem.y() - a * m);
  Matrix sigma = c.mat() - cat * s_inv * a * c.mat();
  return {std::move(mu), CovarianceMatrix(0.5 * (sigma + sigma.transpose()))};
}

SymmetricMatrix po_covariance_expansion(const Ensemble& e, const Matrix& perturbations,
                                        const LinearProblem& problem) {
  const Index n = e.size();
  if (perturbations.rows() != problem.obs_dim() || perturbations.cols() != n) {
    throw InvalidInputError("po_covariance_expansion: perturbations must be k x N");
  }
  const Index d = e.dim();
  const double div = static_cast<double>(n - 1);

  const Vector m_hat = e.members().rowwise().mean();
  const Matrix du = e.members().colwise() - m_hat;
  const Matrix c_hat = du * du.transpose() / div;

  const Vector eta_bar = perturbations.rowwise().mean();
  const Matrix de = perturbations.colwise() - eta_bar;
  const Matrix gamma_hat = de * de.transpose() / div;
  const Matrix c_u_eta = du * de.transpose() / div;

  const Matrix& a = problem.a();
  const Matrix s = a * c_hat * a.transpose() + problem.gamma().mat();
  const Matrix k = c_hat * a.transpose() * s.inverse();
  const Matrix ima = Matrix::Identity(d, d) - k * a;

  Matrix out = ima * c_hat * ima.transpose() + k * gamma_hat * k.transpose() -
               ima * c_u_eta * k.transpose() -
               k * c_u_eta.transpose() * ima.transpose();
  return SymmetricMatrix(0.5 * (out + out.transpose()));
}

PopulationMoments mean_field_reference(const GaussianPrior& prior, const ForwardMap& forward,
                                       Index n_ref, std::uint64_t seed) {
  return population_moments_mc(prior, forward, n_ref, seed);
}

}  // namespace enkf::oracle
