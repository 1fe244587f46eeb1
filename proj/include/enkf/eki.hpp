#pragma once

#include <cstdint>

#include "enkf/updates.hpp"

// Sequential-optimization updates: EKI, mean-field EKI, LEKI, statistical
// linearization, and the regularized objectives used to validate them.

namespace enkf {

struct EkiProblem {
  ForwardMap forward;
  CovarianceMatrix gamma;
  Vector y;
  double alpha = 1.0;

  EkiProblem(ForwardMap f, CovarianceMatrix g, Vector y_in, double alpha_in = 1.0);
  Index state_dim() const noexcept { return forward.input_dim(); }
  Index obs_dim() const noexcept { return forward.output_dim(); }
};

// Population (infinite-ensemble) moments of (u, G(u)).
struct PopulationMoments {
  Matrix c_up;            // d x k
  CovarianceMatrix c_pp;  // k x k
  Vector mean_g;
};

// J(u) = 1/2 || Gamma^{-1/2} (y - G(u)) ||^2
double data_misfit(const Vector& u, const EkiProblem& prob);

// J_n(w) = 1/2 || Gamma^{-1/2} (y - eta_n - G(u_n) - G w) ||^2
//        + 1/(2 alpha) w^T C_hat^+ w
double lm_objective(const Vector& w, const Vector& u_n, const Vector& eta_n,
                    const Matrix& g_mat, const CovarianceMatrix& c_hat,
                    const EkiProblem& prob);

// Derivative proxy (C_hat^up)^T C_hat^+; recovers A exactly for linear maps
// with full-rank sample covariance.
Matrix statistical_linearization(const Ensemble& e, const Ensemble& g_values);

// upsilon_n = u_n + P(C_hat^up, C_hat^pp) (y - G(u_n) - eta_n). The matrix
// overload injects the k x N perturbation set shared with a paired update.
UpdateResult eki_update(const Ensemble& e, const EkiProblem& prob, std::uint64_t seed);
UpdateResult eki_update(const Ensemble& e, const EkiProblem& prob, const Matrix& perturbations);

// Mean-field update of a single particle with the same (u_n, eta_n) coupling.
Vector mean_field_update(const Vector& u_n, const Vector& eta_n,
                         const PopulationMoments& pop, const EkiProblem& prob);

// EKI with thresholded cross covariance and positive-part thresholded
// prediction covariance.
UpdateResult leki_update(const Ensemble& e, const EkiProblem& prob, double rho_up,
                         double rho_pp, std::uint64_t seed);
UpdateResult leki_update(const Ensemble& e, const EkiProblem& prob, double rho_up,
                         double rho_pp, const Matrix& perturbations);

// Closed forms for a linear map: C^up = C A^T, C^pp = A C A^T.
PopulationMoments population_moments_linear(const GaussianPrior& prior, const Matrix& a);

// Brute-force Monte Carlo moments at n_ref samples (standard error ~ n_ref^{-1/2}).
PopulationMoments population_moments_mc(const GaussianPrior& prior, const ForwardMap& forward,
                                        Index n_ref, std::uint64_t seed);

}  // namespace enkf
