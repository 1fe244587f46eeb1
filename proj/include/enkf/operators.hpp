#pragma once

#include <Eigen/Cholesky>

#include "enkf/linalg.hpp"

// The Kalman gain, mean-update, covariance-update, and nonlinear gain-update
// operators, plus evaluators for their continuity/boundedness bounds used as
// diagnostics. All linear solves go through a Cholesky factorization of the
// positive-definite innovation matrix, never an explicit inverse.

namespace enkf {

// Linear observation model y = A u + eta, eta ~ N(0, Gamma) with Gamma PD.
class LinearProblem {
 public:
  LinearProblem(Matrix a, CovarianceMatrix gamma, Vector y);

  const Matrix& a() const noexcept { return a_; }
  const CovarianceMatrix& gamma() const noexcept { return gamma_; }
  const Vector& y() const noexcept { return y_; }
  Index state_dim() const noexcept { return a_.cols(); }
  Index obs_dim() const noexcept { return a_.rows(); }
  const Eigen::LLT<Matrix>& gamma_llt() const noexcept { return gamma_llt_; }

  // ||Gamma^{-1}|| = 1 / lambda_min(Gamma); computed once.
  double gamma_inv_norm() const noexcept { return gamma_inv_norm_; }

 private:
  Matrix a_;
  CovarianceMatrix gamma_;
  Vector y_;
  Eigen::LLT<Matrix> gamma_llt_;
  double gamma_inv_norm_ = 0.0;
};

// K(C) = C A^T (A C A^T + Gamma)^{-1}
Matrix kalman_gain(const CovarianceMatrix& c, const Matrix& a, const CovarianceMatrix& gamma);
Matrix kalman_gain(const CovarianceMatrix& c, const LinearProblem& problem);

// M(m, C) = m + K(C) (y - A m)
Vector mean_update(const Vector& m, const CovarianceMatrix& c, const LinearProblem& problem);

// C(C) = (I - K(C) A) C, symmetrized after forming.
CovarianceMatrix cov_update(const CovarianceMatrix& c, const Matrix& a,
                            const CovarianceMatrix& gamma);
CovarianceMatrix cov_update(const CovarianceMatrix& c, const LinearProblem& problem);

// P(Cup, Cpp) = alpha Cup (alpha Cpp + Gamma)^{-1}; the paper fixes alpha = 1
// but the derivation extends to any alpha > 0.
Matrix nonlinear_gain(const Matrix& c_up, const CovarianceMatrix& c_pp,
                      const CovarianceMatrix& gamma, double alpha = 1.0);

// Right-hand sides of the continuity/boundedness lemmas, evaluated verbatim.
// The nonlinear-gain entries use the linear-case pairs (P A^T, A P A^T) and
// (Q A^T, A Q A^T) so that every field is checkable against the actual
// operator deviation. The bound fields are evaluated at Q.
struct BoundReport {
  double gain_bound = 0.0;
  double gain_lipschitz = 0.0;
  double mean_bound = 0.0;
  double mean_lipschitz = 0.0;
  double cov_lipschitz = 0.0;
  double nonlinear_gain_bound = 0.0;
  double nonlinear_gain_lipschitz = 0.0;
};

// Means default to zero when not supplied (the mean-update lemma involves m
// and m'; passing both reproduces the two-argument form).
BoundReport lipschitz_bounds(const CovarianceMatrix& p, const CovarianceMatrix& q,
                             const LinearProblem& problem,
                             const Vector* m = nullptr, const Vector* m_prime = nullptr);

}  // namespace enkf
