#include "enkf/operators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <utility>

namespace enkf {

LinearProblem::LinearProblem(Matrix a, CovarianceMatrix gamma, Vector y)
    : a_(std::move(a)), gamma_(std::move(gamma)), y_(std::move(y)) {
  if (a_.rows() < 1 || a_.cols() < 1 || !a_.allFinite()) {
    throw InvalidInputError("LinearProblem: invalid A");
  }
  if (gamma_.dim() != a_.rows()) {
    throw InvalidInputError("LinearProblem: Gamma dimension disagrees with A");
  }
  if (y_.size() != a_.rows() || !y_.allFinite()) {
    throw InvalidInputError("LinearProblem: invalid y");
  }
  gamma_llt_.compute(gamma_.mat());
  if (gamma_llt_.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("LinearProblem: Gamma is not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(gamma_.mat(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("LinearProblem: Gamma is not positive definite");
  }
  gamma_inv_norm_ = 1.0 / es.eigenvalues().minCoeff();
}

namespace {

Matrix innovation_cov(const CovarianceMatrix& c, const Matrix& a,
                      const CovarianceMatrix& gamma) {
  Matrix s = a * c.mat() * a.transpose() + gamma.mat();
  return 0.5 * (s + s.transpose());
}

Matrix gain_from(const CovarianceMatrix& c, const Matrix& a, const CovarianceMatrix& gamma) {
  if (c.dim() != a.cols()) {
    throw InvalidInputError("kalman_gain: C dimension disagrees with A");
  }
  Eigen::LLT<Matrix> llt(innovation_cov(c, a, gamma));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("kalman_gain: A C A^T + Gamma is not PD");
  }
  // K = C A^T S^{-1}  <=>  K^T = S^{-1} (A C)
  return llt.solve(a * c.mat()).transpose();
}

}  // namespace

Matrix kalman_gain(const CovarianceMatrix& c, const Matrix& a, const CovarianceMatrix& gamma) {
  if (gamma.dim() != a.rows()) {
    throw InvalidInputError("kalman_gain: Gamma dimension disagrees with A");
  }
  Eigen::LLT<Matrix> check(gamma.mat());
  if (check.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("kalman_gain: Gamma is not positive definite");
  }
  return gain_from(c, a, gamma);
}

Matrix kalman_gain(const CovarianceMatrix& c, const LinearProblem& problem) {
  return gain_from(c, problem.a(), problem.gamma());
}

Vector mean_update(const Vector& m, const CovarianceMatrix& c, const LinearProblem& problem) {
  if (m.size() != problem.state_dim()) {
    throw InvalidInputError("mean_update: mean dimension mismatch");
  }
  const Matrix k = kalman_gain(c, problem);
  return m + k * (problem.y() - problem.a() * m);
}

CovarianceMatrix cov_update(const CovarianceMatrix& c, const Matrix& a,
                            const CovarianceMatrix& gamma) {
  const Matrix k = kalman_gain(c, a, gamma);
  Matrix out = c.mat() - k * (a * c.mat());
  return CovarianceMatrix(0.5 * (out + out.transpose()));
}

CovarianceMatrix cov_update(const CovarianceMatrix& c, const LinearProblem& problem) {
  return cov_update(c, problem.a(), problem.gamma());
}

Matrix nonlinear_gain(const Matrix& c_up, const CovarianceMatrix& c_pp,
                      const CovarianceMatrix& gamma, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInputError("nonlinear_gain: alpha must be > 0");
  if (c_up.cols() != c_pp.dim() || c_pp.dim() != gamma.dim()) {
    throw InvalidInputError("nonlinear_gain: dimension mismatch");
  }
  Matrix t = alpha * c_pp.mat() + gamma.mat();
  t = 0.5 * (t + t.transpose());
  Eigen::LLT<Matrix> llt(t);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("nonlinear_gain: alpha Cpp + Gamma is not PD");
  }
  // P = alpha Cup T^{-1}  <=>  P^T = T^{-1} (alpha Cup^T)
  return llt.solve(alpha * c_up.transpose()).transpose();
}

BoundReport lipschitz_bounds(const CovarianceMatrix& p, const CovarianceMatrix& q,
                             const LinearProblem& problem,
                             const Vector* m, const Vector* m_prime) {
  if (p.dim() != problem.state_dim() || q.dim() != problem.state_dim()) {
    throw InvalidInputError("lipschitz_bounds: dimension mismatch");
  }
  const Matrix& a = problem.a();
  const double na = operator_norm(a);
  const double ngi = problem.gamma_inv_norm();
  const double np = operator_norm(p);
  const double nq = operator_norm(q);
  const double nqp = operator_norm(SymmetricMatrix(q.mat() - p.mat()));

  const Vector zero = Vector::Zero(problem.state_dim());
  const Vector& mm = m ? *m : zero;
  const Vector& mp = m_prime ? *m_prime : mm;

  BoundReport r;
  r.gain_bound = nq * na * ngi;
  r.gain_lipschitz = nqp * na * ngi * (1.0 + std::min(np, nq) * na * na * ngi);
  r.mean_bound = mm.norm() + nq * na * ngi * (problem.y() - a * mm).norm();
  r.mean_lipschitz = (mm - mp).norm() * (1.0 + na * na * ngi * nq) +
                     nqp * na * ngi * (1.0 + na * na * ngi * np) *
                         (problem.y() - a * mp).norm();
  r.cov_lipschitz = nqp * (1.0 + na * na * ngi * (nq + np) + std::pow(na, 4) * ngi * ngi * nq * np);

  // Linear-case pairs: P_up = P A^T, P_pp = A P A^T (same for Q).
  const Matrix p_up = p.mat() * a.transpose();
  const Matrix q_up = q.mat() * a.transpose();
  const double n_qup = operator_norm(q_up);
  r.nonlinear_gain_bound =
      ngi * n_qup + ngi * ngi * operator_norm(SymmetricMatrix(a * q.mat() * a.transpose()));
  r.nonlinear_gain_lipschitz =
      ngi * operator_norm(Matrix(q_up - p_up)) +
      ngi * ngi * n_qup *
          operator_norm(SymmetricMatrix(a * (q.mat() - p.mat()) * a.transpose()));
  return r;
}

}  // namespace enkf
