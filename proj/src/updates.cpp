#include "enkf/updates.hpp"

#include <cmath>
#include <utility>

#include "enkf/kernels.hpp"

namespace enkf {

namespace {

constexpr Index kDirectTransformMaxN = 512;

Matrix localized_cov(const CovarianceMatrix& c_hat, double rho) {
  return positive_part(SymmetricMatrix(threshold(c_hat.mat(), rho))).mat();
}

CovarianceMatrix symmetrized(Matrix m) { return CovarianceMatrix(0.5 * (m + m.transpose())); }

// Shared PO machinery: members transformed with the supplied gain covariance.
UpdateResult po_core(const Ensemble& e, const LinearProblem& problem,
                     const CovarianceMatrix& gain_cov, const Matrix& perturbations) {
  if (perturbations.rows() != problem.obs_dim() || perturbations.cols() != e.size()) {
    throw InvalidInputError("po_update: perturbation matrix must be k x N");
  }
  const Matrix k = kalman_gain(gain_cov, problem);
  const Matrix au = kernels::matmul(problem.a(), e.members());
  const Matrix innov = kernels::add_col(-(au + perturbations), problem.y());

  Ensemble updated(e.members() + kernels::matmul(k, innov));
  Vector mu_hat = sample_mean(updated);
  CovarianceMatrix sigma_hat = sample_cov(updated);
  UpdateDiagnostics diag;
  diag.gain = k;
  const CovarianceMatrix analysis = cov_update(gain_cov, problem);
  diag.offset_norm = operator_norm(SymmetricMatrix(sigma_hat.mat() - analysis.mat()));
  return UpdateResult{std::move(updated), std::move(mu_hat), std::move(sigma_hat),
                      std::move(diag)};
}

}  // namespace

UpdateResult po_update(const Ensemble& e, const LinearProblem& problem, std::uint64_t seed) {
  const Matrix eta = sample_noise(problem.gamma(), e.size(), seed).members();
  return po_update(e, problem, eta);
}

UpdateResult po_update(const Ensemble& e, const LinearProblem& problem,
                       const Matrix& perturbations) {
  return po_core(e, problem, sample_cov(e), perturbations);
}

SymmetricMatrix offset(const CovarianceMatrix& c_hat, const CovarianceMatrix& gamma_hat,
                       const Matrix& c_u_eta, const LinearProblem& problem) {
  if (c_u_eta.rows() != c_hat.dim() || c_u_eta.cols() != problem.obs_dim()) {
    throw InvalidInputError("offset: C_ueta must be d x k");
  }
  if (gamma_hat.dim() != problem.obs_dim()) {
    throw InvalidInputError("offset: Gamma_hat dimension mismatch");
  }
  const Matrix k = kalman_gain(c_hat, problem);
  const Matrix ima = Matrix::Identity(c_hat.dim(), c_hat.dim()) - k * problem.a();
  Matrix o = k * (gamma_hat.mat() - problem.gamma().mat()) * k.transpose() -
             ima * c_u_eta * k.transpose() - k * c_u_eta.transpose() * ima.transpose();
  return SymmetricMatrix(0.5 * (o + o.transpose()));
}

namespace detail {

Matrix etkf_factor_direct(const Matrix& x, const LinearProblem& problem, const Matrix& u) {
  const Index n = x.cols();
  if (u.rows() != n || u.cols() != n) {
    throw InvalidInputError("etkf_update: U must be N x N");
  }
  if ((u.transpose() * u - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8) {
    throw InvalidInputError("etkf_update: U is not orthogonal");
  }
  const Matrix y = kernels::matmul(problem.a(), x);
  const Matrix z = problem.gamma_llt().solve(y);
  const Matrix w = y.transpose() * z;
  SpectralDecomposition eig = sym_eig(SymmetricMatrix(0.5 * (w + w.transpose())));
  const Vector scale = (eig.eigenvalues.array().max(0.0) + 1.0).rsqrt();
  Matrix transform = eig.eigenvectors * scale.asDiagonal();
  if (!u.isIdentity(0.0)) transform *= u;
  return kernels::matmul(x, transform);
}

Matrix sr_factor_symmetric(const Matrix& x, const LinearProblem& problem) {
  // k-side route: W = B^T B with B = L_Gamma^{-1} A X, so the nonzero
  // eigenpairs of W come from the k x k matrix B B^T and
  // (I + W)^{-1/2} = I + Q ((I + S^2)^{-1/2} - I) Q^T.
  const Matrix y = kernels::matmul(problem.a(), x);
  const Matrix b = problem.gamma_llt().matrixL().solve(y);
  const Matrix g = b * b.transpose();
  SpectralDecomposition eig = sym_eig(SymmetricMatrix(0.5 * (g + g.transpose())));
  const double smax = eig.eigenvalues.size() ? std::max(eig.eigenvalues(0), 0.0) : 0.0;
  const double cut = smax * 1e-14;
  Index rank = 0;
  while (rank < eig.eigenvalues.size() && eig.eigenvalues(rank) > cut) ++rank;
  if (rank == 0 || smax <= 0.0) return x;

  const Matrix p = eig.eigenvectors.leftCols(rank);
  const Vector s2 = eig.eigenvalues.head(rank);
  const Matrix q = b.transpose() * (p * s2.cwiseSqrt().cwiseInverse().asDiagonal());
  const Vector gdiag = (s2.array() + 1.0).rsqrt() - 1.0;
  const Matrix xq = kernels::matmul(x, q);
  return x + kernels::matmul(xq, Matrix(gdiag.asDiagonal() * q.transpose()));
}

}  // namespace detail

namespace {

UpdateResult sr_result_from_factor(const Ensemble& e, const LinearProblem& problem,
                                   const CovarianceMatrix& gain_cov, const Matrix& factor) {
  Vector mu_hat = mean_update(sample_mean(e), gain_cov, problem);
  CovarianceMatrix sigma_hat = symmetrized(kernels::crossprod(factor, factor));
  Ensemble updated = sr_backout(factor, mu_hat);
  UpdateDiagnostics diag;
  diag.gain = kalman_gain(gain_cov, problem);
  diag.mean_drift = (sample_mean(updated) - mu_hat).norm();
  return UpdateResult{std::move(updated), std::move(mu_hat), std::move(sigma_hat),
                      std::move(diag)};
}

}  // namespace

UpdateResult etkf_update(const Ensemble& e, const LinearProblem& problem,
                         const std::optional<Matrix>& u) {
  if (e.dim() != problem.state_dim()) {
    throw InvalidInputError("etkf_update: ensemble dimension mismatch");
  }
  const Index n = e.size();
  const Matrix x = kernels::subtract_col(e.members(), kernels::col_mean(e.members())) /
                   std::sqrt(static_cast<double>(n - 1));
  const CovarianceMatrix c_hat = symmetrized(kernels::crossprod(x, x));

  Matrix factor;
  if (u.has_value()) {
    factor = detail::etkf_factor_direct(x, problem, *u);
  } else if (n <= kDirectTransformMaxN) {
    factor = detail::etkf_factor_direct(x, problem, Matrix::Identity(n, n));
  } else {
    factor = detail::sr_factor_symmetric(x, problem);
  }
  return sr_result_from_factor(e, problem, c_hat, factor);
}

UpdateResult eakf_update(const Ensemble& e, const LinearProblem& problem) {
  if (e.dim() != problem.state_dim()) {
    throw InvalidInputError("eakf_update: ensemble dimension mismatch");
  }
  const Index n = e.size();
  const Matrix x = kernels::subtract_col(e.members(), kernels::col_mean(e.members())) /
                   std::sqrt(static_cast<double>(n - 1));
  const CovarianceMatrix c_hat = symmetrized(kernels::crossprod(x, x));
  return sr_result_from_factor(e, problem, c_hat, detail::sr_factor_symmetric(x, problem));
}

Ensemble sr_backout(const Matrix& sigma_sqrt, const Vector& mu_hat) {
  if (sigma_sqrt.rows() != mu_hat.size()) {
    throw InvalidInputError("sr_backout: factor/mean dimensions disagree");
  }
  const double scale = std::sqrt(static_cast<double>(sigma_sqrt.cols() - 1));
  return Ensemble(kernels::add_col(scale * sigma_sqrt, mu_hat));
}

UpdateResult localized_po_update(const Ensemble& e, const LinearProblem& problem,
                                 const LocalizationConfig& loc, std::uint64_t seed) {
  const Matrix eta = sample_noise(problem.gamma(), e.size(), seed).members();
  return localized_po_update(e, problem, loc, eta);
}

UpdateResult localized_po_update(const Ensemble& e, const LinearProblem& problem,
                                 const LocalizationConfig& loc, const Matrix& perturbations) {
  const CovarianceMatrix c_hat = sample_cov(e);
  const double rho = loc.is_explicit() ? loc.rho()
                                       : loc.resolve(effective_dims(c_hat), e.size());
  const Matrix localized = localized_cov(c_hat, rho);
  if ((localized.array() == c_hat.mat().array()).all()) {
    UpdateResult out = po_core(e, problem, c_hat, perturbations);
    out.diagnostics.radius_used = rho;
    return out;
  }
  if (perturbations.rows() != problem.obs_dim() || perturbations.cols() != e.size()) {
    throw InvalidInputError("localized_po_update: perturbation matrix must be k x N");
  }

  // Members use the localized gain; the reported covariance follows the
  // localized update display C(C_rho) + O_rho rather than the member sample
  // covariance, which would re-inject the unlocalized deviations through
  // (I - K_rho A) C_hat (I - K_rho A)^T.
  const CovarianceMatrix c_rho(localized);
  const Matrix k = kalman_gain(c_rho, problem);
  const Matrix au = kernels::matmul(problem.a(), e.members());
  const Matrix innov = kernels::add_col(-(au + perturbations), problem.y());
  Ensemble updated(e.members() + kernels::matmul(k, innov));
  Vector mu_hat = sample_mean(updated);

  const Vector eta_bar = perturbations.rowwise().mean();
  const Matrix de = perturbations.colwise() - eta_bar;
  const double div = static_cast<double>(e.size() - 1);
  Matrix gamma_hat = de * de.transpose() / div;
  const Matrix du = e.members().colwise() - sample_mean(e);
  const Matrix c_u_eta = du * de.transpose() / div;
  const SymmetricMatrix o = offset(c_rho, CovarianceMatrix(0.5 * (gamma_hat + gamma_hat.transpose())),
                                   c_u_eta, problem);
  CovarianceMatrix sigma_hat(cov_update(c_rho, problem).mat() + o.mat());

  UpdateDiagnostics diag;
  diag.gain = k;
  diag.offset_norm = operator_norm(o);
  diag.radius_used = rho;
  return UpdateResult{std::move(updated), std::move(mu_hat), std::move(sigma_hat),
                      std::move(diag)};
}

UpdateResult localized_sr_update(const Ensemble& e, const LinearProblem& problem,
                                 const LocalizationConfig& loc) {
  const CovarianceMatrix c_hat = sample_cov(e);
  const double rho = loc.is_explicit() ? loc.rho()
                                       : loc.resolve(effective_dims(c_hat), e.size());
  const Matrix localized = localized_cov(c_hat, rho);
  if ((localized.array() == c_hat.mat().array()).all()) {
    UpdateResult out = etkf_update(e, problem);
    out.diagnostics.radius_used = rho;
    return out;
  }
  const CovarianceMatrix c_rho(localized);
  const Matrix l = sqrt_factor(c_rho);
  const Matrix factor = detail::sr_factor_symmetric(l, problem);
  UpdateResult out = sr_result_from_factor(e, problem, c_rho, factor);
  out.diagnostics.radius_used = rho;
  return out;
}

}  // namespace enkf
