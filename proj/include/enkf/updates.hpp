#pragma once

#include <cstdint>
#include <optional>

#include "enkf/estimators.hpp"
#include "enkf/models.hpp"
#include "enkf/operators.hpp"

// One-step posterior-approximation ensemble updates: perturbed-observation
// with its offset term, square-root (transform and adjustment flavors) with
// member back-out, and the localized variants.

namespace enkf {

struct UpdateDiagnostics {
  Matrix gain;                            // gain actually applied
  std::optional<double> offset_norm;      // PO: ||Sigma_hat - C(C_hat)||
  std::optional<double> radius_used;      // localized updates
  std::optional<double> radius_used_pp;   // LEKI second radius
  std::optional<double> mean_drift;       // SR back-out: ||mean(members) - mu_hat||_2
};

struct UpdateResult {
  Ensemble updated;
  Vector mu_hat;
  CovarianceMatrix sigma_hat;
  UpdateDiagnostics diagnostics;
};

// Each member gets an independently perturbed observation y - eta_n:
// upsilon_n = M(u_n, C_hat) - K(C_hat) eta_n. The seeded overload draws
// eta_n ~ N(0, Gamma) internally; the matrix overload injects a fixed k x N
// perturbation set so the covariance identity is checkable deterministically.
UpdateResult po_update(const Ensemble& e, const LinearProblem& problem, std::uint64_t seed);
UpdateResult po_update(const Ensemble& e, const LinearProblem& problem,
                       const Matrix& perturbations);

// Offset term: K (Gamma_hat - Gamma) K^T - (I - K A) C_ueta K^T
//              - K C_ueta^T (I - A^T K^T), with K = K(c_hat).
SymmetricMatrix offset(const CovarianceMatrix& c_hat, const CovarianceMatrix& gamma_hat,
                       const Matrix& c_u_eta, const LinearProblem& problem);

// Ensemble-transform square root update. The transform right-multiplies the
// ensemble square root C_hat^{1/2} = (N-1)^{-1/2} [u_1 - mbar, ...] by
// E (I + Lambda)^{-1/2} U, where E Lambda E^T is the eigendecomposition of
// C_hat^{1/2 T} A^T Gamma^{-1} A C_hat^{1/2}. Default U is the identity; for
// N > 512 without an explicit U the algebraically identical symmetric
// transform E (I + Lambda)^{-1/2} E^T is used (it avoids the N x N
// eigendecomposition and has vanishing back-out mean drift).
UpdateResult etkf_update(const Ensemble& e, const LinearProblem& problem,
                         const std::optional<Matrix>& u = std::nullopt);

// Ensemble-adjustment square root update, implemented via the simplified form
// C_hat^{1/2} (I + M M^T)^{-1/2}, M = (A C_hat^{1/2})^T Gamma^{-1/2}.
UpdateResult eakf_update(const Ensemble& e, const LinearProblem& problem);

// upsilon_n = sqrt(N-1) [sigma_sqrt]_n + mu_hat, one member per column.
Ensemble sr_backout(const Matrix& sigma_sqrt, const Vector& mu_hat);

// PO update with every C_hat replaced by the positive-part of the thresholded
// sample covariance.
UpdateResult localized_po_update(const Ensemble& e, const LinearProblem& problem,
                                 const LocalizationConfig& loc, std::uint64_t seed);
UpdateResult localized_po_update(const Ensemble& e, const LinearProblem& problem,
                                 const LocalizationConfig& loc, const Matrix& perturbations);

// SR update on the localized covariance. Moments follow the localized update
// equations exactly; members are backed out from the d-column factor (the
// localized covariance generally has rank > N-1, so no N-member ensemble can
// reproduce it). When localization leaves the sample covariance unchanged the
// call delegates to etkf_update.
UpdateResult localized_sr_update(const Ensemble& e, const LinearProblem& problem,
                                 const LocalizationConfig& loc);

namespace detail {

// Square-root transform factors, exposed for the dual-path equivalence tests.
// Both return F with F F^T = C(C_hat) built from the ensemble square root x
// (d x N, columns summing to zero).
Matrix etkf_factor_direct(const Matrix& x, const LinearProblem& problem, const Matrix& u);
Matrix sr_factor_symmetric(const Matrix& x, const LinearProblem& problem);

}  // namespace detail

}  // namespace enkf
