#pragma once

#include "enkf/linalg.hpp"
#include "enkf/models.hpp"

// Sample and thresholded covariance estimators, positive-part projection,
// effective dimensions, and the theorem-prescribed localization radii.

namespace enkf {

struct EffectiveDims {
  double r2 = 0.0;       // trace / operator norm
  double r_inf = 0.0;    // max_j diag_(j) log(j+1) / diag_(1), natural log
  double trace = 0.0;
  double op_norm = 0.0;
  double max_diag = 0.0;
};

// Soft-sparsity class parameters: max row lq quasi-norm <= R_q, q in [0,1).
struct SparsityClass {
  double q = 0.0;
  double r_q = 0.0;

  SparsityClass(double q_in, double r_q_in);
};

// Exactly one of an explicit radius or derived (t, c) parameters feeding the
// covariance-estimation radius formula.
class LocalizationConfig {
 public:
  static LocalizationConfig radius(double rho);
  static LocalizationConfig derived(double t, double c);

  bool is_explicit() const noexcept { return explicit_; }
  double rho() const;
  double t() const;
  double c() const;

  // Explicit radius, or the theorem radius evaluated on plug-in dims.
  double resolve(const EffectiveDims& dims, Index n_ensemble) const;

 private:
  LocalizationConfig() = default;
  bool explicit_ = false;
  double rho_ = 0.0;
  double t_ = 1.0;
  double c_ = 1.0;
};

Vector sample_mean(const Ensemble& e);

// Unbiased sample covariance, divisor N-1.
CovarianceMatrix sample_cov(const Ensemble& e);

// Cross covariance (1/(N-1)) sum (x_n - xbar)(y_n - ybar)^T, d x k.
Matrix sample_cross_cov(const Ensemble& x, const Ensemble& y);

// Elementwise localization: entries with |entry| >= rho kept, others zeroed.
Matrix threshold(const Matrix& b, double rho);

// Eigenvalue-clipped PSD projection sum (0 v lambda_j) v_j v_j^T. Returns the
// input unchanged when it is already PSD.
CovarianceMatrix positive_part(const SymmetricMatrix& s);

EffectiveDims effective_dims(const CovarianceMatrix& s);

// rho = c * diag_max * max( sqrt(r_inf/N), t r_inf/N, sqrt(t/N), t/N )
double theorem_radius_cov(double diag_max, double r_inf, Index n, double t, double c);

// rho = c * (diag_max_u v diag_max_p) *
//       max( (t/N v sqrt(t/N)) (sqrt(rinf_u) v sqrt(rinf_p)),
//            sqrt(rinf_u/N) sqrt(rinf_p/N) )
double theorem_radius_cross(double diag_max_u, double diag_max_p, double rinf_u,
                            double rinf_p, Index n, double t, double c);

// max over rows of sum_j |B_ij|^q, q in [0,1); q = 0 counts nonzeros.
double row_lq_norm(const Matrix& b, double q);

}  // namespace enkf
