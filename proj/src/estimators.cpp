#include "enkf/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "enkf/kernels.hpp"

namespace enkf {

SparsityClass::SparsityClass(double q_in, double r_q_in) : q(q_in), r_q(r_q_in) {
  if (!(q >= 0.0 && q < 1.0)) throw InvalidInputError("SparsityClass: q must be in [0,1)");
  if (!(r_q > 0.0)) throw InvalidInputError("SparsityClass: R_q must be > 0");
}

LocalizationConfig LocalizationConfig::radius(double rho) {
  if (!(rho >= 0.0)) throw InvalidInputError("LocalizationConfig: radius must be >= 0");
  LocalizationConfig c;
  c.explicit_ = true;
  c.rho_ = rho;
  return c;
}

LocalizationConfig LocalizationConfig::derived(double t, double c_in) {
  if (!(t >= 1.0)) throw InvalidInputError("LocalizationConfig: t must be >= 1");
  if (!(c_in > 0.0)) throw InvalidInputError("LocalizationConfig: c must be > 0");
  LocalizationConfig c;
  c.explicit_ = false;
  c.t_ = t;
  c.c_ = c_in;
  return c;
}

double LocalizationConfig::rho() const {
  if (!explicit_) throw InvalidInputError("LocalizationConfig: no explicit radius");
  return rho_;
}

double LocalizationConfig::t() const {
  if (explicit_) throw InvalidInputError("LocalizationConfig: no derived parameters");
  return t_;
}

double LocalizationConfig::c() const {
  if (explicit_) throw InvalidInputError("LocalizationConfig: no derived parameters");
  return c_;
}

double LocalizationConfig::resolve(const EffectiveDims& dims, Index n_ensemble) const {
  if (explicit_) return rho_;
  return theorem_radius_cov(dims.max_diag, dims.r_inf, n_ensemble, t_, c_);
}

Vector sample_mean(const Ensemble& e) { return kernels::col_mean(e.members()); }

CovarianceMatrix sample_cov(const Ensemble& e) {
  const Index n = e.size();
  const Matrix dev = kernels::subtract_col(e.members(), kernels::col_mean(e.members()));
  Matrix c = kernels::crossprod(dev, dev) / static_cast<double>(n - 1);
  return CovarianceMatrix(0.5 * (c + c.transpose()));
}

Matrix sample_cross_cov(const Ensemble& x, const Ensemble& y) {
  if (x.size() != y.size()) {
    throw InvalidInputError("sample_cross_cov: ensemble sizes disagree");
  }
  const Index n = x.size();
  const Matrix dx = kernels::subtract_col(x.members(), kernels::col_mean(x.members()));
  const Matrix dy = kernels::subtract_col(y.members(), kernels::col_mean(y.members()));
  return kernels::crossprod(dx, dy) / static_cast<double>(n - 1);
}

Matrix threshold(const Matrix& b, double rho) { return kernels::threshold(b, rho); }

CovarianceMatrix positive_part(const SymmetricMatrix& s) {
  SpectralDecomposition eig = sym_eig(s);
  if (eig.eigenvalues.minCoeff() >= 0.0) return s;
  Vector lam = eig.eigenvalues.cwiseMax(0.0);
  Matrix out = eig.eigenvectors * lam.asDiagonal() * eig.eigenvectors.transpose();
  return CovarianceMatrix(0.5 * (out + out.transpose()));
}

EffectiveDims effective_dims(const CovarianceMatrix& s) {
  EffectiveDims dims;
  dims.op_norm = operator_norm(s);
  if (dims.op_norm <= 0.0) {
    throw InvalidInputError("effective_dims: zero matrix has no effective dimension");
  }
  dims.trace = s.mat().trace();
  dims.r2 = dims.trace / dims.op_norm;

  const Vector diag_v = s.mat().diagonal();
  std::vector<double> diag(diag_v.data(), diag_v.data() + diag_v.size());
  std::sort(diag.begin(), diag.end(), std::greater<double>());
  if (diag.front() <= 0.0) {
    throw InvalidInputError("effective_dims: largest diagonal entry must be positive");
  }
  dims.max_diag = diag.front();
  double best = 0.0;
  for (std::size_t j = 0; j < diag.size(); ++j) {
    best = std::max(best, diag[j] * std::log(static_cast<double>(j) + 2.0));
  }
  dims.r_inf = best / dims.max_diag;
  return dims;
}

double theorem_radius_cov(double diag_max, double r_inf, Index n, double t, double c) {
  if (!(t >= 1.0) || n < 1 || !(c > 0.0) || !(diag_max > 0.0) || !(r_inf > 0.0)) {
    throw InvalidInputError("theorem_radius_cov: invalid parameters");
  }
  const double nn = static_cast<double>(n);
  const double term = std::max({std::sqrt(r_inf / nn), t * r_inf / nn,
                                std::sqrt(t / nn), t / nn});
  return c * diag_max * term;
}

double theorem_radius_cross(double diag_max_u, double diag_max_p, double rinf_u,
                            double rinf_p, Index n, double t, double c) {
  if (!(t >= 1.0) || n < 1 || !(c > 0.0) || !(diag_max_u > 0.0) || !(diag_max_p > 0.0) ||
      !(rinf_u > 0.0) || !(rinf_p > 0.0)) {
    throw InvalidInputError("theorem_radius_cross: invalid parameters");
  }
  const double nn = static_cast<double>(n);
  const double tn = std::max(t / nn, std::sqrt(t / nn));
  const double rmax = std::max(std::sqrt(rinf_u), std::sqrt(rinf_p));
  const double term = std::max(tn * rmax, std::sqrt(rinf_u / nn) * std::sqrt(rinf_p / nn));
  return c * std::max(diag_max_u, diag_max_p) * term;
}

double row_lq_norm(const Matrix& b, double q) {
  if (!(q >= 0.0 && q < 1.0)) throw InvalidInputError("row_lq_norm: q must be in [0,1)");
  if (!b.allFinite()) throw InvalidInputError("row_lq_norm: non-finite entries");
  double best = 0.0;
  for (Index i = 0; i < b.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < b.cols(); ++j) {
      const double x = std::abs(b(i, j));
      if (x == 0.0) continue;
      acc += (q == 0.0) ? 1.0 : std::pow(x, q);
    }
    best = std::max(best, acc);
  }
  return best;
}

}  // namespace enkf
