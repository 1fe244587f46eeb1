#include "enkf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace enkf {

bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite entries");
  }
  if (m.rows() < 1 || m.cols() < 1) {
    throw InvalidInputError(std::string(what) + ": empty matrix");
  }
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(Matrix s) {
  require_finite(s, "SymmetricMatrix");
  if (s.rows() != s.cols()) {
    throw InvalidInputError("SymmetricMatrix: matrix is not square");
  }
  const double scale = 1.0 + s.cwiseAbs().maxCoeff();
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    throw InvalidInputError("SymmetricMatrix: asymmetry " + std::to_string(asym) +
                            " exceeds tolerance");
  }
  s_ = 0.5 * (s + s.transpose());
}

Matrix SpectralDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

double operator_norm(const Matrix& m) {
  require_finite(m, "operator_norm");
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double operator_norm(const SymmetricMatrix& s) {
  if (s.dim() == 1) return std::abs(s(0, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.mat(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericError("operator_norm: eigensolver did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double max_norm(const Matrix& m) {
  require_finite(m, "max_norm");
  return m.cwiseAbs().maxCoeff();
}

double linf_induced_norm(const Matrix& m) {
  require_finite(m, "linf_induced_norm");
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

SpectralDecomposition sym_eig(const SymmetricMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.mat());
  if (es.info() != Eigen::Success) {
    throw NumericError("sym_eig: eigensolver did not converge");
  }
  SpectralDecomposition out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = es.eigenvectors().rowwise().reverse();
  return out;
}

Matrix sqrt_factor(const SymmetricMatrix& s) {
  SpectralDecomposition eig = sym_eig(s);
  const double lmax = eig.eigenvalues.size() ? eig.eigenvalues(0) : 0.0;
  const double scale = std::max(1.0, lmax);
  Vector lam = eig.eigenvalues;
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -kPsdTol * scale) {
      throw NotPsdError("sqrt_factor: eigenvalue " + std::to_string(lam(i)) +
                        " below PSD tolerance");
    }
    if (lam(i) < 0.0) lam(i) = 0.0;
  }
  return eig.eigenvectors * lam.cwiseSqrt().asDiagonal();
}

Matrix pseudo_inverse(const Matrix& m, double tol) {
  require_finite(m, "pseudo_inverse");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  if (tol < 0.0) {
    tol = std::numeric_limits<double>::epsilon() *
          static_cast<double>(std::max(m.rows(), m.cols())) * smax;
  }
  Vector inv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix cholesky_pd(const SymmetricMatrix& s) {
  Eigen::LLT<Matrix> llt(s.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("cholesky_pd: matrix is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace enkf
