#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

// Dense symmetric/rectangular matrix primitives shared by the whole library.
// Everything here is pure and value-semantic; safe to share across threads.

namespace enkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Raised when a matrix required to be positive definite fails its Cholesky check.
class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

// Raised when a matrix required to be PSD has an eigenvalue below -1e-8 * scale.
class NotPsdError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPsdTol = 1e-8;

bool all_finite(const Matrix& m);

// Symmetric matrix with validated symmetry: max|S - S^T| <= 1e-10 * (1 + max|S|).
// The stored matrix is exactly symmetrized on construction.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix s);

  const Matrix& mat() const noexcept { return s_; }
  Index dim() const noexcept { return s_.rows(); }
  double operator()(Index i, Index j) const { return s_(i, j); }

 private:
  Matrix s_;
};

// Covariance matrices are symmetric; PSD-ness is enforced by the operations
// that require it (sqrt_factor, cholesky_pd, sampling), not at construction.
using CovarianceMatrix = SymmetricMatrix;

struct SpectralDecomposition {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // orthonormal columns, aligned with eigenvalues

  Matrix reconstruct() const;
};

// Largest singular value. Zero iff the matrix is zero.
double operator_norm(const Matrix& m);
// Symmetric fast path: max |eigenvalue|.
double operator_norm(const SymmetricMatrix& s);

// max_ij |M_ij|
double max_norm(const Matrix& m);

// Induced infinity norm: max over rows of the row's l1 sum.
double linf_induced_norm(const Matrix& m);

SpectralDecomposition sym_eig(const SymmetricMatrix& s);

// Factor X with X X^T = S (within 1e-8 * (1 + max|S|)). Eigenvalues in
// [-1e-8 * scale, 0) are clamped to zero; anything lower raises NotPsdError.
Matrix sqrt_factor(const SymmetricMatrix& s);

// Moore-Penrose pseudo-inverse. tol < 0 selects the default
// machine_eps * max(rows, cols) * largest_singular_value cutoff.
Matrix pseudo_inverse(const Matrix& m, double tol = -1.0);

// Lower-triangular L with L L^T = S, or NotPositiveDefiniteError.
Matrix cholesky_pd(const SymmetricMatrix& s);

}  // namespace enkf
