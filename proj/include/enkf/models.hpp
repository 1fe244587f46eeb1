#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "enkf/linalg.hpp"

// Gaussian priors, forward maps, structured covariance generators, and
// deterministic seeded sampling. Sampling is reproducible per (inputs, seed)
// within one build; acceptance checks on samples are statistical, never
// bit-exact across builds.

namespace enkf {

struct GaussianPrior {
  Vector mean;
  CovarianceMatrix cov;

  GaussianPrior(Vector m, CovarianceMatrix c);
  Index dim() const noexcept { return mean.size(); }
};

// Evaluation contract u -> G(u). Linear maps carry their matrix; the tanh
// fixture additionally carries an analytic Jacobian used as a test oracle.
class ForwardMap {
 public:
  static ForwardMap linear(Matrix a);

  // Componentwise G_j(u) = tanh(u_j) + 0.1 * u_{(j+1) mod d}, restricted to
  // the first k outputs. Lipschitz with banded Jacobian.
  static ForwardMap tanh_bandwidth(Index d, Index k);

  Index input_dim() const noexcept { return d_; }
  Index output_dim() const noexcept { return k_; }
  bool is_linear() const noexcept { return linear_.has_value(); }
  const Matrix& matrix() const;
  std::optional<double> lipschitz() const noexcept { return lipschitz_; }

  Vector operator()(const Vector& u) const;
  // Columnwise evaluation of an ensemble (d x N -> k x N).
  Matrix apply(const Matrix& members) const;
  // Analytic Jacobian at u (k x d); throws if the map does not provide one.
  Matrix jacobian(const Vector& u) const;

 private:
  ForwardMap() = default;
  Index d_ = 0;
  Index k_ = 0;
  std::optional<Matrix> linear_;
  std::optional<double> lipschitz_;
  std::function<Vector(const Vector&)> eval_;
  std::function<Matrix(const Vector&)> jac_;
};

struct CovarianceSpec {
  enum class Kind { identity, diagonal_spectrum, ar1, banded, custom };

  Kind kind = Kind::identity;
  Index dim = 0;
  Vector spectrum;      // diagonal_spectrum
  double phi = 0.0;     // ar1
  double sigma2 = 1.0;  // ar1
  Index bandwidth = 0;  // banded
  Vector band_values;   // banded: value at offset |i-j| = b, b = 0..bandwidth
  Matrix custom;        // custom

  static CovarianceSpec identity(Index d);
  static CovarianceSpec diagonal_spectrum(Vector eigenvalues);
  static CovarianceSpec ar1(Index d, double phi, double sigma2);
  static CovarianceSpec banded(Index d, Index bandwidth, Vector values);
  static CovarianceSpec custom_matrix(Matrix m);
};

CovarianceMatrix make_covariance(const CovarianceSpec& spec);

// Geometric spectrum lambda_j = gamma^j (j = 0..d-1) with gamma solved so that
// r2 = trace / max equals the target. Requires 1 <= r2_target <= d.
Vector geometric_spectrum(Index d, double r2_target);

// N particles in R^d, stored one member per column.
class Ensemble {
 public:
  explicit Ensemble(Matrix members);

  Index dim() const noexcept { return members_.rows(); }
  Index size() const noexcept { return members_.cols(); }
  const Matrix& members() const noexcept { return members_; }
  Vector member(Index n) const { return members_.col(n); }

 private:
  Matrix members_;
};

// Members m + L z_n, L a Cholesky factor of C (eigenvalue square root when C
// is singular), z_n i.i.d. standard normal from the seeded generator.
Ensemble sample_ensemble(const GaussianPrior& prior, Index n, std::uint64_t seed);

// sample_ensemble with zero mean.
Ensemble sample_noise(const CovarianceMatrix& gamma, Index n, std::uint64_t seed);

// Standard-normal d x n matrix from a single mt19937_64 stream, column-major
// fill order. Exposed for the MC oracles.
Matrix standard_normal(Index d, Index n, std::uint64_t seed);

}  // namespace enkf
