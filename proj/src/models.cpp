#include "enkf/models.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "enkf/kernels.hpp"

namespace enkf {

GaussianPrior::GaussianPrior(Vector m, CovarianceMatrix c)
    : mean(std::move(m)), cov(std::move(c)) {
  if (mean.size() != cov.dim()) {
    throw InvalidInputError("GaussianPrior: mean/covariance dimensions disagree");
  }
  if (!mean.allFinite()) {
    throw InvalidInputError("GaussianPrior: non-finite mean");
  }
}

ForwardMap ForwardMap::linear(Matrix a) {
  if (a.rows() < 1 || a.cols() < 1 || !a.allFinite()) {
    throw InvalidInputError("ForwardMap::linear: invalid matrix");
  }
  ForwardMap f;
  f.d_ = a.cols();
  f.k_ = a.rows();
  f.lipschitz_ = operator_norm(a);
  f.linear_ = std::move(a);
  return f;
}

ForwardMap ForwardMap::tanh_bandwidth(Index d, Index k) {
  if (d < 1 || k < 1 || k > d) {
    throw InvalidInputError("ForwardMap::tanh_bandwidth: need 1 <= k <= d");
  }
  ForwardMap f;
  f.d_ = d;
  f.k_ = k;
  f.lipschitz_ = 1.1;  // ||J|| <= sqrt(||J||_1 ||J||_inf) <= 1.1
  f.eval_ = [d, k](const Vector& u) {
    Vector g(k);
    for (Index j = 0; j < k; ++j) {
      g(j) = std::tanh(u(j)) + 0.1 * u((j + 1) % d);
    }
    return g;
  };
  f.jac_ = [d, k](const Vector& u) {
    Matrix jac = Matrix::Zero(k, d);
    for (Index j = 0; j < k; ++j) {
      const double t = std::tanh(u(j));
      jac(j, j) += 1.0 - t * t;
      jac(j, (j + 1) % d) += 0.1;
    }
    return jac;
  };
  return f;
}

const Matrix& ForwardMap::matrix() const {
  if (!linear_) throw InvalidInputError("ForwardMap: map is not linear");
  return *linear_;
}

Vector ForwardMap::operator()(const Vector& u) const {
  if (u.size() != d_) throw InvalidInputError("ForwardMap: input dimension mismatch");
  if (!u.allFinite()) throw InvalidInputError("ForwardMap: non-finite input");
  if (linear_) return *linear_ * u;
  return eval_(u);
}

Matrix ForwardMap::apply(const Matrix& members) const {
  if (members.rows() != d_) {
    throw InvalidInputError("ForwardMap::apply: member dimension mismatch");
  }
  if (linear_) return kernels::matmul(*linear_, members);
  Matrix out(k_, members.cols());
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < members.cols(); ++n) {
    out.col(n) = eval_(members.col(n));
  }
  return out;
}

Matrix ForwardMap::jacobian(const Vector& u) const {
  if (linear_) return *linear_;
  if (!jac_) throw InvalidInputError("ForwardMap: no Jacobian available");
  return jac_(u);
}

CovarianceSpec CovarianceSpec::identity(Index d) {
  if (d < 1) throw InvalidInputError("CovarianceSpec: dim must be >= 1");
  CovarianceSpec s;
  s.kind = Kind::identity;
  s.dim = d;
  return s;
}

CovarianceSpec CovarianceSpec::diagonal_spectrum(Vector eigenvalues) {
  if (eigenvalues.size() < 1 || !eigenvalues.allFinite() || eigenvalues.minCoeff() < 0.0) {
    throw InvalidInputError("CovarianceSpec: diagonal spectrum must be nonnegative");
  }
  CovarianceSpec s;
  s.kind = Kind::diagonal_spectrum;
  s.dim = eigenvalues.size();
  s.spectrum = std::move(eigenvalues);
  return s;
}

CovarianceSpec CovarianceSpec::ar1(Index d, double phi, double sigma2) {
  if (d < 1) throw InvalidInputError("CovarianceSpec: dim must be >= 1");
  if (!(std::abs(phi) < 1.0)) throw InvalidInputError("CovarianceSpec: ar1 requires |phi| < 1");
  if (!(sigma2 >= 0.0)) throw InvalidInputError("CovarianceSpec: ar1 requires sigma2 >= 0");
  CovarianceSpec s;
  s.kind = Kind::ar1;
  s.dim = d;
  s.phi = phi;
  s.sigma2 = sigma2;
  return s;
}

CovarianceSpec CovarianceSpec::banded(Index d, Index bandwidth, Vector values) {
  if (d < 1 || bandwidth < 0 || bandwidth >= d) {
    throw InvalidInputError("CovarianceSpec: banded requires 0 <= bandwidth < dim");
  }
  if (values.size() != bandwidth + 1 || !values.allFinite()) {
    throw InvalidInputError("CovarianceSpec: banded needs bandwidth+1 finite values");
  }
  CovarianceSpec s;
  s.kind = Kind::banded;
  s.dim = d;
  s.bandwidth = bandwidth;
  s.band_values = std::move(values);
  return s;
}

CovarianceSpec CovarianceSpec::custom_matrix(Matrix m) {
  CovarianceSpec s;
  s.kind = Kind::custom;
  s.dim = m.rows();
  s.custom = std::move(m);
  return s;
}

namespace {

void require_psd(const SymmetricMatrix& s, const char* what) {
  SpectralDecomposition eig = sym_eig(s);
  const double scale = std::max(1.0, eig.eigenvalues.size() ? eig.eigenvalues(0) : 0.0);
  if (eig.eigenvalues.minCoeff() < -kPsdTol * scale) {
    throw InvalidInputError(std::string(what) + ": generated matrix is not PSD");
  }
}

}  // namespace

CovarianceMatrix make_covariance(const CovarianceSpec& spec) {
  switch (spec.kind) {
    case CovarianceSpec::Kind::identity:
      return CovarianceMatrix(Matrix::Identity(spec.dim, spec.dim));
    case CovarianceSpec::Kind::diagonal_spectrum: {
      Matrix m = Matrix::Zero(spec.spectrum.size(), spec.spectrum.size());
      m.diagonal() = spec.spectrum;
      return CovarianceMatrix(std::move(m));
    }
    case CovarianceSpec::Kind::ar1: {
      Matrix m(spec.dim, spec.dim);
      for (Index i = 0; i < spec.dim; ++i) {
        for (Index j = 0; j < spec.dim; ++j) {
          m(i, j) = spec.sigma2 * std::pow(spec.phi, std::abs(static_cast<double>(i - j)));
        }
      }
      return CovarianceMatrix(std::move(m));
    }
    case CovarianceSpec::Kind::banded: {
      Matrix m = Matrix::Zero(spec.dim, spec.dim);
      for (Index i = 0; i < spec.dim; ++i) {
        for (Index b = 0; b <= spec.bandwidth; ++b) {
          if (i + b < spec.dim) {
            m(i, i + b) = spec.band_values(b);
            m(i + b, i) = spec.band_values(b);
          }
        }
      }
      CovarianceMatrix cov{std::move(m)};
      require_psd(cov, "make_covariance(banded)");
      return cov;
    }
    case CovarianceSpec::Kind::custom: {
      CovarianceMatrix cov{spec.custom};
      require_psd(cov, "make_covariance(custom)");
      return cov;
    }
  }
  throw InvalidInputError("make_covariance: unknown kind");
}

Vector geometric_spectrum(Index d, double r2_target) {
  if (d < 1 || r2_target < 1.0 || r2_target > static_cast<double>(d)) {
    throw InvalidInputError("geometric_spectrum: need 1 <= r2_target <= d");
  }
  auto r2_of = [d](double gamma) {
    // trace / max for lambda_j = gamma^j, gamma in [0, 1]
    if (gamma >= 1.0) return static_cast<double>(d);
    double tr = (1.0 - std::pow(gamma, static_cast<double>(d))) / (1.0 - gamma);
    return tr;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (r2_of(mid) < r2_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double gamma = 0.5 * (lo + hi);
  Vector lam(d);
  for (Index j = 0; j < d; ++j) lam(j) = std::pow(gamma, static_cast<double>(j));
  return lam;
}

Ensemble::Ensemble(Matrix members) : members_(std::move(members)) {
  if (members_.cols() < 2) {
    throw InvalidInputError("Ensemble: need at least 2 members");
  }
  if (members_.rows() < 1 || !members_.allFinite()) {
    throw InvalidInputError("Ensemble: invalid member matrix");
  }
}

Matrix standard_normal(Index d, Index n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix z(d, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < d; ++i) z(i, j) = gauss(eng);
  }
  return z;
}

namespace {

// Cholesky factor when C is PD, eigenvalue square root otherwise.
Matrix sampling_factor(const CovarianceMatrix& c) {
  try {
    return cholesky_pd(c);
  } catch (const NotPositiveDefiniteError&) {
    return sqrt_factor(c);  // raises NotPsdError when C is indefinite
  }
}

}  // namespace

Ensemble sample_ensemble(const GaussianPrior& prior, Index n, std::uint64_t seed) {
  if (n < 2) throw InvalidInputError("sample_ensemble: need N >= 2");
  const Matrix l = sampling_factor(prior.cov);
  const Matrix z = standard_normal(prior.dim(), n, seed);
  return Ensemble(kernels::add_col(kernels::matmul(l, z), prior.mean));
}

Ensemble sample_noise(const CovarianceMatrix& gamma, Index n, std::uint64_t seed) {
  GaussianPrior zero_mean(Vector::Zero(gamma.dim()), gamma);
  return sample_ensemble(zero_mean, n, seed);
}

}  // namespace enkf
