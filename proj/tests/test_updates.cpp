#include <doctest.h>

#include <cmath>

#include "enkf/oracle.hpp"
#include "enkf/updates.hpp"
#include "test_util.hpp"

using namespace enkf;
using test::max_abs_diff;

namespace {

Matrix scalar(double x) {
  Matrix m(1, 1);
  m << x;
  return m;
}

LinearProblem random_problem(Index d, Index k, std::uint64_t seed) {
  return LinearProblem(test::random_matrix(k, d, seed), test::random_psd(k, seed + 1000, 0.4),
                       test::random_matrix(k, 1, seed + 2000).col(0));
}

Ensemble random_ensemble(Index d, Index n, std::uint64_t seed, double spread = 1.0) {
  return Ensemble(spread * test::random_matrix(d, n, seed));
}

// Sample statistics of the perturbation set, as the offset display uses them.
CovarianceMatrix perturbation_cov(const Matrix& eta) {
  const Vector bar = eta.rowwise().mean();
  const Matrix de = eta.colwise() - bar;
  Matrix g = de * de.transpose() / static_cast<double>(eta.cols() - 1);
  return CovarianceMatrix(0.5 * (g + g.transpose()));
}

Matrix state_noise_cross(const Ensemble& e, const Matrix& eta) {
  const Vector mbar = e.members().rowwise().mean();
  const Vector ebar = eta.rowwise().mean();
  const Matrix du = e.members().colwise() - mbar;
  const Matrix de = eta.colwise() - ebar;
  return du * de.transpose() / static_cast<double>(e.size() - 1);
}

}  // namespace

TEST_SUITE("updates") {

TEST_CASE("po_update with zero perturbations applies the mean update per member") {
  const Index d = 3, k = 2, n = 6;
  const LinearProblem prob = random_problem(d, k, 1);
  const Ensemble e = random_ensemble(d, n, 2);
  const CovarianceMatrix c_hat = sample_cov(e);
  const UpdateResult res = po_update(e, prob, Matrix::Zero(k, n));
  for (Index i = 0; i < n; ++i) {
    CHECK(max_abs_diff(res.updated.member(i), mean_update(e.member(i), c_hat, prob)) <= 1e-12);
  }
}

TEST_CASE("po_update scalar fixture") {
  // members {0, 2}: C_hat = 2, A = 1, Gamma = 2, y = 1 -> K = 1/2
  Matrix members(1, 2);
  members << 0, 2;
  LinearProblem prob(scalar(1), CovarianceMatrix(scalar(2)), Vector::Constant(1, 1.0));
  const UpdateResult res = po_update(Ensemble(members), prob, Matrix::Zero(1, 2));
  CHECK(res.updated.member(0)(0) == doctest::Approx(0.5));
  CHECK(res.updated.member(1)(0) == doctest::Approx(1.5));
}

TEST_CASE("po covariance identity: sample covariance = C(C_hat) + offset") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const Index d = 5, k = 4, n = 12;
    const LinearProblem prob = random_problem(d, k, seed);
    const Ensemble e = random_ensemble(d, n, seed + 50);
    const Matrix eta = sample_noise(prob.gamma(), n, seed + 90).members();

    const UpdateResult res = po_update(e, prob, eta);
    const CovarianceMatrix c_hat = sample_cov(e);
    const SymmetricMatrix o = offset(c_hat, perturbation_cov(eta),
                                     state_noise_cross(e, eta), prob);
    const Matrix reference = cov_update(c_hat, prob).mat() + o.mat();
    const double scale = 1.0 + max_norm(reference);
    CHECK(max_abs_diff(res.sigma_hat.mat(), reference) <= 1e-9 * scale);

    // offset_norm diagnostic equals ||offset|| under the same perturbations
    CHECK(*res.diagnostics.offset_norm ==
          doctest::Approx(operator_norm(o)).epsilon(1e-6));
  }
}

TEST_CASE("offset closed forms") {
  const Index d = 4, k = 3;
  const LinearProblem prob = random_problem(d, k, 33);
  const CovarianceMatrix c_hat = test::random_psd(d, 34);

  // Gamma_hat = Gamma and zero cross term: offset vanishes
  const SymmetricMatrix zero = offset(c_hat, prob.gamma(), Matrix::Zero(d, k), prob);
  CHECK(max_norm(zero.mat()) <= 1e-14);

  // Gamma_hat = 0 and zero cross term: offset = -K Gamma K^T
  const Matrix gain = kalman_gain(c_hat, prob);
  const SymmetricMatrix neg =
      offset(c_hat, CovarianceMatrix(Matrix::Zero(k, k)), Matrix::Zero(d, k), prob);
  CHECK(max_abs_diff(neg.mat(), -gain * prob.gamma().mat() * gain.transpose()) <= 1e-12);
}

TEST_CASE("po expansion oracle matches the realized update") {
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const Index d = 4, k = 3, n = 9;
    const LinearProblem prob = random_problem(d, k, seed);
    const Ensemble e = random_ensemble(d, n, seed + 70);
    const Matrix eta = sample_noise(prob.gamma(), n, seed + 90).members();

    const SymmetricMatrix expansion = oracle::po_covariance_expansion(e, eta, prob);
    const UpdateResult res = po_update(e, prob, eta);
    const double scale = 1.0 + max_norm(expansion.mat());
    CHECK(max_abs_diff(expansion.mat(), res.sigma_hat.mat()) <= 1e-9 * scale);

    // and equals C(C_hat) + offset, per the decomposition
    const CovarianceMatrix c_hat = sample_cov(e);
    const Matrix decomposed =
        cov_update(c_hat, prob).mat() +
        offset(c_hat, perturbation_cov(eta), state_noise_cross(e, eta), prob).mat();
    CHECK(max_abs_diff(expansion.mat(), decomposed) <= 1e-9 * scale);

    // zero perturbations: only the first term survives
    const SymmetricMatrix first =
        oracle::po_covariance_expansion(e, Matrix::Zero(k, n), prob);
    const Matrix gain = kalman_gain(c_hat, prob);
    const Matrix ima = Matrix::Identity(d, d) - gain * prob.a();
    CHECK(max_abs_diff(first.mat(), ima * c_hat.mat() * ima.transpose()) <= 1e-10 * scale);
  }
}

TEST_CASE("etkf with no data keeps the prior covariance") {
  const Index d = 3, n = 5;
  LinearProblem prob(Matrix::Zero(2, d), CovarianceMatrix(Matrix::Identity(2, 2)),
                     Vector::Zero(2));
  const Ensemble e = random_ensemble(d, n, 7);
  const UpdateResult res = etkf_update(e, prob);
  CHECK(max_abs_diff(res.sigma_hat.mat(), sample_cov(e).mat()) <= 1e-12);
  // backed-out ensemble reproduces C_hat as well
  CHECK(max_abs_diff(sample_cov(res.updated).mat(), sample_cov(e).mat()) <= 1e-8);
}

TEST_CASE("etkf scalar fixture") {
  Matrix members(1, 2);
  members << 0.0, std::sqrt(2.0);  // sample variance 1
  LinearProblem prob(scalar(1), CovarianceMatrix(scalar(1)), Vector::Constant(1, 0.3));
  const UpdateResult res = etkf_update(Ensemble(members), prob);
  CHECK(res.sigma_hat(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("sr consistency for etkf and eakf on random instances") {
  for (std::uint64_t seed = 60; seed < 75; ++seed) {
    const Index d = 6, k = 4, n = 9;
    const LinearProblem prob = random_problem(d, k, seed);
    const Ensemble e = random_ensemble(d, n, seed + 11);
    const CovarianceMatrix analysis = cov_update(sample_cov(e), prob);
    const double scale = 1.0 + max_norm(analysis.mat());

    const UpdateResult t = etkf_update(e, prob);
    const UpdateResult a = eakf_update(e, prob);
    CHECK(max_abs_diff(t.sigma_hat.mat(), analysis.mat()) <= 1e-8 * scale);
    CHECK(max_abs_diff(a.sigma_hat.mat(), analysis.mat()) <= 1e-8 * scale);
    CHECK(max_abs_diff(t.sigma_hat.mat(), a.sigma_hat.mat()) <= 1e-8 * scale);

    // SR mean exactness
    const Vector reference = mean_update(sample_mean(e), sample_cov(e), prob);
    CHECK((t.mu_hat - reference).norm() <= 1e-12 * (1.0 + reference.norm()));
    CHECK((a.mu_hat - reference).norm() <= 1e-12 * (1.0 + reference.norm()));
  }
}

TEST_CASE("etkf sigma_hat is invariant across orthogonal transforms") {
  const Index d = 4, k = 3, n = 7;
  const LinearProblem prob = random_problem(d, k, 80);
  const Ensemble e = random_ensemble(d, n, 81);
  const UpdateResult base = etkf_update(e, prob);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix u = test::random_orthogonal(n, 90 + seed);
    const UpdateResult res = etkf_update(e, prob, u);
    CHECK(max_abs_diff(res.sigma_hat.mat(), base.sigma_hat.mat()) <= 1e-10);
  }
  Matrix not_orthogonal = Matrix::Identity(n, n);
  not_orthogonal(0, 0) = 2.0;
  CHECK_THROWS_AS(etkf_update(e, prob, std::optional<Matrix>(not_orthogonal)),
                  InvalidInputError);
}

TEST_CASE("eakf equals the adjustment form with explicit pseudo-inverse") {
  const Index d = 5, k = 3, n = 4;  // N <= d keeps the adjustment matrix small
  const LinearProblem prob = random_problem(d, k, 100);
  const Ensemble e = random_ensemble(d, n, 101);

  const Vector mbar = sample_mean(e);
  const Matrix x = (e.members().colwise() - mbar) / std::sqrt(static_cast<double>(n - 1));

  // B = X (I + M M^T)^{-1/2} X^+ applied to X, with M M^T = X^T A^T G^-1 A X
  const Matrix y = prob.a() * x;
  const Matrix w = y.transpose() * prob.gamma().mat().inverse() * y;
  const SpectralDecomposition eig = sym_eig(SymmetricMatrix(0.5 * (w + w.transpose())));
  const Vector scale = (eig.eigenvalues.array().max(0.0) + 1.0).rsqrt();
  const Matrix root =
      eig.eigenvectors * scale.asDiagonal() * eig.eigenvectors.transpose();
  const Matrix b = x * root * pseudo_inverse(x);
  const Matrix adjusted = b * x;

  const UpdateResult res = eakf_update(e, prob);
  const Matrix factor =
      (res.updated.members().colwise() - res.mu_hat) / std::sqrt(static_cast<double>(n - 1));
  CHECK(max_abs_diff(adjusted, factor) <= 1e-8);
}

TEST_CASE("symmetric transform factor: k-side route equals direct eigendecomposition") {
  for (std::uint64_t seed = 110; seed < 114; ++seed) {
    const Index d = 5, k = 3, n = 8;
    const LinearProblem prob = random_problem(d, k, seed);
    const Matrix x = test::random_matrix(d, n, seed + 5);

    const Matrix y = prob.a() * x;
    const Matrix w = y.transpose() * prob.gamma().mat().inverse() * y;
    const SpectralDecomposition eig = sym_eig(SymmetricMatrix(0.5 * (w + w.transpose())));
    const Vector scale = (eig.eigenvalues.array().max(0.0) + 1.0).rsqrt();
    const Matrix direct =
        x * eig.eigenvectors * scale.asDiagonal() * eig.eigenvectors.transpose();

    CHECK(max_abs_diff(detail::sr_factor_symmetric(x, prob), direct) <= 1e-9);
  }
}

TEST_CASE("direct and symmetric factors produce the same covariance") {
  const Index d = 4, k = 2, n = 6;
  const LinearProblem prob = random_problem(d, k, 120);
  const Matrix x = test::random_matrix(d, n, 121);
  const Matrix f1 = detail::etkf_factor_direct(x, prob, Matrix::Identity(n, n));
  const Matrix f2 = detail::sr_factor_symmetric(x, prob);
  CHECK(max_abs_diff(f1 * f1.transpose(), f2 * f2.transpose()) <= 1e-9);
}

TEST_CASE("sr_backout fixtures") {
  const Vector mu = Vector::Constant(2, 1.5);
  const Ensemble zero = sr_backout(Matrix::Zero(2, 4), mu);
  for (Index i = 0; i < 4; ++i) CHECK(max_abs_diff(zero.member(i), mu) == 0.0);

  Vector v(2);
  v << 0.5, -0.25;
  Matrix factor(2, 2);
  factor.col(0) = v;
  factor.col(1) = -v;
  const Ensemble pm = sr_backout(factor, mu);  // sqrt(N-1) = 1
  CHECK(max_abs_diff(pm.member(0), mu + v) <= 1e-15);
  CHECK(max_abs_diff(pm.member(1), mu - v) <= 1e-15);
  CHECK(max_abs_diff(sample_cov(pm).mat(), 2.0 * v * v.transpose()) <= 1e-14);
}

TEST_CASE("eakf back-out drift vanishes and members carry the analysis moments") {
  const Index d = 4, k = 3, n = 9;
  const LinearProblem prob = random_problem(d, k, 130);
  const Ensemble e = random_ensemble(d, n, 131);
  const UpdateResult res = eakf_update(e, prob);
  CHECK(*res.diagnostics.mean_drift <= 1e-10);
  CHECK(max_abs_diff(sample_cov(res.updated).mat(), res.sigma_hat.mat()) <= 1e-8);
  CHECK((sample_mean(res.updated) - res.mu_hat).norm() <= 1e-10);
}

TEST_CASE("localized po: zero radius on a PD sample covariance is a no-op") {
  const Index d = 3, k = 2, n = 8;  // N > d keeps C_hat positive definite
  const LinearProblem prob = random_problem(d, k, 140);
  const Ensemble e = random_ensemble(d, n, 141);
  const std::uint64_t seed = 999;
  const UpdateResult plain = po_update(e, prob, seed);
  const UpdateResult loc = localized_po_update(e, prob, LocalizationConfig::radius(0.0), seed);
  CHECK((plain.updated.members().array() == loc.updated.members().array()).all());
  CHECK(*loc.diagnostics.radius_used == 0.0);
}

TEST_CASE("localized po: radius beyond every entry freezes the ensemble") {
  const Index d = 3, k = 2, n = 6;
  const LinearProblem prob = random_problem(d, k, 150);
  const Ensemble e = random_ensemble(d, n, 151);
  const double rho = 2.0 * max_norm(sample_cov(e).mat()) + 1.0;
  const UpdateResult res =
      localized_po_update(e, prob, LocalizationConfig::radius(rho), std::uint64_t{3});
  CHECK(max_abs_diff(res.updated.members(), e.members()) <= 1e-14);
}

TEST_CASE("localized po beats plain po on a diagonal truth") {
  // d = 200, N = 40: thresholding removes spurious off-diagonal correlations.
  const Index d = 200, k = 50, n = 40;
  const CovarianceMatrix c = make_covariance(CovarianceSpec::identity(d));
  const GaussianPrior prior(Vector::Zero(d), c);
  Matrix a = Matrix::Zero(k, d);
  for (Index i = 0; i < k; ++i) a(i, i * (d / k)) = 1.0;
  const CovarianceMatrix gamma = make_covariance(CovarianceSpec::identity(k));
  const Vector y = Vector::Ones(k);
  const LinearProblem prob(a, gamma, y);
  const auto [mu, sigma] = oracle::exact_posterior(prior.mean, c, prob);

  const EffectiveDims dims = effective_dims(c);
  const double rho = theorem_radius_cov(dims.max_diag, dims.r_inf, n, 1.0, 1.0);

  int wins = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t es = 7000 + t;
    const Ensemble e = sample_ensemble(prior, n, es);
    const Matrix eta = sample_noise(gamma, n, es + 50000).members();
    const UpdateResult plain = po_update(e, prob, eta);
    const UpdateResult loc =
        localized_po_update(e, prob, LocalizationConfig::radius(rho), eta);
    const double err_plain = operator_norm(SymmetricMatrix(plain.sigma_hat.mat() - sigma.mat()));
    const double err_loc = operator_norm(SymmetricMatrix(loc.sigma_hat.mat() - sigma.mat()));
    if (err_loc < err_plain) ++wins;
  }
  CHECK(wins >= trials * 8 / 10);
}

TEST_CASE("localized sr: zero radius on a PD sample covariance matches etkf") {
  const Index d = 3, k = 2, n = 9;
  const LinearProblem prob = random_problem(d, k, 160);
  const Ensemble e = random_ensemble(d, n, 161);
  const UpdateResult plain = etkf_update(e, prob);
  const UpdateResult loc = localized_sr_update(e, prob, LocalizationConfig::radius(0.0));
  CHECK((plain.updated.members().array() == loc.updated.members().array()).all());
  CHECK(max_abs_diff(plain.sigma_hat.mat(), loc.sigma_hat.mat()) == 0.0);
}

TEST_CASE("localized sr: huge radius collapses the analysis covariance") {
  const Index d = 3, k = 2, n = 6;
  const LinearProblem prob = random_problem(d, k, 170);
  const Ensemble e = random_ensemble(d, n, 171);
  const double rho = 2.0 * max_norm(sample_cov(e).mat()) + 1.0;
  const UpdateResult res = localized_sr_update(e, prob, LocalizationConfig::radius(rho));
  CHECK(max_norm(res.sigma_hat.mat()) <= 1e-14);
  // members collapse onto the (prior-mean) update
  CHECK((sample_mean(res.updated) - res.mu_hat).norm() <= 1e-12);
}

TEST_CASE("localized sr consistency with the localized covariance operator") {
  for (std::uint64_t seed = 180; seed < 184; ++seed) {
    const Index d = 8, k = 5, n = 6;
    const LinearProblem prob = random_problem(d, k, seed);
    const Ensemble e = random_ensemble(d, n, seed + 9);
    const double rho = 0.05;
    const UpdateResult res = localized_sr_update(e, prob, LocalizationConfig::radius(rho));
    const CovarianceMatrix c_rho =
        positive_part(SymmetricMatrix(threshold(sample_cov(e).mat(), rho)));
    const CovarianceMatrix reference = cov_update(c_rho, prob);
    const double scale = 1.0 + max_norm(reference.mat());
    CHECK(max_abs_diff(res.sigma_hat.mat(), reference.mat()) <= 1e-8 * scale);
    CHECK((res.mu_hat - mean_update(sample_mean(e), c_rho, prob)).norm() <=
          1e-10 * (1.0 + res.mu_hat.norm()));
  }
}

TEST_CASE("localized sr beats plain sr on an ar1 truth") {
  const Index d = 400, k = 100, n = 50;
  const CovarianceMatrix c = make_covariance(CovarianceSpec::ar1(d, 0.5, 1.0));
  const GaussianPrior prior(Vector::Zero(d), c);
  Matrix a = Matrix::Zero(k, d);
  for (Index i = 0; i < k; ++i) a(i, 4 * i) = 1.0;
  const LinearProblem prob(a, make_covariance(CovarianceSpec::identity(k)), Vector::Ones(k));
  const auto [mu, sigma] = oracle::exact_posterior(prior.mean, c, prob);

  const EffectiveDims dims = effective_dims(c);
  const double rho = theorem_radius_cov(dims.max_diag, dims.r_inf, n, 1.0, 1.0);

  int wins = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const Ensemble e = sample_ensemble(prior, n, 9000 + t);
    const UpdateResult plain = etkf_update(e, prob);
    const UpdateResult loc = localized_sr_update(e, prob, LocalizationConfig::radius(rho));
    const double err_plain = operator_norm(SymmetricMatrix(plain.sigma_hat.mat() - sigma.mat()));
    const double err_loc = operator_norm(SymmetricMatrix(loc.sigma_hat.mat() - sigma.mat()));
    if (err_loc < err_plain) ++wins;
  }
  CHECK(wins >= trials * 85 / 100);
}

TEST_CASE("po and sr consistency at scale against the exact posterior") {
  const Index d = 5, k = 5, n = 100000;
  const CovarianceMatrix c = test::random_psd(d, 210, 0.3);
  const GaussianPrior prior(Vector::Zero(d), c);
  const LinearProblem prob = random_problem(d, k, 211);
  const auto [mu, sigma] = oracle::exact_posterior(prior.mean, c, prob);
  const Ensemble e = sample_ensemble(prior, n, 212);

  // MC tolerances: 5 x the CLT scale for the mean, inflated by the
  // update-operator Lipschitz constants; covariance via the same factors.
  const double na = operator_norm(prob.a());
  const double ngi = prob.gamma_inv_norm();
  const double nc = operator_norm(c);
  const double gain_factor = 1.0 + na * na * ngi * nc;
  const double tol_mean =
      5.0 * std::sqrt(c.mat().trace() / static_cast<double>(n)) * gain_factor;
  const double r2 = effective_dims(c).r2;
  const double cov_lip = 1.0 + 2.0 * na * na * ngi * nc + std::pow(na, 4) * ngi * ngi * nc * nc;
  const double tol_cov =
      5.0 * nc * std::sqrt(r2 / static_cast<double>(n)) * cov_lip +
      5.0 * ngi * std::sqrt(prob.gamma().mat().trace() / static_cast<double>(n)) * nc * na;

  const UpdateResult sr = etkf_update(e, prob);
  CHECK((sr.mu_hat - mu).norm() <= tol_mean);
  CHECK(operator_norm(SymmetricMatrix(sr.sigma_hat.mat() - sigma.mat())) <= tol_cov);

  const UpdateResult po = po_update(e, prob, std::uint64_t{213});
  CHECK((po.mu_hat - mu).norm() <= tol_mean);
  CHECK(operator_norm(SymmetricMatrix(po.sigma_hat.mat() - sigma.mat())) <= tol_cov);
}

}  // TEST_SUITE
