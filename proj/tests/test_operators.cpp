#include <doctest.h>

#include <cmath>

#include "enkf/operators.hpp"
#include "enkf/oracle.hpp"
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
  const Matrix a = test::random_matrix(k, d, seed);
  const CovarianceMatrix gamma = test::random_psd(k, seed + 1000, 0.4);
  const Vector y = test::random_matrix(k, 1, seed + 2000).col(0);
  return LinearProblem(a, gamma, y);
}

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("kalman_gain scalar and diagonal fixtures") {
  CHECK(kalman_gain(CovarianceMatrix(scalar(2)), scalar(1), CovarianceMatrix(scalar(2)))(0, 0) ==
        doctest::Approx(0.5));

  const Matrix k2 = kalman_gain(CovarianceMatrix(Matrix::Identity(2, 2)),
                                Matrix::Identity(2, 2),
                                CovarianceMatrix(Matrix::Identity(2, 2)));
  CHECK(max_abs_diff(k2, 0.5 * Matrix::Identity(2, 2)) <= 1e-14);

  Matrix c(2, 2);
  c << 1, 0, 0, 4;
  Matrix a(1, 2);
  a << 1, 0;
  const Matrix k = kalman_gain(CovarianceMatrix(c), a, CovarianceMatrix(scalar(1)));
  CHECK(k(0, 0) == doctest::Approx(0.5));
  CHECK(k(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("kalman gain identity holds on random instances") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Index d = 6, k = 4;
    const LinearProblem prob = random_problem(d, k, seed);
    const CovarianceMatrix c = test::random_psd(d, seed + 3000);
    const Matrix gain = kalman_gain(c, prob);
    const Matrix s = prob.a() * c.mat() * prob.a().transpose() + prob.gamma().mat();
    const double scale = 1.0 + max_norm(Matrix(c.mat() * prob.a().transpose()));
    CHECK(max_abs_diff(gain * s, c.mat() * prob.a().transpose()) <= 1e-9 * scale);
  }
}

TEST_CASE("gamma must be positive definite") {
  Matrix indef(1, 1);
  indef << 0.0;
  CHECK_THROWS_AS(kalman_gain(CovarianceMatrix(scalar(1)), scalar(1),
                              CovarianceMatrix(indef)),
                  NotPositiveDefiniteError);
}

TEST_CASE("mean_update fixtures") {
  LinearProblem prob(scalar(1), CovarianceMatrix(scalar(1)), Vector::Constant(1, 2.0));
  const Vector mu = mean_update(Vector::Zero(1), CovarianceMatrix(scalar(1)), prob);
  CHECK(mu(0) == doctest::Approx(1.0));

  // zero innovation returns the mean exactly
  Vector m(2);
  m << 0.7, -0.3;
  const Matrix a = Matrix::Identity(2, 2);
  LinearProblem zero_innov(a, CovarianceMatrix(Matrix::Identity(2, 2)), a * m);
  CHECK(max_abs_diff(mean_update(m, test::random_psd(2, 9), zero_innov), m) <= 1e-14);

  Matrix c(2, 2);
  c << 1, 0, 0, 4;
  LinearProblem diag_prob(Matrix::Identity(2, 2), CovarianceMatrix(Matrix::Identity(2, 2)),
                          Vector::Ones(2));
  const Vector mu2 = mean_update(Vector::Zero(2), CovarianceMatrix(c), diag_prob);
  CHECK(mu2(0) == doctest::Approx(0.5));
  CHECK(mu2(1) == doctest::Approx(0.8));
}

TEST_CASE("cov_update fixtures and Loewner sandwich") {
  CHECK(cov_update(CovarianceMatrix(scalar(1)), scalar(1), CovarianceMatrix(scalar(1)))(0, 0) ==
        doctest::Approx(0.5));

  Matrix c(2, 2);
  c << 1, 0, 0, 4;
  const CovarianceMatrix out = cov_update(CovarianceMatrix(c), Matrix::Identity(2, 2),
                                          CovarianceMatrix(Matrix::Identity(2, 2)));
  CHECK(out(0, 0) == doctest::Approx(0.5));
  CHECK(out(1, 1) == doctest::Approx(0.8));
  CHECK(out(0, 1) == doctest::Approx(0.0));

  // A = 0: no information, covariance unchanged
  const CovarianceMatrix c5 = test::random_psd(5, 17);
  const CovarianceMatrix same =
      cov_update(c5, Matrix::Zero(3, 5), CovarianceMatrix(Matrix::Identity(3, 3)));
  CHECK(max_abs_diff(same.mat(), c5.mat()) <= 1e-14);

  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const CovarianceMatrix q = test::random_psd(5, seed);
    const LinearProblem prob = random_problem(5, 3, seed);
    const CovarianceMatrix updated = cov_update(q, prob);
    const double floor = -1e-8 * operator_norm(q);
    CHECK(sym_eig(updated).eigenvalues.minCoeff() >= floor);
    CHECK(sym_eig(SymmetricMatrix(q.mat() - updated.mat())).eigenvalues.minCoeff() >= floor);
  }
}

TEST_CASE("nonlinear_gain fixtures") {
  CHECK(nonlinear_gain(scalar(1), CovarianceMatrix(scalar(1)), CovarianceMatrix(scalar(1)))(0, 0) ==
        doctest::Approx(0.5));

  // zero prediction covariance: P = Cup Gamma^{-1}
  const Matrix cup = test::random_matrix(3, 2, 41);
  const CovarianceMatrix gamma = test::random_psd(2, 42, 0.4);
  const Matrix p = nonlinear_gain(cup, CovarianceMatrix(Matrix::Zero(2, 2)), gamma);
  CHECK(max_abs_diff(p, cup * gamma.mat().inverse()) <= 1e-10);

  CHECK_THROWS_AS(nonlinear_gain(cup, CovarianceMatrix(Matrix::Zero(2, 2)), gamma, 0.0),
                  InvalidInputError);
}

TEST_CASE("nonlinear gain collapses to the Kalman gain on linear pairs") {
  for (std::uint64_t seed = 50; seed < 55; ++seed) {
    const Index d = 5, k = 3;
    const LinearProblem prob = random_problem(d, k, seed);
    const CovarianceMatrix c = test::random_psd(d, seed + 500);
    const Matrix cup = c.mat() * prob.a().transpose();
    Matrix cpp = prob.a() * c.mat() * prob.a().transpose();
    const Matrix via_p = nonlinear_gain(cup, CovarianceMatrix(0.5 * (cpp + cpp.transpose())),
                                        prob.gamma());
    CHECK(max_abs_diff(via_p, kalman_gain(c, prob)) <= 1e-12);
  }
}

TEST_CASE("lipschitz_bounds closed forms") {
  LinearProblem prob(scalar(1), CovarianceMatrix(scalar(1)), Vector::Zero(1));
  const BoundReport same = lipschitz_bounds(CovarianceMatrix(scalar(1)),
                                            CovarianceMatrix(scalar(1)), prob);
  CHECK(same.gain_lipschitz == doctest::Approx(0.0));

  const BoundReport r = lipschitz_bounds(CovarianceMatrix(scalar(1)),
                                         CovarianceMatrix(scalar(2)), prob);
  // |Q-P| * |A| * |Gi| * (1 + min * |A|^2 * |Gi|) = 1*1*1*(1+1) = 2
  CHECK(r.gain_lipschitz == doctest::Approx(2.0));
  CHECK(r.gain_bound == doctest::Approx(2.0));  // |Q| |A| |Gi|
}

TEST_CASE("bound dominance on random PSD pairs") {
  int checked = 0;
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const Index d = 4, k = 3;
    const LinearProblem prob = random_problem(d, k, seed);
    const CovarianceMatrix p = test::random_psd(d, seed + 7000);
    const CovarianceMatrix q = test::random_psd(d, seed + 8000);
    const Vector m = test::random_matrix(d, 1, seed + 9000).col(0);
    const Vector m2 = test::random_matrix(d, 1, seed + 9500).col(0);
    const BoundReport r = lipschitz_bounds(p, q, prob, &m, &m2);

    const Matrix kp = kalman_gain(p, prob);
    const Matrix kq = kalman_gain(q, prob);
    CHECK(operator_norm(Matrix(kq - kp)) <= r.gain_lipschitz + 1e-12);
    CHECK(operator_norm(kq) <= r.gain_bound + 1e-12);

    const Vector mq = mean_update(m, q, prob);
    const Vector mp = mean_update(m2, p, prob);
    CHECK(mq.norm() <= r.mean_bound + 1e-12);
    CHECK((mq - mp).norm() <= r.mean_lipschitz + 1e-12);

    const CovarianceMatrix cq = cov_update(q, prob);
    const CovarianceMatrix cp = cov_update(p, prob);
    CHECK(operator_norm(SymmetricMatrix(cq.mat() - cp.mat())) <= r.cov_lipschitz + 1e-12);

    // Nonlinear-gain lemma on the linear-case pairs.
    auto pair_for = [&prob](const CovarianceMatrix& c) {
      Matrix cpp = prob.a() * c.mat() * prob.a().transpose();
      return std::make_pair(Matrix(c.mat() * prob.a().transpose()),
                            CovarianceMatrix(0.5 * (cpp + cpp.transpose())));
    };
    const auto [pu, ppp] = pair_for(p);
    const auto [qu, qpp] = pair_for(q);
    const Matrix gp = nonlinear_gain(pu, ppp, prob.gamma());
    const Matrix gq = nonlinear_gain(qu, qpp, prob.gamma());
    CHECK(operator_norm(gq) <= r.nonlinear_gain_bound + 1e-12);
    CHECK(operator_norm(Matrix(gq - gp)) <= r.nonlinear_gain_lipschitz + 1e-12);
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("operators agree with the one-shot posterior display") {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    const Index d = 5, k = 4;
    const LinearProblem prob = random_problem(d, k, seed);
    const CovarianceMatrix c = test::random_psd(d, seed + 100);
    const Vector m = test::random_matrix(d, 1, seed + 200).col(0);
    const auto [mu, sigma] = oracle::exact_posterior(m, c, prob);
    CHECK((mean_update(m, c, prob) - mu).norm() <= 1e-10 * (1.0 + mu.norm()));
    CHECK(max_abs_diff(cov_update(c, prob).mat(), sigma.mat()) <=
          1e-10 * (1.0 + max_norm(sigma.mat())));
  }
}

}  // TEST_SUITE
