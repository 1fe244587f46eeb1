#include "enkf/kernels.hpp"

#include <cmath>

namespace enkf::kernels {

namespace {

void check_mul_dims(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidInputError("matmul: inner dimensions disagree");
  }
}

void check_pair(const Matrix& du, const Matrix& dg) {
  if (du.cols() != dg.cols()) {
    throw InvalidInputError("crossprod: column counts disagree");
  }
}

}  // namespace

namespace serial {

Vector col_mean(const Matrix& m) {
  const Index d = m.rows();
  const Index n = m.cols();
  Vector out(d);
  for (Index i = 0; i < d; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) acc += m(i, j);
    out(i) = acc / static_cast<double>(n);
  }
  return out;
}

Matrix subtract_col(const Matrix& m, const Vector& v) {
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) - v(i);
  }
  return out;
}

Matrix add_col(const Matrix& m, const Vector& v) {
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) + v(i);
  }
  return out;
}

Matrix crossprod(const Matrix& du, const Matrix& dg) {
  check_pair(du, dg);
  const Index d = du.rows();
  const Index k = dg.rows();
  const Index n = du.cols();
  Matrix out = Matrix::Zero(d, k);
  for (Index j = 0; j < k; ++j) {
    for (Index l = 0; l < n; ++l) {
      const double g = dg(j, l);
      for (Index i = 0; i < d; ++i) out(i, j) += du(i, l) * g;
    }
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul_dims(a, b);
  const Index m = a.rows();
  const Index p = a.cols();
  const Index n = b.cols();
  Matrix out = Matrix::Zero(m, n);
  for (Index j = 0; j < n; ++j) {
    for (Index l = 0; l < p; ++l) {
      const double s = b(l, j);
      for (Index i = 0; i < m; ++i) out(i, j) += a(i, l) * s;
    }
  }
  return out;
}

Matrix threshold(const Matrix& b, double rho) {
  if (!(rho >= 0.0)) throw InvalidInputError("threshold: rho must be >= 0");
  Matrix out(b.rows(), b.cols());
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < b.rows(); ++i) {
      const double x = b(i, j);
      out(i, j) = std::abs(x) >= rho ? x : 0.0;
    }
  }
  return out;
}

}  // namespace serial

Vector col_mean(const Matrix& m) {
  const Index d = m.rows();
  const Index n = m.cols();
  Vector out(d);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < d; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) acc += m(i, j);
    out(i) = acc / static_cast<double>(n);
  }
  return out;
}

Matrix subtract_col(const Matrix& m, const Vector& v) {
  Matrix out(m.rows(), m.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) - v(i);
  }
  return out;
}

Matrix add_col(const Matrix& m, const Vector& v) {
  Matrix out(m.rows(), m.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) + v(i);
  }
  return out;
}

Matrix crossprod(const Matrix& du, const Matrix& dg) {
  check_pair(du, dg);
  const Index d = du.rows();
  const Index k = dg.rows();
  const Index n = du.cols();
  Matrix out = Matrix::Zero(d, k);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < k; ++j) {
    for (Index l = 0; l < n; ++l) {
      const double g = dg(j, l);
      for (Index i = 0; i < d; ++i) out(i, j) += du(i, l) * g;
    }
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul_dims(a, b);
  const Index m = a.rows();
  const Index p = a.cols();
  const Index n = b.cols();
  Matrix out = Matrix::Zero(m, n);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) {
    for (Index l = 0; l < p; ++l) {
      const double s = b(l, j);
      for (Index i = 0; i < m; ++i) out(i, j) += a(i, l) * s;
    }
  }
  return out;
}

Matrix threshold(const Matrix& b, double rho) {
  if (!(rho >= 0.0)) throw InvalidInputError("threshold: rho must be >= 0");
  Matrix out(b.rows(), b.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < b.rows(); ++i) {
      const double x = b(i, j);
      out(i, j) = std::abs(x) >= rho ? x : 0.0;
    }
  }
  return out;
}

}  // namespace enkf::kernels
