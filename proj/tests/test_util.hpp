#pragma once

#include <cstdint>

#include "enkf/linalg.hpp"
#include "enkf/models.hpp"

namespace enkf::test {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  return standard_normal(rows, cols, seed);
}

// G G^T + eps I for a well-behaved random PSD instance.
inline CovarianceMatrix random_psd(Index d, std::uint64_t seed, double ridge = 0.0) {
  const Matrix g = standard_normal(d, d, seed);
  Matrix s = g * g.transpose() / static_cast<double>(d);
  if (ridge > 0.0) s += ridge * Matrix::Identity(d, d);
  return CovarianceMatrix(0.5 * (s + s.transpose()));
}

inline Matrix random_orthogonal(Index n, std::uint64_t seed) {
  const Matrix g = standard_normal(n, n, seed);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, n);
}

inline double rel_err(double value, double reference) {
  return std::abs(value - reference) / std::max(1.0, std::abs(reference));
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace enkf::test
