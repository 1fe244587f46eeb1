#pragma once

#include "enkf/linalg.hpp"

// Data-parallel kernels for the ensemble-shaped work: column means, deviation
// scatters, matrix products, elementwise thresholding. The default entry
// points run under OpenMP; enkf::kernels::serial holds the plain-loop
// reference implementations used by the tests and the benchmark.
//
// Determinism contract: every output element is owned by exactly one thread
// and accumulated in the same order as the serial version, so parallel and
// serial results are bitwise identical for any thread count. Nested inside an
// outer omp parallel region the kernels simply run serial.

namespace enkf::kernels {

// Mean of the columns of m (d x N -> d).
Vector col_mean(const Matrix& m);

// m with v subtracted from every column.
Matrix subtract_col(const Matrix& m, const Vector& v);

// m with v added to every column.
Matrix add_col(const Matrix& m, const Vector& v);

// du * dg^T for deviation matrices du (d x N), dg (k x N).
Matrix crossprod(const Matrix& du, const Matrix& dg);

// Plain product a (m x p) * b (p x n).
Matrix matmul(const Matrix& a, const Matrix& b);

// Entry kept iff |entry| >= rho (ties kept).
Matrix threshold(const Matrix& b, double rho);

namespace serial {

Vector col_mean(const Matrix& m);
Matrix subtract_col(const Matrix& m, const Vector& v);
Matrix add_col(const Matrix& m, const Vector& v);
Matrix crossprod(const Matrix& du, const Matrix& dg);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix threshold(const Matrix& b, double rho);

}  // namespace serial

}  // namespace enkf::kernels
