#pragma once

#include <optional>

#include "kmpc/matrix.hpp"

namespace kmpc::linalg {

// Lower-triangular Cholesky factor of a symmetric matrix, or nullopt when a
// pivot falls below rel_tol * max diagonal (matrix not numerically PD).
std::optional<Matrix> cholesky(const Matrix& spd, double rel_tol = 1e-12);

// Solves L L^T X = B for every column of B.
Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs);

// Gaussian elimination with full (row and column) pivoting. Throws
// SingularityError when the largest remaining pivot is below
// rel_tol * max|A|.
Matrix pivoted_solve(const Matrix& a, const Matrix& rhs, double rel_tol = 1e-12);

// Solves the symmetric system A X = B: Cholesky first, pivoted elimination
// when the factorization breaks down.
Matrix solve_symmetric(const Matrix& a, const Matrix& rhs);

// Largest eigenvalue of a symmetric PSD matrix estimated by power iteration
// from a fixed start vector.
double power_iteration(const Matrix& sym, int iterations = 100);

bool is_symmetric(const Matrix& a, double tol = 1e-10);
// Symmetric and the smallest eigenvalue >= -tol (Jacobi sweep).
bool is_symmetric_psd(const Matrix& a, double tol = 1e-10);

// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
Vector symmetric_eigenvalues(const Matrix& sym);

}  // namespace kmpc::linalg
