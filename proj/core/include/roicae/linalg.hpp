#pragma once

#include <vector>

namespace roicae {

/// Dense symmetric matrix helpers for the probe battery. Matrices are
/// row-major n x n in flat vectors; sizes here are at most a few hundred.
namespace linalg {

/// In-place Cholesky A = L·Lᵀ (lower). Returns false if not positive definite.
bool cholesky(std::vector<double>& a, int n);

/// Solve L·Lᵀ x = b given the Cholesky factor from `cholesky`.
std::vector<double> cholesky_solve(const std::vector<double>& l, int n, const std::vector<double>& b);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Eigenvalues sorted descending; eigenvectors returned as rows of `vecs`.
void sym_eig(const std::vector<double>& a, int n, std::vector<double>& vals, std::vector<double>& vecs);

}  // namespace linalg
}  // namespace roicae
