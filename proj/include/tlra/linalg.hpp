#pragma once

#include "tlra/common.hpp"

namespace tlra {

/// Singular values below sigma_max * max(rows, cols) * machine epsilon are treated as zero.
double rank_cutoff(const Vector& singular_values, Index rows, Index cols);

Matrix pinv(const Matrix& m);
Index numerical_rank(const Matrix& m);

/// Orthonormal basis of the column space (numerical rank columns).
Matrix orthonormal_basis(const Matrix& m);

/// Minimum-norm solution of min_X ||A X - B||_F.
Matrix lstsq(const Matrix& a, const Matrix& b);

/// Best rank-k approximation in Frobenius norm.
Matrix truncated_svd(const Matrix& m, Index k);

/// Top-k left singular vectors (fewer if the matrix is smaller).
Matrix top_left_singular(const Matrix& m, Index k);

}  // namespace tlra
