#pragma once

#include "bfront/types.hpp"

namespace bfront {

/// Real Schur form M = U T U^T with the diagonal blocks sorted by ascending
/// real part of their eigenvalues.
struct OrderedSchur {
  Matrix T;
  Matrix U;
  Eigen::VectorXd block_real;  // real part per column (repeated for 2x2 blocks)
};

OrderedSchur ordered_schur(const Matrix& M);

/// Orthonormal basis of the invariant subspace belonging to eigenvalues with
/// negative real part. Throws MarginalSpectrum if an eigenvalue lies within
/// `margin` of the imaginary axis.
Matrix stable_subspace(const Matrix& M, double margin = 1e-10);

/// Orthonormal basis of the invariant subspace of the `count` eigenvalues
/// with the smallest real parts. A complex pair is never split: the count is
/// rounded up to include its partner.
Matrix leading_subspace(const Matrix& M, int count);

/// Oblique projector onto span(basis) along the complementary invariant
/// subspace of M; basis must span an M-invariant subspace.
Matrix spectral_projector(const Matrix& M, const Matrix& basis);

Matrix matrix_exp(const Matrix& M);

/// Rotates `basis` within its span to best match `reference` (orthogonal
/// Procrustes), removing the sign/rotation freedom of an invariant basis.
Matrix align_basis(const Matrix& basis, const Matrix& reference);

}  // namespace bfront
