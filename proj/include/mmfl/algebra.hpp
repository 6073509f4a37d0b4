#pragma once

#include "mmfl/types.hpp"

#include <span>
#include <vector>

namespace mmfl {

// Element-wise product V o S; entries outside the mask become exact zeros.
Matrix apply_mask(const Matrix& V, const Matrix& S);
Matrix apply_mask(const Matrix& V, const StructureMask& S);

// Nearest column-orthonormal matrix L R^T from the thin SVD U = L Sigma R^T.
// Throws NumericalError when U is rank deficient.
Matrix orthogonalize(const Matrix& U);

// Top-r left singular vectors of X with the deterministic sign convention.
Matrix leading_left_singular_vectors(const Matrix& X, int r);

// Solves Y A = B for Y (A symmetric r x r, B k x r) by Cholesky. A near-singular
// A gets a single ridge bump before giving up with NumericalError.
Matrix solve_right_spd(const Matrix& A, const Matrix& B);

struct LatentProjection {
  RowVector u;
  std::vector<int> used_modalities;
};

// u = (lambda x V)(lambda V^T V + beta beta^T)^{-1}. Columns of V that are
// entirely zero are left out of the system and get u = 0.
LatentProjection project_complete(const RowVector& x, const Matrix& V, const Vector& beta,
                                  double lambda, int modality_count = 1);

// Same projection restricted to the observed modalities. x_parts[j] is the row
// of modality available[j]; V_blocks holds the loading slice of every modality.
LatentProjection project_incomplete(std::span<const RowVector> x_parts,
                                    const std::vector<int>& available,
                                    std::span<const Matrix> V_blocks, const Vector& beta,
                                    double lambda);

// Batched projection of every row of X onto loadings V.
Matrix project_rows(const Matrix& X, const Matrix& V, const Vector& beta, double lambda);

// Rows of V belonging to each modality.
std::vector<Matrix> split_loadings(const Matrix& V, const StructureMask& mask);

}  // namespace mmfl
