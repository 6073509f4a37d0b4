#pragma once

#include "mmfl/solver.hpp"

#include <span>

namespace mmfl {

// ||y - U beta||^2 + lambda ||X - U V^T||_F^2 + gamma ||beta||^2
double regression_objective(const Matrix& U, const Matrix& V, const Vector& beta, const Matrix& X,
                            const Vector& y, double lambda, double gamma);

// (1 + gamma)^{-1} U^T y, the ridge solution when U^T U = I.
Vector update_beta_regression(const Matrix& U, const Vector& y, double gamma);

// (lambda X V + y beta^T)(lambda V^T V + beta beta^T)^{-1}
Matrix update_U_regression(const Matrix& X, const Matrix& V, const Vector& beta, const Vector& y,
                           double lambda);

// One latent row from the observed modalities only:
//   (lambda sum_k x_k V_k + y_i beta^T)(lambda sum_k V_k^T V_k + beta beta^T)^{-1}
// x_parts[j] pairs with V_blocks[observed[j]].
RowVector update_U_regression_incomplete(std::span<const RowVector> x_parts,
                                         const std::vector<int>& observed,
                                         std::span<const Matrix> V_blocks, double y_i,
                                         const Vector& beta, double lambda);

// Complete-modality regression solver. The response is centered internally and
// the mean is restored at prediction.
FissionModel fit_regression(const MultiModalDataset& data, const StructureSpec& spec,
                            const FitConfig& config, const StepObserver& observer = {});

}  // namespace mmfl
