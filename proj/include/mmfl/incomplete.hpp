#pragma once

#include "mmfl/solver.hpp"

#include <span>

namespace mmfl {

// Primal objective with the reconstruction loss restricted to observed rows.
// Classification: sum max(y z, 0)^2 + lambda sum_k ||P_Ok(X_k - U V_k^T)||^2 + gamma ||beta||^2.
// Regression replaces the hinge term by ||y - U beta||^2.
double masked_objective(const AlmState& state, const Matrix& X, const StructureMask& mask,
                        const Availability& availability, const Vector& y, const FitConfig& config);

// Per-sample latent row minimizing the masked augmented Lagrangian:
//   (lambda sum_k x_k V_k + (mu/2) w_i beta^T)(lambda sum_k V_k^T V_k + (mu/2) beta beta^T)^{-1}
// with w_i = y_i - b - z_i - q_i/mu; x_parts[j] pairs with V_blocks[observed[j]].
RowVector update_U_row_incomplete(std::span<const RowVector> x_parts,
                                  const std::vector<int>& observed,
                                  std::span<const Matrix> V_blocks, double y_i, double b,
                                  double z_i, double q_i, const Vector& beta, double mu,
                                  double lambda);

struct PseudoReconstruction {
  std::vector<Matrix> filled;  // original units; unobserved rows replaced by U_i V_k^T
  Availability provenance;     // true where a row is pseudo-reconstructed
};

// Fills the unobserved rows of the model's training data.
PseudoReconstruction pseudo_reconstruct(const FissionModel& model, const MultiModalDataset& data);

// Training with missing modalities: repeated parameter estimation with per-row
// latent updates, followed by pseudo-reconstruction of the missing rows.
FissionModel fit_incomplete(const MultiModalDataset& data, const StructureSpec& spec,
                            const FitConfig& config, const StepObserver& observer = {});

}  // namespace mmfl
