#pragma once

// Shared plumbing for the solvers; not part of the public interface.

#include "mmfl/solver.hpp"

#include <functional>

namespace mmfl::detail {

struct Prepared {
  StructureMask mask;
  FeatureScaling scaling;
  Matrix X;  // scaled; unobserved rows are zero
  Vector y;  // -1/+1 labels or centered response
  double response_offset = 0.0;
};

Prepared prepare(const MultiModalDataset& data, const StructureSpec& spec, const FitConfig& config);

void notify(const StepObserver& observer, std::string_view step, const AlmState& state,
            const Matrix& X, const Vector& y, const Availability* availability);

// Pre-orthogonalization latent update given the current V, beta, b, z, q.
using LatentUpdate = std::function<Matrix(const AlmState&)>;
using ObjectiveFn = std::function<double(const AlmState&)>;

struct LoopResult {
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
};

// Algorithm-1 sweep: V, mask, beta, b, z, U, orthogonalize, dual; repeated until
// the objective changes by at most epsilon between sweeps.
LoopResult run_classification_loop(AlmState& state, const Matrix& X, const Vector& y,
                                   const StructureMask& mask, const FitConfig& config,
                                   int max_iter, const LatentUpdate& latent,
                                   const ObjectiveFn& objective, const StepObserver& observer,
                                   const Availability* availability);

// Regression sweep: V, mask, beta, U, orthogonalize.
LoopResult run_regression_loop(AlmState& state, const Matrix& X, const Vector& y,
                               const StructureMask& mask, const FitConfig& config, int max_iter,
                               const LatentUpdate& latent, const ObjectiveFn& objective,
                               const StepObserver& observer, const Availability* availability);

FissionModel assemble_model(const MultiModalDataset& data, const StructureSpec& spec,
                            const FitConfig& config, Prepared prepared, AlmState state,
                            FitSummary summary);

}  // namespace mmfl::detail
