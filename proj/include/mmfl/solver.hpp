#pragma once

#include "mmfl/types.hpp"

#include <functional>
#include <string_view>

namespace mmfl {

// Working state of the alternating minimization. q and z stay empty for regression.
struct AlmState {
  Matrix U;
  Matrix V;
  Vector beta;
  double b = 0.0;
  Vector z;
  Vector q;
  int iteration = 0;
  std::vector<double> lagrangian_history;
};

// Handed to observers after every coordinate step. X is the scaled training
// matrix the solver works on (pseudo-reconstructed rows included) and y the
// internal response (-1/+1 labels, or the centered response).
struct StepContext {
  std::string_view step;
  const AlmState& state;
  const Matrix& X;
  const Vector& y;
  const Availability* availability;  // null for complete-modality fits
};

using StepObserver = std::function<void(const StepContext&)>;

// Picks the complete or incomplete solver from the data's availability and the task.
FissionModel fit(const MultiModalDataset& data, const StructureSpec& spec, const FitConfig& config,
                 const StepObserver& observer = {});

// Scores u* beta + b per sample, projecting each sample through the modalities it has.
Vector predict(const FissionModel& model, const MultiModalDataset& data);

// Latent rows for each sample (the projection predict() uses).
Matrix project(const FissionModel& model, const MultiModalDataset& data);

// Class labels in the original vocabulary, thresholded at the model's cutoff.
Vector predict_labels(const FissionModel& model, const Vector& scores);

}  // namespace mmfl
