#pragma once

#include "mmfl/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mmfl {

// Independent seed for sub-stream `stream` of a run seeded with `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct SimulationConfig {
  int n_train = 200;
  int n_test = 200;
  std::vector<int> modality_dims{100, 100, 100};
  StructureSpec spec = StructureSpec::full(3, 3);
  double delta = 0.25;
  std::vector<double> snr{1.0, 2.0, 3.0};  // +infinity means noiseless
  std::vector<double> train_missing_rates;  // empty: fully observed training set
  std::uint64_t seed = 0;
  std::vector<std::string> modality_names;

  void validate() const;
};

struct GroundTruth {
  Matrix U;  // all n_train + n_test samples, training rows first
  Matrix V;
  Matrix Z;  // U V^T
  Vector sigma;  // noise standard deviation per modality
  Vector labels;  // 0/1, training rows first
  StructureMask mask;
};

struct SimulatedData {
  MultiModalDataset train;
  MultiModalDataset test;
  GroundTruth truth;
};

// Class-conditioned uniform latent rows, orthogonalized; uniform(-1, 1) loadings
// masked by the structure; Gaussian noise calibrated to the per-modality SNR
// ||Z_k||^2 / (sigma_k^2 n p_k) on the pooled samples before the train/test split.
SimulatedData generate(const SimulationConfig& config);

// Marks each (sample, modality) row unavailable with the modality's rate.
// Samples that lose every modality are redrawn.
MultiModalDataset mask_training_rows(const MultiModalDataset& data, std::span<const double> rates,
                                     std::uint64_t seed);

// One copy of the test set per subset, with only that subset marked available.
std::vector<MultiModalDataset> build_test_cohorts(const MultiModalDataset& test,
                                                  const std::vector<std::vector<int>>& subsets);

}  // namespace mmfl
