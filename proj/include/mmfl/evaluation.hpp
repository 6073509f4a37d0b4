#pragma once

#include "mmfl/metrics.hpp"
#include "mmfl/types.hpp"

#include <cstdint>
#include <vector>

namespace mmfl {

// Fold index (0..folds-1) per sample; classes are dealt round-robin after a
// seeded shuffle so each fold gets a proportional share of both.
std::vector<int> stratified_folds(const Vector& labels, int folds, std::uint64_t seed);
std::vector<int> random_folds(int samples, int folds, std::uint64_t seed);

struct CvResult {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> fold_metrics;
};

// Held-out AUC per fold for classification, negative RMSE for regression
// (larger is better in both cases).
CvResult cross_validate(const MultiModalDataset& data, const StructureSpec& spec,
                        const FitConfig& config, int folds, std::uint64_t seed);

struct HyperGrid {
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  std::vector<double> gammas{0.001, 0.01};
};

struct GridRow {
  double lambda = 0.0;
  double gamma = 0.0;
  double mean_metric = 0.0;
  double sd_metric = 0.0;
  std::vector<double> fold_metrics;
  std::string error;  // set when a fold failed numerically
};

struct GridSearchResult {
  FitConfig best;
  std::vector<GridRow> table;
  int fits = 0;
};

// Every (lambda, gamma) pair scored by k-fold CV on the same folds. Ties go to
// the smaller lambda, then the smaller gamma.
GridSearchResult grid_search_cv(const MultiModalDataset& data, const StructureSpec& spec,
                                const HyperGrid& grid, int folds, std::uint64_t seed,
                                const FitConfig& base, int threads = 1);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; NaN for fewer than two values
};

Summary summarize(const std::vector<double>& values);

}  // namespace mmfl
