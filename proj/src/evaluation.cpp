#include "mmfl/evaluation.hpp"

#include "mmfl/parallel.hpp"
#include "mmfl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mmfl {

std::vector<int> stratified_folds(const Vector& labels, int folds, std::uint64_t seed) {
  const auto n = static_cast<int>(labels.size());
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (folds > n) throw ValidationError("more folds than samples");
  std::vector<int> positives, negatives;
  for (int i = 0; i < n; ++i) (labels(i) > 0 ? positives : negatives).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);
  std::vector<int> assignment(n);
  int slot = 0;
  for (int i : positives) assignment[i] = slot++ % folds;
  for (int i : negatives) assignment[i] = slot++ % folds;
  return assignment;
}

std::vector<int> random_folds(int samples, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (folds > samples) throw ValidationError("more folds than samples");
  std::vector<int> order(samples);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> assignment(samples);
  for (int pos = 0; pos < samples; ++pos) assignment[order[pos]] = pos % folds;
  return assignment;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) {
    s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

namespace {

std::vector<int> fold_assignment(const MultiModalDataset& data, int folds, std::uint64_t seed) {
  return data.task() == Task::Classification ? stratified_folds(data.labels(), folds, seed)
                                             : random_folds(data.samples(), folds, seed);
}

double fold_metric(const MultiModalDataset& data, const StructureSpec& spec, const FitConfig& config,
                   const std::vector<int>& assignment, int fold) {
  std::vector<int> train, held_out;
  for (int i = 0; i < data.samples(); ++i) (assignment[i] == fold ? held_out : train).push_back(i);
  const auto training = data.subset_rows(train);
  const auto validation = data.subset_rows(held_out);
  if (config.task == Task::Classification) {
    for (const auto* part : {&training, &validation}) {
      const Vector& y = part->labels();
      if (y.maxCoeff() == y.minCoeff())
        throw ValidationError("fold " + std::to_string(fold + 1) +
                              " is missing a class; too few samples for stratified CV");
    }
  }
  const FissionModel model = fit(training, spec, config);
  const Vector scores = predict(model, validation);
  if (config.task == Task::Classification) return roc_auc(scores, validation.labels());
  return -rmse(scores, validation.labels());
}

CvResult run_folds(const MultiModalDataset& data, const StructureSpec& spec, const FitConfig& config,
                   const std::vector<int>& assignment, int folds) {
  CvResult out;
  for (int f = 0; f < folds; ++f) out.fold_metrics.push_back(fold_metric(data, spec, config, assignment, f));
  const auto s = summarize(out.fold_metrics);
  out.mean = s.mean;
  out.sd = s.sd;
  return out;
}

}  // namespace

CvResult cross_validate(const MultiModalDataset& data, const StructureSpec& spec,
                        const FitConfig& config, int folds, std::uint64_t seed) {
  if (config.task != data.task()) throw ValidationError("config task does not match the dataset");
  const auto assignment = fold_assignment(data, folds, seed);
  return run_folds(data, spec, config, assignment, folds);
}

GridSearchResult grid_search_cv(const MultiModalDataset& data, const StructureSpec& spec,
                                const HyperGrid& grid, int folds, std::uint64_t seed,
                                const FitConfig& base, int threads) {
  if (grid.lambdas.empty() || grid.gammas.empty()) throw ValidationError("hyperparameter grid is empty");
  if (base.task != data.task()) throw ValidationError("config task does not match the dataset");
  auto lambdas = grid.lambdas;
  auto gammas = grid.gammas;
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(gammas.begin(), gammas.end());
  const auto assignment = fold_assignment(data, folds, seed);

  GridSearchResult result;
  for (double lambda : lambdas)
    for (double gamma : gammas) result.table.push_back({lambda, gamma, 0.0, 0.0, {}, {}});

  parallel_for(result.table.size(), threads, [&](std::size_t idx) {
    GridRow& row = result.table[idx];
    FitConfig config = base;
    config.lambda = row.lambda;
    config.gamma = row.gamma;
    config.validate();
    try {
      const CvResult cv = run_folds(data, spec, config, assignment, folds);
      row.mean_metric = cv.mean;
      row.sd_metric = cv.sd;
      row.fold_metrics = cv.fold_metrics;
    } catch (const NumericalError& e) {
      row.mean_metric = -std::numeric_limits<double>::infinity();
      row.error = e.what();
    }
  });
  result.fits = static_cast<int>(result.table.size()) * folds;

  const GridRow* best = nullptr;
  for (const auto& row : result.table)
    if (!best || row.mean_metric > best->mean_metric) best = &row;
  if (!std::isfinite(best->mean_metric))
    throw NumericalError("every grid point failed: " + best->error);
  result.best = base;
  result.best.lambda = best->lambda;
  result.best.gamma = best->gamma;
  return result;
}

}  // namespace mmfl
