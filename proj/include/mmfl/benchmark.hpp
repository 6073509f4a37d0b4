#pragma once

#include "mmfl/evaluation.hpp"
#include "mmfl/simulation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmfl {

enum class Scenario {
  Complete,    // complete data, delta = 0.25
  Incomplete,  // delta = 0.5, training rows masked at 0/20/40%
};

struct BenchmarkOptions {
  Scenario scenario = Scenario::Complete;
  int reps = 20;
  std::uint64_t seed = 7;
  int threads = 1;
  int folds = 5;
  bool tune = true;  // grid search once on the first replication's training set
  HyperGrid grid;
  FitConfig fit;     // base configuration; lambda/gamma replaced when tuning
};

// Defaults for the simulation protocol of a scenario (before seeding).
SimulationConfig scenario_simulation(Scenario scenario);
BenchmarkOptions scenario_defaults(Scenario scenario);

struct ReplicationRecord {
  std::string cohort;
  std::string model;
  int rep = 0;
  double auc = 0.0;
  double accuracy = 0.0;
  double fit_seconds = 0.0;
  std::string config_hash;
  std::string error;  // non-empty when the fit failed; metrics are NaN then
};

struct CellSummary {
  std::string cohort;
  std::string model;
  int count = 0;
  Summary auc;
  Summary accuracy;
  Summary fit_seconds;
};

struct EvalReport {
  std::string scenario;
  int reps = 0;
  std::uint64_t seed = 0;
  FitConfig config;               // effective configuration after tuning
  std::vector<GridRow> tuning;    // empty when tuning was skipped
  std::vector<ReplicationRecord> records;
  std::vector<CellSummary> cells;

  const CellSummary* cell(const std::string& cohort, const std::string& model) const;
};

// Cells in order of first appearance; failed replications are excluded from the statistics.
std::vector<CellSummary> aggregate(const std::vector<ReplicationRecord>& records);

EvalReport run_benchmark(const BenchmarkOptions& options);

std::string scenario_name(Scenario scenario);
std::string config_fingerprint(const FitConfig& config);

// Model names used in the report.
inline constexpr const char* kModelMmfl = "MMFL";
inline constexpr const char* kModelAllSamples = "MMFL trained on all samples";
inline constexpr const char* kModelCompleteSamples = "MMFL trained on complete samples";
inline constexpr const char* kModelUpperBound = "MMFL trained on fully observed data";

}  // namespace mmfl
