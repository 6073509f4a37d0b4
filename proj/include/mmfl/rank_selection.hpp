#pragma once

#include "mmfl/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfl {

enum class RankStrategy { Sequential, Incremental };

RankStrategy parse_rank_strategy(std::string_view text);
std::string to_string(RankStrategy strategy);

struct RankSearchConfig {
  RankStrategy strategy = RankStrategy::Incremental;
  // Visiting order for the sequential strategy; empty means canonical order.
  std::vector<std::vector<int>> block_order;
  int folds = 5;
  double min_improvement = 0.005;
  int r_max = 0;  // per-block cap; 0 means min(n, p)
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RankTraceEntry {
  int step = 0;
  std::vector<int> block;
  std::string block_name;
  int rank_tried = 0;
  double metric = 0.0;  // -inf when the candidate fit failed
  bool accepted = false;
};

struct RankSelection {
  StructureSpec spec;
  double metric = 0.0;
  double baseline = 0.0;
  std::vector<RankTraceEntry> trace;
};

// Raised when no increment is ever accepted. Carries the trace of rejected trials.
class DegenerateSelection : public std::runtime_error {
 public:
  DegenerateSelection(std::vector<RankTraceEntry> trace, double baseline);
  const std::vector<RankTraceEntry>& trace() const { return trace_; }
  double baseline() const { return baseline_; }

 private:
  std::vector<RankTraceEntry> trace_;
  double baseline_;
};

// Larger is better. May throw; a throwing candidate scores -inf.
using SpecEvaluator = std::function<double(const StructureSpec&)>;

// Generic search over the candidate blocks. `baseline` is the metric at rank 0.
RankSelection select_ranks(int modality_count, const std::vector<std::vector<int>>& candidates,
                           const RankSearchConfig& config, const SpecEvaluator& evaluate,
                           double baseline, int r_max,
                           std::vector<std::string> modality_names = {});

// CV-scored search: mean held-out AUC (classification) or negative RMSE (regression).
RankSelection select_ranks(const MultiModalDataset& data,
                           const std::vector<std::vector<int>>& candidates,
                           const RankSearchConfig& config, const FitConfig& fit);

RankSelection select_ranks_sequential(const MultiModalDataset& data,
                                      const std::vector<std::vector<int>>& candidates,
                                      RankSearchConfig config, const FitConfig& fit);
RankSelection select_ranks_incremental(const MultiModalDataset& data,
                                       const std::vector<std::vector<int>>& candidates,
                                       RankSearchConfig config, const FitConfig& fit);

// CV metric of the intercept-only model: 0.5 AUC, or -RMSE of the training-fold mean.
double rank_zero_metric(const MultiModalDataset& data, int folds, std::uint64_t seed);

struct LoadingProfileRow {
  std::vector<int> block;
  std::string block_name;
  int component = 0;  // 1-based position inside the block
  int column = 0;     // 0-based column of V
  double mean_abs = 0.0;
};

// Mean |V| per column over the feature rows the column loads on.
std::vector<LoadingProfileRow> loading_profile(const Matrix& V, const StructureMask& mask,
                                               const StructureSpec& spec);
std::vector<LoadingProfileRow> loading_profile(const MultiModalDataset& data,
                                               const StructureSpec& spec, const FitConfig& fit);

void write_trace_jsonl(std::ostream& out, const std::vector<RankTraceEntry>& trace);

}  // namespace mmfl
