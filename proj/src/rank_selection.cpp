#include "mmfl/rank_selection.hpp"

#include "mmfl/evaluation.hpp"
#include "mmfl/parallel.hpp"
#include "mmfl/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mmfl {

RankStrategy parse_rank_strategy(std::string_view text) {
  if (text == "sequential") return RankStrategy::Sequential;
  if (text == "incremental") return RankStrategy::Incremental;
  throw ValidationError("unknown rank strategy '" + std::string(text) +
                        "' (expected sequential or incremental)");
}

std::string to_string(RankStrategy strategy) {
  return strategy == RankStrategy::Sequential ? "sequential" : "incremental";
}

DegenerateSelection::DegenerateSelection(std::vector<RankTraceEntry> trace, double baseline)
    : std::runtime_error("degenerate selection: no rank increment improved the metric"),
      trace_(std::move(trace)),
      baseline_(baseline) {}

namespace {

constexpr double kFailed = -std::numeric_limits<double>::infinity();

StructureSpec zero_spec(int m, const std::vector<std::vector<int>>& candidates,
                        const std::vector<std::string>& names) {
  std::vector<Block> blocks;
  for (const auto& subset : candidates) blocks.push_back({subset, 0});
  return StructureSpec(m, std::move(blocks), names);
}

double safe_evaluate(const SpecEvaluator& evaluate, const StructureSpec& spec) {
  try {
    const double value = evaluate(spec);
    return std::isnan(value) ? kFailed : value;
  } catch (const std::exception&) {
    return kFailed;
  }
}

bool improves(double candidate, double current, double min_improvement) {
  const double gain = candidate - current;
  return gain > 0 && gain >= min_improvement;
}

}  // namespace

RankSelection select_ranks(int modality_count, const std::vector<std::vector<int>>& candidates,
                           const RankSearchConfig& config, const SpecEvaluator& evaluate,
                           double baseline, int r_max, std::vector<std::string> modality_names) {
  if (candidates.empty()) throw ValidationError("rank selection needs at least one candidate block");
  if (r_max < 1) throw ValidationError("r_max must be at least 1");
  if (!(config.min_improvement >= 0)) throw ValidationError("min_improvement must be nonnegative");

  StructureSpec spec = zero_spec(modality_count, candidates, modality_names);
  // Canonical order after validation; ties in the incremental search follow it.
  const auto canonical = spec.subsets();

  RankSelection out;
  out.baseline = baseline;
  double current = baseline;
  int step = 0;
  bool any_accepted = false;

  auto entry = [&](const std::vector<int>& block, int rank, double metric) {
    RankTraceEntry e;
    e.step = step;
    e.block = block;
    e.block_name = spec.describe_subset(block);
    e.rank_tried = rank;
    e.metric = metric;
    return e;
  };

  if (config.strategy == RankStrategy::Sequential) {
    std::vector<std::vector<int>> order = config.block_order.empty() ? canonical : config.block_order;
    for (auto& block : order) std::sort(block.begin(), block.end());
    for (const auto& block : canonical)
      if (std::find(order.begin(), order.end(), block) == order.end())
        throw ValidationError("block order does not cover candidate block " +
                              spec.describe_subset(block));
    for (const auto& block : order) {
      if (std::find(canonical.begin(), canonical.end(), block) == canonical.end())
        throw ValidationError("block order lists " + spec.describe_subset(block) +
                              " which is not a candidate");
      while (spec.rank_of(block) < r_max) {
        ++step;
        const int rank = spec.rank_of(block) + 1;
        const StructureSpec trial = spec.with_rank(block, rank);
        const double metric = safe_evaluate(evaluate, trial);
        RankTraceEntry e = entry(block, rank, metric);
        if (improves(metric, current, config.min_improvement)) {
          e.accepted = true;
          spec = trial;
          current = metric;
          any_accepted = true;
        }
        out.trace.push_back(e);
        if (!e.accepted) break;
      }
    }
  } else {
    while (true) {
      std::vector<std::vector<int>> open;
      for (const auto& block : canonical)
        if (spec.rank_of(block) < r_max) open.push_back(block);
      if (open.empty()) break;
      ++step;
      std::vector<double> metrics(open.size());
      parallel_for(open.size(), config.threads, [&](std::size_t c) {
        metrics[c] = safe_evaluate(evaluate, spec.with_rank(open[c], spec.rank_of(open[c]) + 1));
      });
      std::size_t best = 0;
      for (std::size_t c = 1; c < open.size(); ++c)
        if (metrics[c] > metrics[best]) best = c;
      const bool accept = improves(metrics[best], current, config.min_improvement);
      for (std::size_t c = 0; c < open.size(); ++c) {
        RankTraceEntry e = entry(open[c], spec.rank_of(open[c]) + 1, metrics[c]);
        e.accepted = accept && c == best;
        out.trace.push_back(e);
      }
      if (!accept) break;
      spec = spec.with_rank(open[best], spec.rank_of(open[best]) + 1);
      current = metrics[best];
      any_accepted = true;
    }
  }

  if (!any_accepted) throw DegenerateSelection(out.trace, baseline);
  out.spec = spec;
  out.metric = current;
  return out;
}

double rank_zero_metric(const MultiModalDataset& data, int folds, std::uint64_t seed) {
  if (data.task() == Task::Classification) return 0.5;
  const auto assignment = random_folds(data.samples(), folds, seed);
  const Vector& y = data.labels();
  std::vector<double> scores;
  for (int f = 0; f < folds; ++f) {
    double sum = 0;
    int count = 0;
    for (int i = 0; i < data.samples(); ++i)
      if (assignment[i] != f) sum += y(i), ++count;
    const double mean = sum / count;
    double ss = 0;
    int held = 0;
    for (int i = 0; i < data.samples(); ++i)
      if (assignment[i] == f) ss += (y(i) - mean) * (y(i) - mean), ++held;
    scores.push_back(-std::sqrt(ss / held));
  }
  return summarize(scores).mean;
}

RankSelection select_ranks(const MultiModalDataset& data,
                           const std::vector<std::vector<int>>& candidates,
                           const RankSearchConfig& config, const FitConfig& fit) {
  if (fit.task != data.task()) throw ValidationError("config task does not match the dataset");
  if (config.folds < 2) throw ValidationError("rank selection needs at least 2 folds");
  if (config.folds > data.samples()) throw ValidationError("more folds than samples");
  const int limit = std::min(data.samples(), data.total_features());
  if (config.r_max > limit)
    throw ValidationError("r_max " + std::to_string(config.r_max) + " exceeds min(n, p) = " +
                          std::to_string(limit));
  const int r_max = config.r_max > 0 ? config.r_max : limit;
  const SpecEvaluator evaluate = [&](const StructureSpec& spec) {
    // Rank-0 blocks carry no columns; fitting needs at least one.
    if (spec.total_rank() < 1) return kFailed;
    return cross_validate(data, spec, fit, config.folds, config.seed).mean;
  };
  return select_ranks(data.modality_count(), candidates, config, evaluate,
                      rank_zero_metric(data, config.folds, config.seed), r_max,
                      data.modality_names());
}

RankSelection select_ranks_sequential(const MultiModalDataset& data,
                                      const std::vector<std::vector<int>>& candidates,
                                      RankSearchConfig config, const FitConfig& fit) {
  config.strategy = RankStrategy::Sequential;
  return select_ranks(data, candidates, config, fit);
}

RankSelection select_ranks_incremental(const MultiModalDataset& data,
                                       const std::vector<std::vector<int>>& candidates,
                                       RankSearchConfig config, const FitConfig& fit) {
  config.strategy = RankStrategy::Incremental;
  return select_ranks(data, candidates, config, fit);
}

std::vector<LoadingProfileRow> loading_profile(const Matrix& V, const StructureMask& mask,
                                               const StructureSpec& spec) {
  if (V.rows() != mask.rows() || V.cols() != mask.cols())
    throw ValidationError("loading matrix shape does not match the structure mask");
  std::vector<LoadingProfileRow> rows;
  for (const auto& cols : mask.block_columns()) {
    const auto& block = spec.blocks()[cols.block];
    for (int c = 0; c < cols.count; ++c) {
      const int j = cols.offset + c;
      double total = 0;
      int count = 0;
      for (Eigen::Index i = 0; i < V.rows(); ++i)
        if (mask.matrix()(i, j) != 0) total += std::abs(V(i, j)), ++count;
      LoadingProfileRow row;
      row.block = block.subset;
      row.block_name = spec.describe_subset(block.subset);
      row.component = c + 1;
      row.column = j;
      row.mean_abs = count ? total / count : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<LoadingProfileRow> loading_profile(const MultiModalDataset& data,
                                               const StructureSpec& spec, const FitConfig& fit) {
  const FissionModel model = mmfl::fit(data, spec, fit);
  return loading_profile(model.V, model.mask, model.spec);
}

void write_trace_jsonl(std::ostream& out, const std::vector<RankTraceEntry>& trace) {
  for (const auto& e : trace) {
    nlohmann::json line;
    line["step"] = e.step;
    line["block"] = e.block_name;
    line["rank_tried"] = e.rank_tried;
    if (std::isfinite(e.metric))
      line["metric"] = e.metric;
    else
      line["metric"] = nullptr;
    line["accepted"] = e.accepted;
    out << line.dump() << '\n';
  }
}

}  // namespace mmfl
