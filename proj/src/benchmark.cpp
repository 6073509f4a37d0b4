#include "mmfl/benchmark.hpp"

#include "mmfl/parallel.hpp"
#include "mmfl/solver.hpp"

#include <chrono>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace mmfl {

std::string scenario_name(Scenario scenario) {
  return scenario == Scenario::Complete ? "table2-complete" : "table3-incomplete";
}

SimulationConfig scenario_simulation(Scenario scenario) {
  SimulationConfig sim;
  sim.modality_names = {"X1", "X2", "X3"};
  sim.spec = StructureSpec::full(3, 3, sim.modality_names);
  if (scenario == Scenario::Complete) {
    sim.delta = 0.25;
  } else {
    sim.delta = 0.5;
    sim.train_missing_rates = {0.0, 0.2, 0.4};
  }
  return sim;
}

BenchmarkOptions scenario_defaults(Scenario scenario) {
  BenchmarkOptions options;
  options.scenario = scenario;
  options.fit.task = Task::Classification;
  // The generator's features are used on their native scale.
  options.fit.scaling = Scaling::None;
  return options;
}

std::string config_fingerprint(const FitConfig& config) {
  std::ostringstream text;
  text.precision(17);
  text << config.lambda << ';' << config.gamma << ';' << config.mu << ';' << config.epsilon << ';'
       << config.max_iter << ';' << config.outer_max_iter << ';' << config.inner_max_iter << ';'
       << to_string(config.task) << ';' << to_string(config.scaling);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text.str()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

const CellSummary* EvalReport::cell(const std::string& cohort, const std::string& model) const {
  for (const auto& c : cells)
    if (c.cohort == cohort && c.model == model) return &c;
  return nullptr;
}

std::vector<CellSummary> aggregate(const std::vector<ReplicationRecord>& records) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const ReplicationRecord*>> groups;
  for (const auto& r : records) {
    auto key = std::make_pair(r.cohort, r.model);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<CellSummary> cells;
  for (const auto& key : order) {
    std::vector<double> auc, acc, secs;
    for (const auto* r : groups[key]) {
      if (!r->error.empty()) continue;
      auc.push_back(r->auc);
      acc.push_back(r->accuracy);
      secs.push_back(r->fit_seconds);
    }
    CellSummary cell;
    cell.cohort = key.first;
    cell.model = key.second;
    cell.count = static_cast<int>(auc.size());
    cell.auc = summarize(auc);
    cell.accuracy = summarize(acc);
    cell.fit_seconds = summarize(secs);
    cells.push_back(std::move(cell));
  }
  return cells;
}

namespace {

std::string cohort_name(const StructureSpec& spec, const std::vector<int>& subset) {
  return spec.describe_subset(subset);
}

ReplicationRecord evaluate_cell(const std::string& cohort, const std::string& model_name, int rep,
                                const MultiModalDataset& train, const StructureSpec& spec,
                                const FitConfig& config, const MultiModalDataset& test) {
  ReplicationRecord record;
  record.cohort = cohort;
  record.model = model_name;
  record.rep = rep;
  record.config_hash = config_fingerprint(config);
  try {
    const auto start = std::chrono::steady_clock::now();
    const FissionModel model = fit(train, spec, config);
    record.fit_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Vector scores = predict(model, test);
    record.auc = roc_auc(scores, test.labels());
    record.accuracy = accuracy_at(scores, test.labels(), model.threshold);
  } catch (const std::exception& e) {
    record.error = e.what();
    record.auc = record.accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return record;
}

// Evaluates a model fitted once on several test cohorts.
std::vector<ReplicationRecord> evaluate_shared(
    const std::string& model_name, int rep, const MultiModalDataset& train,
    const StructureSpec& spec, const FitConfig& config,
    const std::vector<std::pair<std::string, MultiModalDataset>>& cohorts) {
  std::vector<ReplicationRecord> records;
  FissionModel model;
  double seconds = 0.0;
  std::string error;
  try {
    const auto start = std::chrono::steady_clock::now();
    model = fit(train, spec, config);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } catch (const std::exception& e) {
    error = e.what();
  }
  for (const auto& [cohort, test] : cohorts) {
    ReplicationRecord record;
    record.cohort = cohort;
    record.model = model_name;
    record.rep = rep;
    record.config_hash = config_fingerprint(config);
    record.fit_seconds = seconds;
    record.error = error;
    record.auc = record.accuracy = std::numeric_limits<double>::quiet_NaN();
    if (error.empty()) {
      try {
        const Vector scores = predict(model, test);
        record.auc = roc_auc(scores, test.labels());
        record.accuracy = accuracy_at(scores, test.labels(), model.threshold);
      } catch (const std::exception& e) {
        record.error = e.what();
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<ReplicationRecord> run_replication(const BenchmarkOptions& options,
                                               const SimulationConfig& base_sim,
                                               const FitConfig& config, int rep) {
  SimulationConfig sim = base_sim;
  sim.seed = derive_seed(options.seed, static_cast<std::uint64_t>(rep));
  const SimulatedData data = generate(sim);
  const StructureSpec& spec = sim.spec;
  const int m = data.train.modality_count();
  std::vector<int> all(m);
  for (int k = 0; k < m; ++k) all[k] = k;
  const std::string full_cohort = cohort_name(spec, all);

  if (options.scenario == Scenario::Complete)
    return {evaluate_cell(full_cohort, kModelMmfl, rep, data.train, spec, config, data.test)};

  std::vector<ReplicationRecord> records;
  std::vector<std::vector<int>> pairs;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) pairs.push_back({a, b});

  std::vector<std::vector<int>> subsets{all};
  subsets.insert(subsets.end(), pairs.begin(), pairs.end());
  const auto cohorts = build_test_cohorts(data.test, subsets);
  std::vector<std::pair<std::string, MultiModalDataset>> named;
  for (std::size_t c = 0; c < subsets.size(); ++c)
    named.emplace_back(cohort_name(spec, subsets[c]), cohorts[c]);

  auto shared = evaluate_shared(kModelAllSamples, rep, data.train, spec, config, named);
  records.insert(records.end(), shared.begin(), shared.end());

  const auto complete_rows = data.train.complete_rows();
  records.push_back(evaluate_cell(full_cohort, kModelCompleteSamples, rep,
                                  data.train.subset_rows(complete_rows), spec, config, data.test));

  const auto observed = data.train.with_availability(
      Availability::Constant(data.train.samples(), m, true));
  records.push_back(
      evaluate_cell(full_cohort, kModelUpperBound, rep, observed, spec, config, data.test));

  for (const auto& pair : pairs) {
    const std::string cohort = cohort_name(spec, pair);
    records.push_back(evaluate_cell(cohort, "MMFL trained on " + cohort, rep,
                                    data.train.select_modalities(pair), spec.restricted_to(pair),
                                    config, data.test.select_modalities(pair)));
  }
  return records;
}

}  // namespace

EvalReport run_benchmark(const BenchmarkOptions& options) {
  if (options.reps < 1) throw ValidationError("benchmark needs at least one replication");
  options.fit.validate();
  const SimulationConfig sim = scenario_simulation(options.scenario);

  EvalReport report;
  report.scenario = scenario_name(options.scenario);
  report.reps = options.reps;
  report.seed = options.seed;
  report.config = options.fit;

  if (options.tune) {
    SimulationConfig first = sim;
    first.seed = derive_seed(options.seed, 0);
    const SimulatedData data = generate(first);
    const auto search = grid_search_cv(data.train, sim.spec, options.grid, options.folds,
                                       derive_seed(options.seed, 1u << 20), options.fit,
                                       options.threads);
    report.config = search.best;
    report.tuning = search.table;
  }

  std::vector<std::vector<ReplicationRecord>> per_rep(options.reps);
  parallel_for(per_rep.size(), options.threads, [&](std::size_t rep) {
    per_rep[rep] = run_replication(options, sim, report.config, static_cast<int>(rep));
  });
  for (auto& records : per_rep)
    report.records.insert(report.records.end(), records.begin(), records.end());
  report.cells = aggregate(report.records);
  return report;
}

}  // namespace mmfl
