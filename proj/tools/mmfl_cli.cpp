// Command-line front end for fitting, prediction, simulation and benchmarks.

#include "mmfl/benchmark.hpp"
#include "mmfl/io.hpp"
#include "mmfl/metrics.hpp"
#include "mmfl/rank_selection.hpp"
#include "mmfl/simulation.hpp"
#include "mmfl/solver.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using mmfl::io::Json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir = ".";
  std::string config_path;

  Json config() const {
    if (config_path.empty()) return Json::object();
    try {
      Json j = Json::parse(mmfl::io::read_file(config_path));
      if (!j.is_object()) throw mmfl::ValidationError(config_path + ": config must be a JSON object");
      return j;
    } catch (const Json::parse_error& e) {
      throw mmfl::ValidationError(config_path + ": " + e.what());
    }
  }
};

struct FitFlags {
  std::optional<double> lambda, gamma, mu, epsilon;
  std::optional<int> max_iter, outer_max_iter, inner_max_iter;
  std::string task;
  std::string scaling;

  void add(CLI::App* cmd) {
    cmd->add_option("--lambda", lambda, "reconstruction weight");
    cmd->add_option("--gamma", gamma, "coefficient ridge weight");
    cmd->add_option("--mu", mu, "augmented Lagrangian penalty");
    cmd->add_option("--epsilon", epsilon, "stopping tolerance on the objective change");
    cmd->add_option("--max-iter", max_iter);
    cmd->add_option("--outer-max-iter", outer_max_iter);
    cmd->add_option("--inner-max-iter", inner_max_iter);
    cmd->add_option("--task", task, "classification or regression");
    cmd->add_option("--scaling", scaling, "none, center or standardize");
  }

  // defaults < config file < flags
  mmfl::FitConfig resolve(const Globals& g, mmfl::FitConfig base = {}) const {
    mmfl::FitConfig c = mmfl::io::fit_config_from_json(g.config(), base);
    if (lambda) c.lambda = *lambda;
    if (gamma) c.gamma = *gamma;
    if (mu) c.mu = *mu;
    if (epsilon) c.epsilon = *epsilon;
    if (max_iter) c.max_iter = *max_iter;
    if (outer_max_iter) c.outer_max_iter = *outer_max_iter;
    if (inner_max_iter) c.inner_max_iter = *inner_max_iter;
    if (!task.empty()) c.task = mmfl::parse_task(task);
    if (!scaling.empty()) c.scaling = mmfl::parse_scaling(scaling);
    if (g.seed) c.seed = *g.seed;
    c.validate();
    return c;
  }
};

mmfl::StructureSpec read_spec(const std::string& path) {
  try {
    return mmfl::io::structure_from_json(Json::parse(mmfl::io::read_file(path)));
  } catch (const Json::parse_error& e) {
    throw mmfl::ValidationError(path + ": " + e.what());
  }
}

fs::path output_path(const Globals& g, const std::string& explicit_path, const std::string& name) {
  return explicit_path.empty() ? fs::path(g.out_dir) / name : fs::path(explicit_path);
}

void write(const fs::path& path, const std::string& content) {
  mmfl::io::write_file_atomic(path, content);
  std::cout << "wrote " << path.string() << '\n';
}

int cmd_simulate(const Globals& g) {
  Json config = g.config();
  if (g.seed) config["seed"] = *g.seed;
  const mmfl::SimulationConfig sim = mmfl::io::simulation_config_from_json(config);
  const mmfl::SimulatedData data = mmfl::generate(sim);
  const fs::path root(g.out_dir);
  mmfl::io::save_dataset(root / "train", data.train);
  if (sim.n_test > 0) mmfl::io::save_dataset(root / "test", data.test);
  write(root / "spec.json", mmfl::io::structure_to_json(sim.spec).dump(2) + "\n");
  write(root / "ground_truth.json", mmfl::io::ground_truth_to_json(data.truth).dump() + "\n");

  Json manifest;
  manifest["simulation"] = mmfl::io::simulation_config_to_json(sim);
  Json files = Json::array();
  for (const char* split : {"train", "test"}) {
    if (std::string(split) == "test" && sim.n_test == 0) continue;
    for (const auto& name : sim.modality_names)
      files.push_back(std::string(split) + "/" + name + ".csv");
    files.push_back(std::string(split) + "/labels.csv");
    files.push_back(std::string(split) + "/availability.csv");
  }
  files.push_back("spec.json");
  files.push_back("ground_truth.json");
  manifest["files"] = files;
  write(root / "manifest.json", manifest.dump(2) + "\n");
  std::cout << manifest.dump(2) << '\n';
  return 0;
}

struct FitArgs {
  std::string data, spec, model;
  bool no_u = false;
  FitFlags flags;
};

int cmd_fit(const Globals& g, const FitArgs& a) {
  const mmfl::StructureSpec spec = read_spec(a.spec);
  const mmfl::FitConfig config = a.flags.resolve(g);
  const auto data = mmfl::io::load_dataset(a.data, spec.modality_names(), config.task);
  const mmfl::FissionModel model = mmfl::fit(data, spec, config);
  const fs::path path = output_path(g, a.model, "model.json");
  mmfl::io::save_model(path, model, !a.no_u);

  const auto& s = model.summary;
  std::cout << "Algorithm " << s.algorithm << " (" << (s.algorithm == 2 ? "incomplete" : "complete")
            << " modalities)\n";
  if (s.algorithm == 2) std::cout << "outer iterations: " << s.outer_iterations << '\n';
  std::cout << "iterations: " << s.iterations << '\n'
            << "final objective: " << mmfl::io::format_number(s.objective) << '\n'
            << "|change|: " << mmfl::io::format_number(s.last_change)
            << " (epsilon " << mmfl::io::format_number(config.epsilon) << ")\n"
            << "converged: " << (s.converged ? "yes" : s.stalled ? "stalled" : "no") << '\n';
  if (config.task == mmfl::Task::Classification)
    std::cout << "threshold: " << mmfl::io::format_number(model.threshold) << '\n';
  if (s.stalled)
    std::cerr << "note: an outer pass raised the masked objective; kept the previous iterate\n";
  else if (!s.converged)
    std::cerr << "warning: stopped at the iteration limit without meeting the tolerance\n";
  return 0;
}

struct PredictArgs {
  std::string model, data, out;
};

int cmd_predict(const Globals& g, const PredictArgs& a) {
  const mmfl::FissionModel model = mmfl::io::load_model(a.model);
  const auto data = mmfl::io::load_dataset(a.data, model.modality_names, model.config.task,
                                           model.label_coding, false);
  const mmfl::Vector scores = mmfl::predict(model, data);
  const bool classify = model.config.task == mmfl::Task::Classification;
  const mmfl::Vector labels = classify ? mmfl::predict_labels(model, scores) : mmfl::Vector();

  std::ostringstream csv;
  csv << "sample_id,score" << (classify ? ",label" : "") << ",partial\n";
  int partial = 0;
  for (int i = 0; i < data.samples(); ++i) {
    const bool is_partial = !data.availability().row(i).all();
    partial += is_partial;
    csv << data.sample_ids()[i] << ',' << mmfl::io::format_number(scores(i));
    if (classify) csv << ',' << mmfl::io::format_number(labels(i));
    csv << ',' << (is_partial ? 1 : 0) << '\n';
  }
  write(output_path(g, a.out, "predictions.csv"), csv.str());
  std::cout << data.samples() << " samples scored, " << partial << " partial\n";
  if (data.has_labels() && classify) {
    std::cout << "auc: " << mmfl::io::format_number(mmfl::roc_auc(scores, data.labels())) << '\n'
              << "accuracy: "
              << mmfl::io::format_number(mmfl::accuracy_at(scores, data.labels(), model.threshold))
              << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  std::string scores, labels, out, roc;
  std::optional<double> threshold;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto scores = mmfl::io::read_csv(a.scores);
  const auto labels = mmfl::io::read_csv(a.labels);
  auto column = [](const mmfl::io::CsvTable& t, const std::string& name, const std::string& file) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) {
      if (t.header.size() == 1) return Eigen::Index{0};
      throw mmfl::ValidationError(file + " has no '" + name + "' column");
    }
    return static_cast<Eigen::Index>(it - t.header.begin());
  };
  const auto sc = column(scores, "score", a.scores);
  const auto lc = column(labels, "label", a.labels);
  std::map<std::string, double> label_of;
  for (std::size_t i = 0; i < labels.ids.size(); ++i) label_of[labels.ids[i]] = labels.values(i, lc);
  const auto n = static_cast<Eigen::Index>(scores.ids.size());
  if (n == 0) throw mmfl::ValidationError(a.scores + " has no rows");
  mmfl::Vector s(n), raw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto it = label_of.find(scores.ids[i]);
    if (it == label_of.end())
      throw mmfl::ValidationError("no label for sample '" + scores.ids[i] + "'");
    s(i) = scores.values(i, sc);
    raw(i) = it->second;
  }
  // Larger original value is the positive class.
  const double hi = raw.maxCoeff(), lo = raw.minCoeff();
  mmfl::Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (raw(i) != hi && raw(i) != lo)
      throw mmfl::ValidationError("labels must take exactly two distinct values");
    y(i) = raw(i) == hi ? 1.0 : -1.0;
  }
  const auto youden = mmfl::youden_threshold(s, y);
  const double t = a.threshold.value_or(youden.threshold);
  Json result{{"n", n},
              {"auc", mmfl::roc_auc(s, y)},
              {"threshold", t},
              {"threshold_source", a.threshold ? "given" : "youden"},
              {"accuracy", mmfl::accuracy_at(s, y, t)},
              {"youden_j", youden.j}};
  write(output_path(g, a.out, "evaluation.json"), result.dump(2) + "\n");
  if (!a.roc.empty()) {
    std::ostringstream roc;
    roc << "threshold,fpr,tpr\n";
    for (const auto& p : mmfl::roc_points(s, y))
      roc << mmfl::io::format_number(p.threshold) << ',' << mmfl::io::format_number(p.false_positive_rate) << ','
          << mmfl::io::format_number(p.true_positive_rate) << '\n';
    write(a.roc, roc.str());
  }
  std::cout << result.dump(2) << '\n';
  return 0;
}

struct SelectArgs {
  std::string data, spec, strategy = "incremental", order;
  int folds = 5;
  double min_improvement = 0.005;
  int r_max = 0;
  bool profile = false;
  FitFlags flags;
};

std::vector<std::vector<int>> parse_order(const std::string& text, const mmfl::StructureSpec& spec) {
  // "X1+X2+X3,X1+X2,X1" : blocks separated by commas, modalities by '+'
  std::map<std::string, int> index;
  for (int k = 0; k < spec.modality_count(); ++k) index[spec.modality_name(k)] = k;
  std::vector<std::vector<int>> order;
  std::istringstream blocks(text);
  std::string block;
  while (std::getline(blocks, block, ',')) {
    std::vector<int> subset;
    std::istringstream names(block);
    std::string name;
    while (std::getline(names, name, '+')) {
      auto it = index.find(name);
      if (it == index.end()) throw mmfl::ValidationError("block order names unknown modality '" + name + "'");
      subset.push_back(it->second);
    }
    order.push_back(subset);
  }
  return order;
}

int cmd_select_ranks(const Globals& g, const SelectArgs& a) {
  const mmfl::StructureSpec spec = read_spec(a.spec);
  const mmfl::FitConfig fit = a.flags.resolve(g);
  const auto data = mmfl::io::load_dataset(a.data, spec.modality_names(), fit.task);
  mmfl::RankSearchConfig config;
  config.strategy = mmfl::parse_rank_strategy(a.strategy);
  config.folds = a.folds;
  config.min_improvement = a.min_improvement;
  config.r_max = a.r_max;
  config.seed = fit.seed;
  config.threads = g.threads;
  if (!a.order.empty()) config.block_order = parse_order(a.order, spec);

  const fs::path root(g.out_dir);
  if (a.profile) {
    const auto rows = mmfl::loading_profile(data, spec, fit);
    write(root / "loading_profile.csv", mmfl::io::loading_profile_csv(rows));
  }
  try {
    const auto selection = mmfl::select_ranks(data, spec.subsets(), config, fit);
    write(root / "rank_trace.jsonl", mmfl::io::trace_jsonl(selection.trace));
    const Json selected = mmfl::io::structure_to_json(selection.spec);
    write(root / "selected_spec.json", selected.dump(2) + "\n");
    std::cout << mmfl::io::trace_jsonl(selection.trace) << selected.dump(2) << '\n';
  } catch (const mmfl::DegenerateSelection& e) {
    write(root / "rank_trace.jsonl", mmfl::io::trace_jsonl(e.trace()));
    throw;
  }
  return 0;
}

struct BenchmarkArgs {
  int table = 2;
  int reps = 20;
  bool no_tune = false;
  FitFlags flags;
};

int cmd_benchmark(const Globals& g, const BenchmarkArgs& a) {
  if (a.table != 2 && a.table != 3) throw mmfl::ValidationError("--table must be 2 or 3");
  const auto scenario = a.table == 2 ? mmfl::Scenario::Complete : mmfl::Scenario::Incomplete;
  mmfl::BenchmarkOptions options = mmfl::scenario_defaults(scenario);
  options.fit = a.flags.resolve(g, options.fit);
  options.reps = a.reps;
  options.seed = g.seed.value_or(options.seed);
  options.threads = g.threads;
  options.tune = !a.no_tune;
  const mmfl::EvalReport report = mmfl::run_benchmark(options);

  const fs::path root(g.out_dir);
  const std::string stem = "table" + std::to_string(a.table);
  const std::string csv = mmfl::io::report_to_csv(report);
  write(root / (stem + ".csv"), csv);
  write(root / (stem + ".json"), mmfl::io::report_to_json(report).dump(1) + "\n");
  std::cout << "lambda=" << report.config.lambda << " gamma=" << report.config.gamma << '\n' << csv;
  int failed = 0;
  for (const auto& r : report.records) failed += !r.error.empty();
  if (failed) std::cerr << "warning: " << failed << " replication fits failed; see the JSON report\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal fission learning: fit, predict, simulate, benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "directory for outputs");
  app.add_option("--config", g.config_path, "JSON config file");

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit a model");
  fit->add_option("--data", fit_args.data, "directory with <modality>.csv, labels.csv, availability.csv")->required();
  fit->add_option("--spec", fit_args.spec, "structure JSON")->required();
  fit->add_option("--model", fit_args.model, "output bundle (default <out-dir>/model.json)");
  fit->add_flag("--no-u", fit_args.no_u, "omit the training latent matrix from the bundle");
  fit_args.flags.add(fit);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "score samples with a fitted model");
  predict->add_option("--model", predict_args.model)->required();
  predict->add_option("--data", predict_args.data)->required();
  predict->add_option("--out", predict_args.out, "scores CSV (default <out-dir>/predictions.csv)");

  EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand("evaluate", "AUC and accuracy of scores against labels");
  evaluate->add_option("--scores", evaluate_args.scores)->required();
  evaluate->add_option("--labels", evaluate_args.labels)->required();
  evaluate->add_option("--threshold", evaluate_args.threshold, "cutoff; Youden's index when omitted");
  evaluate->add_option("--out", evaluate_args.out);
  evaluate->add_option("--roc", evaluate_args.roc, "also write ROC points to this CSV");

  SelectArgs select_args;
  auto* select = app.add_subcommand("select-ranks", "greedy CV search for block ranks");
  select->add_option("--data", select_args.data)->required();
  select->add_option("--spec", select_args.spec, "candidate blocks (ranks ignored)")->required();
  select->add_option("--strategy", select_args.strategy)->check(CLI::IsMember({"sequential", "incremental"}));
  select->add_option("--order", select_args.order, "sequential block order, e.g. X1+X2,X1,X2");
  select->add_option("--folds", select_args.folds);
  select->add_option("--min-improvement", select_args.min_improvement);
  select->add_option("--r-max", select_args.r_max);
  select->add_flag("--profile", select_args.profile, "also fit the spec as given and export loading magnitudes");
  select_args.flags.add(select);

  BenchmarkArgs bench_args;
  auto* bench = app.add_subcommand("benchmark", "simulation benchmark");
  bench->add_option("--table", bench_args.table, "2: complete data, 3: incomplete data")->required();
  bench->add_option("--reps", bench_args.reps)->check(CLI::PositiveNumber);
  bench->add_flag("--no-tune", bench_args.no_tune, "skip the grid search");
  bench_args.flags.add(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(g);
    if (*fit) return cmd_fit(g, fit_args);
    if (*predict) return cmd_predict(g, predict_args);
    if (*evaluate) return cmd_evaluate(g, evaluate_args);
    if (*select) return cmd_select_ranks(g, select_args);
    if (*bench) return cmd_benchmark(g, bench_args);
  } catch (const mmfl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mmfl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const mmfl::DegenerateSelection& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
