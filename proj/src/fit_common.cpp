#include "fit_common.hpp"

#include "mmfl/algebra.hpp"
#include "mmfl/classification.hpp"
#include "mmfl/metrics.hpp"
#include "mmfl/regression.hpp"

#include <cmath>

namespace mmfl::detail {

Prepared prepare(const MultiModalDataset& data, const StructureSpec& spec, const FitConfig& config) {
  config.validate();
  if (!data.has_labels()) throw ValidationError("training data needs labels");
  if (data.task() != config.task)
    throw ValidationError("dataset was validated for " + to_string(data.task()) +
                          " but the fit asks for " + to_string(config.task));
  if (spec.modality_count() != data.modality_count())
    throw ValidationError("structure describes " + std::to_string(spec.modality_count()) +
                          " modalities, dataset has " + std::to_string(data.modality_count()));
  const auto dims = data.feature_dims();
  Prepared out;
  out.mask = build_structure_mask(spec, dims);
  const int r = spec.total_rank();
  if (r > std::min(data.samples(), data.total_features()))
    throw ValidationError("total rank " + std::to_string(r) + " exceeds min(n, p) = " +
                          std::to_string(std::min(data.samples(), data.total_features())));
  for (int k = 0; k < data.modality_count(); ++k) {
    bool any = false;
    for (int i = 0; i < data.samples() && !any; ++i) any = data.available(i, k);
    if (!any) throw ValidationError("modality " + std::to_string(k + 1) + " is never observed");
  }

  out.scaling = FeatureScaling::fit(data, config.scaling);
  out.X.resize(data.samples(), data.total_features());
  Eigen::Index offset = 0;
  for (int k = 0; k < data.modality_count(); ++k) {
    Matrix block = out.scaling.apply(data.modality(k), offset);
    for (int i = 0; i < data.samples(); ++i)
      if (!data.available(i, k)) block.row(i).setZero();
    out.X.middleCols(offset, block.cols()) = block;
    offset += block.cols();
  }

  out.y = data.labels();
  if (config.task == Task::Regression) {
    out.response_offset = out.y.mean();
    out.y.array() -= out.response_offset;
  }
  return out;
}

void notify(const StepObserver& observer, std::string_view step, const AlmState& state,
            const Matrix& X, const Vector& y, const Availability* availability) {
  if (observer) observer(StepContext{step, state, X, y, availability});
}

LoopResult run_classification_loop(AlmState& state, const Matrix& X, const Vector& y,
                                   const StructureMask& mask, const FitConfig& config,
                                   int max_iter, const LatentUpdate& latent,
                                   const ObjectiveFn& objective, const StepObserver& observer,
                                   const Availability* availability) {
  const double mu = config.mu;
  LoopResult result;
  double previous = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    state.V = apply_mask(X.transpose() * state.U, mask);
    notify(observer, "V", state, X, y, availability);

    state.beta = update_beta(state.U, y, state.b, state.q, state.z, mu, config.gamma);
    notify(observer, "beta", state, X, y, availability);

    state.b = update_b(state.U, state.beta, y, state.z, state.q, mu);
    notify(observer, "b", state, X, y, availability);

    state.z = update_z(slack_target(state.U, state.beta, state.b, y, state.q, mu), y, mu);
    notify(observer, "z", state, X, y, availability);

    state.U = latent(state);
    notify(observer, "U", state, X, y, availability);

    state.U = orthogonalize(state.U);
    notify(observer, "orthogonalize", state, X, y, availability);

    state.q = update_dual(state.q, state.z, y, state.U, state.beta, state.b, mu);
    notify(observer, "dual", state, X, y, availability);

    ++state.iteration;
    const double value = objective(state);
    if (!std::isfinite(value)) throw NumericalError("objective became non-finite");
    state.lagrangian_history.push_back(value);
    result.iterations = k;
    if (k > 1) {
      result.last_change = std::abs(value - previous);
      if (result.last_change <= config.epsilon) {
        result.converged = true;
        break;
      }
    }
    previous = value;
  }
  return result;
}

LoopResult run_regression_loop(AlmState& state, const Matrix& X, const Vector& y,
                               const StructureMask& mask, const FitConfig& config, int max_iter,
                               const LatentUpdate& latent, const ObjectiveFn& objective,
                               const StepObserver& observer, const Availability* availability) {
  LoopResult result;
  double previous = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    state.V = apply_mask(X.transpose() * state.U, mask);
    notify(observer, "V", state, X, y, availability);

    state.beta = update_beta_regression(state.U, y, config.gamma);
    notify(observer, "beta", state, X, y, availability);

    state.U = latent(state);
    notify(observer, "U", state, X, y, availability);

    state.U = orthogonalize(state.U);
    notify(observer, "orthogonalize", state, X, y, availability);

    ++state.iteration;
    const double value = objective(state);
    if (!std::isfinite(value)) throw NumericalError("objective became non-finite");
    state.lagrangian_history.push_back(value);
    result.iterations = k;
    if (k > 1) {
      result.last_change = std::abs(value - previous);
      if (result.last_change <= config.epsilon) {
        result.converged = true;
        break;
      }
    }
    previous = value;
  }
  return result;
}

FissionModel assemble_model(const MultiModalDataset& data, const StructureSpec& spec,
                            const FitConfig& config, Prepared prepared, AlmState state,
                            FitSummary summary) {
  FissionModel model;
  model.U = std::move(state.U);
  model.V = std::move(state.V);
  model.beta = std::move(state.beta);
  model.intercept = config.task == Task::Classification ? state.b : 0.0;
  if (config.task == Task::Classification) {
    model.dual = std::move(state.q);
    model.slack = std::move(state.z);
  }
  model.spec = spec;
  model.mask = std::move(prepared.mask);
  model.config = config;
  model.scaling = std::move(prepared.scaling);
  model.feature_dims = data.feature_dims();
  model.modality_names = data.modality_names();
  model.label_coding = data.label_coding();
  model.response_offset = prepared.response_offset;
  summary.history = std::move(state.lagrangian_history);
  if (!summary.history.empty()) summary.objective = summary.history.back();
  model.summary = std::move(summary);
  if (config.task == Task::Classification) {
    const Vector scores = predict(model, data);
    model.threshold = youden_threshold(scores, data.labels()).threshold;
  }
  return model;
}

}  // namespace mmfl::detail
