#include "mmfl/incomplete.hpp"

#include "fit_common.hpp"
#include "mmfl/algebra.hpp"
#include "mmfl/classification.hpp"
#include "mmfl/regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mmfl {
namespace {

// Samples sharing one set of observed modalities, with the feature columns they expose.
struct Pattern {
  std::vector<int> observed;
  std::vector<int> rows;
  std::vector<int> columns;
};

std::vector<Pattern> group_patterns(const Availability& availability, const StructureMask& mask) {
  std::map<std::vector<int>, std::vector<int>> groups;
  for (Eigen::Index i = 0; i < availability.rows(); ++i) {
    std::vector<int> observed;
    for (Eigen::Index k = 0; k < availability.cols(); ++k)
      if (availability(i, k)) observed.push_back(static_cast<int>(k));
    groups[observed].push_back(static_cast<int>(i));
  }
  std::vector<Pattern> out;
  for (auto& [observed, rows] : groups) {
    Pattern p{observed, rows, {}};
    for (int k : observed)
      for (int j = mask.row_offsets()[k]; j < mask.row_offsets()[k + 1]; ++j) p.columns.push_back(j);
    out.push_back(std::move(p));
  }
  return out;
}

Matrix gather(const Matrix& M, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t c = 0; c < cols.size(); ++c) out(a, c) = M(rows[a], cols[c]);
  return out;
}

Matrix gather_rows(const Matrix& M, const std::vector<int>& rows) {
  Matrix out(rows.size(), M.cols());
  for (std::size_t a = 0; a < rows.size(); ++a) out.row(a) = M.row(rows[a]);
  return out;
}

// Row-wise latent update over all patterns. `weight` scales the supervision
// terms (mu/2 for classification, 1 for regression) and `target` is the
// per-sample response the supervision pulls toward.
Matrix latent_by_pattern(const std::vector<Pattern>& patterns, const Matrix& X, const Matrix& V,
                         const Vector& beta, const Vector& target, double weight, double lambda) {
  Matrix U(X.rows(), V.cols());
  for (const auto& p : patterns) {
    Matrix Vp(p.columns.size(), V.cols());
    for (std::size_t c = 0; c < p.columns.size(); ++c) Vp.row(c) = V.row(p.columns[c]);
    const Matrix Xp = gather(X, p.rows, p.columns);
    Vector tp(p.rows.size());
    for (std::size_t a = 0; a < p.rows.size(); ++a) tp(a) = target(p.rows[a]);
    const Matrix normal = lambda * Vp.transpose() * Vp + weight * beta * beta.transpose();
    const Matrix rhs = lambda * Xp * Vp + weight * tp * beta.transpose();
    const Matrix Up = solve_right_spd(normal, rhs);
    for (std::size_t a = 0; a < p.rows.size(); ++a) U.row(p.rows[a]) = Up.row(a);
  }
  return U;
}

void fill_missing(Matrix& X, const Matrix& U, const Matrix& V, const StructureMask& mask,
                  const Availability& availability) {
  for (Eigen::Index i = 0; i < availability.rows(); ++i)
    for (int k = 0; k < mask.modality_count(); ++k)
      if (!availability(i, k)) {
        const int offset = mask.row_offsets()[k];
        const int width = mask.modality_rows(k);
        X.row(i).segment(offset, width) = U.row(i) * V.middleRows(offset, width).transpose();
      }
}

double masked_reconstruction(const Matrix& U, const Matrix& V, const Matrix& X,
                             const StructureMask& mask, const Availability& availability) {
  const Matrix residual = X - U * V.transpose();
  double total = 0;
  for (Eigen::Index i = 0; i < availability.rows(); ++i)
    for (int k = 0; k < mask.modality_count(); ++k)
      if (availability(i, k))
        total += residual.row(i).segment(mask.row_offsets()[k], mask.modality_rows(k)).squaredNorm();
  return total;
}

}  // namespace

double masked_objective(const AlmState& state, const Matrix& X, const StructureMask& mask,
                        const Availability& availability, const Vector& y, const FitConfig& config) {
  if (state.U.rows() != X.rows() || availability.rows() != X.rows() ||
      availability.cols() != mask.modality_count() || X.cols() != mask.rows())
    throw ValidationError("masked objective: dimension mismatch");
  const double reconstruction = masked_reconstruction(state.U, state.V, X, mask, availability);
  double prediction = 0;
  if (config.task == Task::Classification)
    prediction = (y.array() * state.z.array()).max(0.0).square().sum();
  else
    prediction = (y - state.U * state.beta).squaredNorm();
  return prediction + config.lambda * reconstruction + config.gamma * state.beta.squaredNorm();
}

RowVector update_U_row_incomplete(std::span<const RowVector> x_parts,
                                  const std::vector<int>& observed,
                                  std::span<const Matrix> V_blocks, double y_i, double b,
                                  double z_i, double q_i, const Vector& beta, double mu,
                                  double lambda) {
  if (observed.empty()) throw ValidationError("latent row needs at least one observed modality");
  if (x_parts.size() != observed.size())
    throw ValidationError("one data row is required per observed modality");
  const double w = y_i - b - z_i - q_i / mu;
  Matrix normal = (mu / 2.0) * beta * beta.transpose();
  RowVector rhs = (mu / 2.0) * w * beta.transpose();
  for (std::size_t j = 0; j < observed.size(); ++j) {
    const Matrix& Vk = V_blocks[observed[j]];
    if (Vk.cols() != beta.size() || x_parts[j].size() != Vk.rows())
      throw ValidationError("latent row: dimension mismatch for modality " +
                            std::to_string(observed[j] + 1));
    normal += lambda * Vk.transpose() * Vk;
    rhs += lambda * x_parts[j] * Vk;
  }
  return solve_right_spd(normal, rhs);
}

PseudoReconstruction pseudo_reconstruct(const FissionModel& model, const MultiModalDataset& data) {
  if (model.U.rows() != data.samples())
    throw ValidationError("pseudo-reconstruction needs the model's own training samples");
  if (data.feature_dims() != model.feature_dims)
    throw ValidationError("pseudo-reconstruction: feature dimensions differ from the model");
  PseudoReconstruction out;
  out.provenance = !data.availability();
  for (int k = 0; k < data.modality_count(); ++k) {
    Matrix filled = data.modality(k);
    const int offset = model.mask.row_offsets()[k];
    const Matrix Vk = model.V.middleRows(offset, data.features(k));
    for (int i = 0; i < data.samples(); ++i)
      if (!data.available(i, k))
        filled.row(i) = model.scaling.restore(model.U.row(i) * Vk.transpose(), offset);
    out.filled.push_back(std::move(filled));
  }
  return out;
}

FissionModel fit_incomplete(const MultiModalDataset& data, const StructureSpec& spec,
                            const FitConfig& config, const StepObserver& observer) {
  config.validate();
  if (data.complete())
    return config.task == Task::Classification ? fit_classification(data, spec, config, observer)
                                               : fit_regression(data, spec, config, observer);

  detail::Prepared prepared = detail::prepare(data, spec, config);
  const StructureMask& mask = prepared.mask;
  const Vector& y = prepared.y;
  const Availability& availability = data.availability();
  Matrix X = prepared.X;  // unobserved rows are replaced by pseudo-reconstructions
  const int n = data.samples();
  const int r = spec.total_rank();
  const bool classification = config.task == Task::Classification;
  const double mu = config.mu;
  const auto patterns = group_patterns(availability, mask);

  AlmState state;
  state.V = Matrix::Zero(X.cols(), r);
  state.beta = Vector::Zero(r);
  state.b = 0.0;
  if (classification) {
    state.z = y;
    state.q = Vector::Zero(n);
  }

  // Per-row latent update on the observed parts of X.
  const auto latent = [&](const AlmState& s) {
    if (classification) {
      const Vector w = (y - s.z - s.q / mu).array() - s.b;
      return latent_by_pattern(patterns, X, s.V, s.beta, w, mu / 2.0, config.lambda);
    }
    return latent_by_pattern(patterns, X, s.V, s.beta, y, 1.0, config.lambda);
  };
  const auto masked_lagrangian = [&](const AlmState& s) {
    double value = masked_objective(s, X, mask, availability, y, config);
    if (classification) {
      const Vector constraint = (s.z - y + s.U * s.beta).array() + s.b;
      value += mu / 2.0 * constraint.squaredNorm() + s.q.dot(constraint);
    }
    return value;
  };

  // Initial V and beta: a fit on the complete samples when there are enough of them.
  const auto complete = data.complete_rows();
  bool initialized = false;
  if (static_cast<int>(complete.size()) >= std::max(r, 10) &&
      static_cast<int>(complete.size()) >= r) {
    try {
      const Matrix Xc = gather_rows(X, complete);
      Vector yc(complete.size());
      for (std::size_t a = 0; a < complete.size(); ++a) yc(a) = y(complete[a]);
      AlmState init;
      init.U = leading_left_singular_vectors(Xc, r);
      init.V = Matrix::Zero(X.cols(), r);
      init.beta = Vector::Zero(r);
      const auto complete_latent = [&](const AlmState& s) {
        return classification
                   ? update_U_complete(Xc, s.V, s.beta, yc, s.b, s.z, s.q, mu, config.lambda)
                   : update_U_regression(Xc, s.V, s.beta, yc, config.lambda);
      };
      if (classification) {
        init.z = yc;
        init.q = Vector::Zero(yc.size());
        const auto objective = [&](const AlmState& s) { return lagrangian_value(s, Xc, yc, config); };
        detail::run_classification_loop(init, Xc, yc, mask, config, config.max_iter,
                                        complete_latent, objective, {}, nullptr);
      } else {
        const auto objective = [&](const AlmState& s) {
          return regression_objective(s.U, s.V, s.beta, Xc, yc, config.lambda, config.gamma);
        };
        detail::run_regression_loop(init, Xc, yc, mask, config, config.max_iter, complete_latent,
                                    objective, {}, nullptr);
      }
      state.V = init.V;
      state.beta = init.beta;
      state.b = init.b;
      initialized = true;
    } catch (const NumericalError&) {
      initialized = false;
    }
  }
  if (!initialized) {
    const Matrix U0 = leading_left_singular_vectors(X, r);
    state.V = apply_mask(X.transpose() * U0, mask);
    state.beta = Vector::Zero(r);
    state.b = 0.0;
  }
  state.U = orthogonalize(latent(state));
  fill_missing(X, state.U, state.V, mask, availability);

  FitSummary summary;
  summary.algorithm = 2;
  std::vector<double> outer_history;
  double previous = 0.0;
  AlmState kept;
  Matrix kept_X;
  for (int outer = 1; outer <= config.outer_max_iter; ++outer) {
    const auto loop =
        classification
            ? detail::run_classification_loop(state, X, y, mask, config, config.inner_max_iter,
                                              latent, masked_lagrangian, observer, &availability)
            : detail::run_regression_loop(state, X, y, mask, config, config.inner_max_iter, latent,
                                          masked_lagrangian, observer, &availability);
    summary.iterations += loop.iterations;
    fill_missing(X, state.U, state.V, mask, availability);
    detail::notify(observer, "pseudo_reconstruct", state, X, y, &availability);

    const double value = masked_objective(state, X, mask, availability, y, config);
    if (!std::isfinite(value)) throw NumericalError("masked objective became non-finite");
    outer_history.push_back(value);
    summary.outer_iterations = outer;
    if (outer > 1) {
      summary.last_change = std::abs(value - previous);
      if (summary.last_change <= config.epsilon) {
        summary.converged = true;
        break;
      }
      // A pass that raises the masked objective is discarded and the loop stops.
      if (value > previous) {
        outer_history.pop_back();
        state = std::move(kept);
        X = std::move(kept_X);
        summary.stalled = true;
        summary.outer_iterations = outer - 1;
        break;
      }
    }
    previous = value;
    kept = state;
    kept_X = X;
  }

  FissionModel model = detail::assemble_model(data, spec, config, std::move(prepared),
                                              std::move(state), summary);
  model.summary.history = outer_history;
  model.summary.objective = outer_history.empty() ? 0.0 : outer_history.back();
  return model;
}

}  // namespace mmfl
