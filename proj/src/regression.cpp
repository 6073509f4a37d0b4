#include "mmfl/regression.hpp"

#include "fit_common.hpp"
#include "mmfl/algebra.hpp"

namespace mmfl {

double regression_objective(const Matrix& U, const Matrix& V, const Vector& beta, const Matrix& X,
                            const Vector& y, double lambda, double gamma) {
  if (U.rows() != X.rows() || V.rows() != X.cols() || U.cols() != V.cols() ||
      beta.size() != U.cols() || y.size() != X.rows())
    throw ValidationError("regression objective: dimension mismatch");
  return (y - U * beta).squaredNorm() + lambda * (X - U * V.transpose()).squaredNorm() +
         gamma * beta.squaredNorm();
}

Vector update_beta_regression(const Matrix& U, const Vector& y, double gamma) {
  return (U.transpose() * y) / (1.0 + gamma);
}

Matrix update_U_regression(const Matrix& X, const Matrix& V, const Vector& beta, const Vector& y,
                           double lambda) {
  const Matrix normal = lambda * V.transpose() * V + beta * beta.transpose();
  const Matrix rhs = lambda * X * V + y * beta.transpose();
  return solve_right_spd(normal, rhs);
}

RowVector update_U_regression_incomplete(std::span<const RowVector> x_parts,
                                         const std::vector<int>& observed,
                                         std::span<const Matrix> V_blocks, double y_i,
                                         const Vector& beta, double lambda) {
  if (observed.empty()) throw ValidationError("latent row needs at least one observed modality");
  if (x_parts.size() != observed.size())
    throw ValidationError("one data row is required per observed modality");
  const auto r = beta.size();
  Matrix normal = beta * beta.transpose();
  RowVector rhs = y_i * beta.transpose();
  for (std::size_t j = 0; j < observed.size(); ++j) {
    const Matrix& Vk = V_blocks[observed[j]];
    if (Vk.cols() != r || x_parts[j].size() != Vk.rows())
      throw ValidationError("latent row: dimension mismatch for modality " +
                            std::to_string(observed[j] + 1));
    normal += lambda * Vk.transpose() * Vk;
    rhs += lambda * x_parts[j] * Vk;
  }
  return solve_right_spd(normal, rhs);
}

FissionModel fit_regression(const MultiModalDataset& data, const StructureSpec& spec,
                            const FitConfig& config, const StepObserver& observer) {
  if (config.task != Task::Regression)
    throw ValidationError("fit_regression needs a regression config");
  if (!data.complete())
    throw ValidationError("fit_regression needs complete modalities; use fit_incomplete");
  detail::Prepared prepared = detail::prepare(data, spec, config);
  const Matrix& X = prepared.X;
  const Vector& y = prepared.y;
  const int r = spec.total_rank();

  AlmState state;
  state.U = leading_left_singular_vectors(X, r);
  state.V = Matrix::Zero(X.cols(), r);
  state.beta = Vector::Zero(r);

  const auto latent = [&](const AlmState& s) {
    return update_U_regression(X, s.V, s.beta, y, config.lambda);
  };
  const auto objective = [&](const AlmState& s) {
    return regression_objective(s.U, s.V, s.beta, X, y, config.lambda, config.gamma);
  };
  const auto loop = detail::run_regression_loop(state, X, y, prepared.mask, config,
                                                config.max_iter, latent, objective, observer,
                                                nullptr);
  FitSummary summary;
  summary.algorithm = 1;
  summary.iterations = loop.iterations;
  summary.converged = loop.converged;
  summary.last_change = loop.last_change;
  return detail::assemble_model(data, spec, config, std::move(prepared), std::move(state),
                                std::move(summary));
}

}  // namespace mmfl
