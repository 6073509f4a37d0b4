#include "mmfl/classification.hpp"

#include "fit_common.hpp"
#include "mmfl/algebra.hpp"

namespace mmfl {

double lagrangian_value(const AlmState& state, const Matrix& X, const Vector& y,
                        const FitConfig& config) {
  const auto n = y.size();
  if (state.U.rows() != n || X.rows() != n || state.z.size() != n || state.q.size() != n ||
      state.V.rows() != X.cols() || state.V.cols() != state.U.cols() ||
      state.beta.size() != state.U.cols())
    throw ValidationError("lagrangian: state dimensions do not match the data");
  const Vector constraint = (state.z - y + state.U * state.beta).array() + state.b;
  const double hinge = (y.array() * state.z.array()).max(0.0).square().sum();
  const double reconstruction = (X - state.U * state.V.transpose()).squaredNorm();
  return hinge + config.lambda * reconstruction + config.gamma * state.beta.squaredNorm() +
         config.mu / 2.0 * constraint.squaredNorm() + state.q.dot(constraint);
}

Vector slack_target(const Matrix& U, const Vector& beta, double b, const Vector& y, const Vector& q,
                    double mu) {
  return (y - U * beta - q / mu).array() - b;
}

Vector update_z(const Vector& s, const Vector& y, double mu) {
  if (s.size() != y.size()) throw ValidationError("update_z: length mismatch");
  const double shrink = 1.0 + 2.0 / mu;
  Vector z(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) z(i) = y(i) * s(i) > 0 ? s(i) / shrink : s(i);
  return z;
}

Vector update_beta(const Matrix& U, const Vector& y, double b, const Vector& q, const Vector& z,
                   double mu, double gamma) {
  const Vector residual = (y - q / mu - z).array() - b;
  return (mu / (2.0 * gamma + mu)) * (U.transpose() * residual);
}

double update_b(const Matrix& U, const Vector& beta, const Vector& y, const Vector& z,
                const Vector& q, double mu) {
  return (y - z - U * beta - q / mu).mean();
}

Matrix update_U_complete(const Matrix& X, const Matrix& V, const Vector& beta, const Vector& y,
                         double b, const Vector& z, const Vector& q, double mu, double lambda) {
  const Vector w = (y - z - q / mu).array() - b;
  const Matrix normal = lambda * V.transpose() * V + (mu / 2.0) * beta * beta.transpose();
  const Matrix rhs = lambda * X * V + (mu / 2.0) * w * beta.transpose();
  return solve_right_spd(normal, rhs);
}

Vector update_dual(const Vector& q, const Vector& z, const Vector& y, const Matrix& U,
                   const Vector& beta, double b, double mu) {
  return q + mu * ((z - y + U * beta).array() + b).matrix();
}

FissionModel fit_classification(const MultiModalDataset& data, const StructureSpec& spec,
                                const FitConfig& config, const StepObserver& observer) {
  if (config.task != Task::Classification)
    throw ValidationError("fit_classification needs a classification config");
  if (!data.complete())
    throw ValidationError("fit_classification needs complete modalities; use fit_incomplete");
  detail::Prepared prepared = detail::prepare(data, spec, config);
  const Matrix& X = prepared.X;
  const Vector& y = prepared.y;
  const int n = data.samples();
  const int r = spec.total_rank();

  AlmState state;
  state.U = leading_left_singular_vectors(X, r);
  state.V = Matrix::Zero(X.cols(), r);
  state.beta = Vector::Zero(r);
  state.b = 0.0;
  state.z = y;
  state.q = Vector::Zero(n);

  const auto latent = [&](const AlmState& s) {
    return update_U_complete(X, s.V, s.beta, y, s.b, s.z, s.q, config.mu, config.lambda);
  };
  const auto objective = [&](const AlmState& s) { return lagrangian_value(s, X, y, config); };
  const auto loop = detail::run_classification_loop(state, X, y, prepared.mask, config,
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
