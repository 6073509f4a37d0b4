#pragma once

#include "mmfl/solver.hpp"

namespace mmfl {

// Augmented Lagrangian of the classification objective:
//   sum_i max(y_i z_i, 0)^2 + lambda ||X - U V^T||_F^2 + gamma ||beta||^2
//   + (mu/2) ||D||^2 + <q, D>,   D = z - y + U beta + b.
double lagrangian_value(const AlmState& state, const Matrix& X, const Vector& y,
                        const FitConfig& config);

// s = y - U beta - b - q/mu, the point the slack is pulled toward.
Vector slack_target(const Matrix& U, const Vector& beta, double b, const Vector& y, const Vector& q,
                    double mu);

// Piecewise minimizer of max(y z, 0)^2 + (mu/2)(z - s)^2.
Vector update_z(const Vector& s, const Vector& y, double mu);

// (mu / (2 gamma + mu)) U^T (y - b - q/mu - z); exact when U^T U = I.
Vector update_beta(const Matrix& U, const Vector& y, double b, const Vector& q, const Vector& z,
                   double mu, double gamma);

double update_b(const Matrix& U, const Vector& beta, const Vector& y, const Vector& z,
                const Vector& q, double mu);

// (lambda X V + (mu/2) w beta^T)(lambda V^T V + (mu/2) beta beta^T)^{-1} with
// w = y - b - z - q/mu. Not orthogonalized.
Matrix update_U_complete(const Matrix& X, const Matrix& V, const Vector& beta, const Vector& y,
                         double b, const Vector& z, const Vector& q, double mu, double lambda);

Vector update_dual(const Vector& q, const Vector& z, const Vector& y, const Matrix& U,
                   const Vector& beta, double b, double mu);

// Complete-modality classification solver.
FissionModel fit_classification(const MultiModalDataset& data, const StructureSpec& spec,
                                 const FitConfig& config, const StepObserver& observer = {});

}  // namespace mmfl
