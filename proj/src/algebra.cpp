#include "mmfl/algebra.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>

namespace mmfl {
namespace {

constexpr double kRankTolerance = 1e-12;
constexpr double kRidgeBump = 1e-10;
constexpr double kMinReciprocalCondition = 1e-14;

// Flips singular vector pairs so the leading nonzero entry of each L column is positive.
void fix_signs(Matrix& L, Matrix* R) {
  for (Eigen::Index j = 0; j < L.cols(); ++j) {
    const double largest = L.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      if (std::abs(L(i, j)) > 1e-12 * largest) {
        if (L(i, j) < 0) {
          L.col(j) *= -1.0;
          if (R) R->col(j) *= -1.0;
        }
        break;
      }
    }
  }
}

// Columns with at least one nonzero loading among the rows in V.
std::vector<Eigen::Index> active_columns(const Matrix& V) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < V.cols(); ++j)
    if ((V.col(j).array() != 0.0).any()) active.push_back(j);
  return active;
}

// Latent columns without loadings on the observed features are unidentified;
// the beta beta^T term alone would let them cancel the score. They are set to 0
// and the system is solved over the remaining columns.
Matrix solve_projection(const Matrix& X, const Matrix& V, const Vector& beta, double lambda) {
  const auto active = active_columns(V);
  if (static_cast<Eigen::Index>(active.size()) == V.cols()) {
    const Matrix normal = lambda * V.transpose() * V + beta * beta.transpose();
    const Matrix rhs = lambda * X * V;
    return solve_right_spd(normal, rhs);
  }
  Matrix out = Matrix::Zero(X.rows(), V.cols());
  if (active.empty()) return out;
  const Matrix Va = V(Eigen::all, active);
  const Vector ba = beta(active);
  const Matrix normal = lambda * Va.transpose() * Va + ba * ba.transpose();
  const Matrix rhs = lambda * X * Va;
  out(Eigen::all, active) = solve_right_spd(normal, rhs);
  return out;
}

LatentProjection project_stacked(const RowVector& x, const Matrix& V, const Vector& beta,
                                 double lambda, std::vector<int> used) {
  if (x.size() != V.rows()) throw ValidationError("projection: feature count does not match loadings");
  if (beta.size() != V.cols()) throw ValidationError("projection: beta length does not match rank");
  LatentProjection out;
  out.u = solve_projection(x, V, beta, lambda);
  if (!out.u.allFinite()) throw NumericalError("projection produced non-finite latent components");
  out.used_modalities = std::move(used);
  return out;
}

}  // namespace

Matrix apply_mask(const Matrix& V, const Matrix& S) {
  if (V.rows() != S.rows() || V.cols() != S.cols())
    throw ValidationError("apply_mask: dimension mismatch (" + std::to_string(V.rows()) + "x" +
                          std::to_string(V.cols()) + " vs " + std::to_string(S.rows()) + "x" +
                          std::to_string(S.cols()) + ")");
  return V.cwiseProduct(S);
}

Matrix apply_mask(const Matrix& V, const StructureMask& S) { return apply_mask(V, S.matrix()); }

Matrix orthogonalize(const Matrix& U) {
  if (U.rows() < U.cols())
    throw ValidationError("orthogonalize: need at least as many rows as columns");
  if (!U.allFinite()) throw NumericalError("orthogonalize: non-finite input");
  Eigen::JacobiSVD<Matrix> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0) return U;
  if (!(sv.minCoeff() > kRankTolerance * sv.maxCoeff()))
    throw NumericalError("orthogonalize: latent matrix is rank deficient; reduce block ranks");
  Matrix L = svd.matrixU();
  Matrix R = svd.matrixV();
  fix_signs(L, &R);
  return L * R.transpose();
}

Matrix leading_left_singular_vectors(const Matrix& X, int r) {
  if (r > std::min(X.rows(), X.cols()))
    throw ValidationError("rank " + std::to_string(r) + " exceeds min(n, p)");
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU);
  Matrix L = svd.matrixU().leftCols(r);
  fix_signs(L, nullptr);
  return L;
}

Matrix solve_right_spd(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || A.cols() != B.cols())
    throw ValidationError("solve: dimension mismatch");
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success || !(llt.rcond() > kMinReciprocalCondition)) {
    const double scale = std::max(1.0, A.diagonal().cwiseAbs().maxCoeff());
    Matrix bumped = A;
    bumped.diagonal().array() += kRidgeBump * scale;
    llt.compute(bumped);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kMinReciprocalCondition))
      throw NumericalError("normal matrix is singular even after ridge bump");
  }
  return llt.solve(B.transpose()).transpose();
}

LatentProjection project_complete(const RowVector& x, const Matrix& V, const Vector& beta,
                                  double lambda, int modality_count) {
  std::vector<int> used(modality_count);
  for (int k = 0; k < modality_count; ++k) used[k] = k;
  return project_stacked(x, V, beta, lambda, std::move(used));
}

LatentProjection project_incomplete(std::span<const RowVector> x_parts,
                                    const std::vector<int>& available,
                                    std::span<const Matrix> V_blocks, const Vector& beta,
                                    double lambda) {
  if (available.empty()) throw ValidationError("projection needs at least one observed modality");
  if (x_parts.size() != available.size())
    throw ValidationError("one data row is required per observed modality");
  Eigen::Index p = 0;
  for (std::size_t j = 0; j < available.size(); ++j) {
    const int k = available[j];
    if (k < 0 || static_cast<std::size_t>(k) >= V_blocks.size())
      throw ValidationError("observed modality index out of range");
    if (x_parts[j].size() != V_blocks[k].rows())
      throw ValidationError("feature count mismatch for modality " + std::to_string(k + 1));
    p += V_blocks[k].rows();
  }
  RowVector x(p);
  Matrix V(p, beta.size());
  Eigen::Index offset = 0;
  for (std::size_t j = 0; j < available.size(); ++j) {
    const Matrix& Vk = V_blocks[available[j]];
    x.segment(offset, Vk.rows()) = x_parts[j];
    V.middleRows(offset, Vk.rows()) = Vk;
    offset += Vk.rows();
  }
  return project_stacked(x, V, beta, lambda, available);
}

Matrix project_rows(const Matrix& X, const Matrix& V, const Vector& beta, double lambda) {
  if (X.cols() != V.rows()) throw ValidationError("projection: feature count does not match loadings");
  if (beta.size() != V.cols()) throw ValidationError("projection: beta length does not match rank");
  return solve_projection(X, V, beta, lambda);
}

std::vector<Matrix> split_loadings(const Matrix& V, const StructureMask& mask) {
  std::vector<Matrix> out;
  for (int k = 0; k < mask.modality_count(); ++k)
    out.push_back(V.middleRows(mask.row_offsets()[k], mask.modality_rows(k)));
  return out;
}

}  // namespace mmfl
