#pragma once

#include "mmfl/algebra.hpp"
#include "mmfl/types.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testing {

using mmfl::Matrix;
using mmfl::Vector;

inline Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                      double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

inline Vector uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  return uniform(rng, n, 1, lo, hi);
}

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

// Column-orthonormal n x r via Householder QR of a Gaussian matrix.
inline Matrix random_orthonormal(std::mt19937_64& rng, Eigen::Index n, Eigen::Index r) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, n, r));
  return qr.householderQ() * Matrix::Identity(n, r);
}

// +-1 labels with both classes present.
inline Vector random_signs(std::mt19937_64& rng, Eigen::Index n) {
  std::bernoulli_distribution coin(0.5);
  Vector y(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) y(i) = coin(rng) ? 1.0 : -1.0;
  } while (n > 1 && y.maxCoeff() == y.minCoeff());
  return y;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Central differences with a step relative to the coordinate.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double h = 1e-6) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + step;
    const double up = f(probe);
    probe(i) = x(i) - step;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2 * step);
  }
  return g;
}

// Max-norm of the gradient relative to the objective's magnitude.
inline double relative_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  return numeric_gradient(f, x).cwiseAbs().maxCoeff() / std::max(1.0, std::abs(f(x)));
}

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline mmfl::MultiModalDataset make_dataset(std::vector<Matrix> modalities, Vector labels,
                                            mmfl::Task task = mmfl::Task::Classification,
                                            std::vector<std::vector<std::uint8_t>> availability = {}) {
  mmfl::RawDataset raw;
  raw.modalities = std::move(modalities);
  raw.labels = std::move(labels);
  raw.availability = std::move(availability);
  return mmfl::validate_dataset(std::move(raw), task);
}

// Noiseless X = U V^T split into modalities of the given widths, V masked by spec.
struct Planted {
  Matrix U;
  Matrix V;
  std::vector<Matrix> modalities;
  mmfl::StructureMask mask;
};

inline Planted planted(std::mt19937_64& rng, int n, const std::vector<int>& dims,
                       const mmfl::StructureSpec& spec) {
  Planted p;
  p.mask = mmfl::build_structure_mask(spec, dims);
  p.U = random_orthonormal(rng, n, p.mask.cols());
  p.V = mmfl::apply_mask(uniform(rng, p.mask.rows(), p.mask.cols()), p.mask);
  const Matrix X = p.U * p.V.transpose();
  for (std::size_t k = 0; k < dims.size(); ++k)
    p.modalities.push_back(X.middleCols(p.mask.row_offsets()[k], dims[k]));
  return p;
}

inline bool exact_mask(const Matrix& V, const Matrix& S) {
  for (Eigen::Index i = 0; i < V.rows(); ++i)
    for (Eigen::Index j = 0; j < V.cols(); ++j)
      if (S(i, j) == 0 && V(i, j) != 0.0) return false;
  return true;
}

inline double orthonormality_error(const Matrix& U) {
  return (U.transpose() * U - Matrix::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff();
}

// Noiseless two-modality data with one shared component whose entries stay away
// from zero, labels = its sign, and every even row of modality 2 missing.
struct SharedFixture {
  std::vector<Matrix> truth;
  mmfl::MultiModalDataset data;
  mmfl::StructureSpec spec;
};

inline SharedFixture shared_rank1_fixture(std::uint64_t seed, int n = 40) {
  std::mt19937_64 rng(seed);
  const mmfl::StructureSpec spec(2, {{{0, 1}, 1}});
  const std::vector<int> dims{5, 4};
  const auto mask = mmfl::build_structure_mask(spec, dims);
  Vector u = random_signs(rng, n).array() * (1.0 + uniform_vector(rng, n, 0, 1).array());
  u.normalize();
  const Matrix V = mmfl::apply_mask(uniform(rng, mask.rows(), 1), mask);
  const Matrix X = u * V.transpose();
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = u(i) > 0;
  std::vector<std::vector<std::uint8_t>> avail(2, std::vector<std::uint8_t>(n, 1));
  for (int i = 0; i < n; i += 2) avail[1][i] = 0;
  std::vector<Matrix> truth{X.leftCols(5), X.rightCols(4)};
  auto data = make_dataset(truth, y, mmfl::Task::Classification, avail);
  return {std::move(truth), std::move(data), spec};
}

// Noiseless planted data whose labels need every planted component. The last
// planted column gets half-size loadings so one component cannot stand in for all.
inline mmfl::MultiModalDataset planted_labels(std::uint64_t seed, const mmfl::StructureSpec& spec) {
  std::mt19937_64 rng(seed);
  const int n = 100;
  auto p = planted(rng, n, {10, 10, 10}, spec);
  p.V.rightCols(1) *= 0.5;
  const Matrix X = p.U * p.V.transpose();
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = p.U.row(i).sum() > 0;
  return make_dataset({X.leftCols(10), X.middleCols(10, 10), X.rightCols(10)}, y);
}

}  // namespace testing
