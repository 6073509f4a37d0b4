#include "mmfl/simulation.hpp"

#include "mmfl/algebra.hpp"

#include <cmath>
#include <random>

namespace mmfl {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 over the pair
  std::uint64_t x = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void SimulationConfig::validate() const {
  if (n_train < 1 || n_test < 0) throw ValidationError("sample counts must be positive");
  const auto m = modality_dims.size();
  if (m < 1) throw ValidationError("simulation needs at least one modality");
  for (int d : modality_dims)
    if (d < 1) throw ValidationError("every modality needs at least one feature");
  if (spec.modality_count() != static_cast<int>(m))
    throw ValidationError("structure modality count does not match modality_dims");
  if (snr.size() != m) throw ValidationError("snr list must have one entry per modality");
  for (double s : snr)
    if (!(s > 0)) throw ValidationError("snr values must be positive");
  if (!train_missing_rates.empty() && train_missing_rates.size() != m)
    throw ValidationError("train_missing_rates must have one entry per modality");
  for (double rate : train_missing_rates)
    if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("missing rates must lie in [0, 1)");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("delta must be nonnegative");
  if (!modality_names.empty() && modality_names.size() != m)
    throw ValidationError("modality_names must have one entry per modality");
  int p = 0;
  for (int d : modality_dims) p += d;
  if (spec.total_rank() < 1 || spec.total_rank() > std::min(n_train + n_test, p))
    throw ValidationError("total rank must lie in [1, min(n, p)]");
}

namespace {

bool both_classes(const Vector& labels, Eigen::Index start, Eigen::Index count) {
  if (count == 0) return true;
  const auto seg = labels.segment(start, count);
  return seg.maxCoeff() != seg.minCoeff();
}

MultiModalDataset slice(const std::vector<Matrix>& X, const Vector& labels, Eigen::Index start,
                        Eigen::Index count, const std::vector<std::string>& names,
                        const std::string& prefix) {
  RawDataset raw;
  for (const auto& Xk : X) raw.modalities.push_back(Xk.middleRows(start, count));
  raw.labels = labels.segment(start, count);
  raw.modality_names = names;
  for (Eigen::Index i = 0; i < count; ++i) raw.sample_ids.push_back(prefix + std::to_string(i + 1));
  return validate_dataset(std::move(raw), Task::Classification, LabelCoding{0.0, 1.0});
}

}  // namespace

SimulatedData generate(const SimulationConfig& config) {
  config.validate();
  const int n = config.n_train + config.n_test;
  const int m = static_cast<int>(config.modality_dims.size());
  std::mt19937_64 rng(config.seed);

  SimulatedData out;
  GroundTruth& truth = out.truth;
  truth.mask = build_structure_mask(config.spec, config.modality_dims);
  const int r = static_cast<int>(truth.mask.cols());
  const int p = static_cast<int>(truth.mask.rows());

  // Redraw until both splits contain both classes (only matters for tiny n).
  std::bernoulli_distribution coin(0.5);
  truth.labels.resize(n);
  for (int attempt = 0;; ++attempt) {
    for (int i = 0; i < n; ++i) truth.labels(i) = coin(rng) ? 1.0 : 0.0;
    if (both_classes(truth.labels, 0, config.n_train) &&
        both_classes(truth.labels, config.n_train, config.n_test))
      break;
    if (attempt == 100) throw ValidationError("could not draw labels with both classes present");
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix U(n, r);
  for (int i = 0; i < n; ++i) {
    const double shift = truth.labels(i) > 0 ? config.delta : 0.0;
    for (int j = 0; j < r; ++j) U(i, j) = unit(rng) + shift;
  }
  truth.U = orthogonalize(U);

  std::uniform_real_distribution<double> loading(-1.0, 1.0);
  Matrix V(p, r);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < p; ++i) V(i, j) = loading(rng);
  truth.V = apply_mask(V, truth.mask);
  truth.Z = truth.U * truth.V.transpose();

  std::normal_distribution<double> gauss(0.0, 1.0);
  truth.sigma.resize(m);
  std::vector<Matrix> X;
  for (int k = 0; k < m; ++k) {
    const int offset = truth.mask.row_offsets()[k];
    const int width = config.modality_dims[k];
    const Matrix Zk = truth.Z.middleCols(offset, width);
    const double energy = Zk.squaredNorm();
    if (!(energy > 0)) throw ValidationError("modality " + std::to_string(k + 1) +
                                             " has no signal; cannot calibrate noise");
    const double snr = config.snr[k];
    const double sigma = std::isinf(snr) ? 0.0 : std::sqrt(energy / (snr * n * width));
    truth.sigma(k) = sigma;
    Matrix Xk = Zk;
    if (sigma > 0)
      for (int j = 0; j < width; ++j)
        for (int i = 0; i < n; ++i) Xk(i, j) += sigma * gauss(rng);
    X.push_back(std::move(Xk));
  }

  out.train = slice(X, truth.labels, 0, config.n_train, config.modality_names, "train_");
  if (config.n_test > 0)
    out.test = slice(X, truth.labels, config.n_train, config.n_test, config.modality_names, "test_");
  if (!config.train_missing_rates.empty()) {
    out.train = mask_training_rows(out.train, config.train_missing_rates,
                                   derive_seed(config.seed, 1));
  }
  return out;
}

MultiModalDataset mask_training_rows(const MultiModalDataset& data, std::span<const double> rates,
                                     std::uint64_t seed) {
  const int m = data.modality_count();
  if (static_cast<int>(rates.size()) != m)
    throw ValidationError("one missing rate per modality is required");
  for (double rate : rates)
    if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("missing rates must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Availability availability(data.samples(), m);
  for (int i = 0; i < data.samples(); ++i) {
    for (int attempt = 0;; ++attempt) {
      for (int k = 0; k < m; ++k) availability(i, k) = !(unit(rng) < rates[k]);
      if (availability.row(i).any()) break;
      if (attempt == 100)
        throw ValidationError("missing rates too high: sample " + std::to_string(i) +
                              " lost every modality after 100 redraws");
    }
  }
  return data.with_availability(std::move(availability));
}

std::vector<MultiModalDataset> build_test_cohorts(const MultiModalDataset& test,
                                                  const std::vector<std::vector<int>>& subsets) {
  std::vector<MultiModalDataset> cohorts;
  for (const auto& subset : subsets) {
    if (subset.empty()) throw ValidationError("test cohort subset is empty");
    Availability availability = Availability::Constant(test.samples(), test.modality_count(), false);
    for (int k : subset) {
      if (k < 0 || k >= test.modality_count())
        throw ValidationError("test cohort references modality " + std::to_string(k + 1) +
                              " which does not exist");
      availability.col(k).setConstant(true);
    }
    cohorts.push_back(test.with_availability(std::move(availability)));
  }
  return cohorts;
}

}  // namespace mmfl
