#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmfl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
// n x m grid, entry (i, k) set when modality k is observed for sample i.
using Availability = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Input, configuration or file content that violates a documented invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown: singular normal system, rank-deficient latent space.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { Classification, Regression };
enum class Scaling { None, Center, Standardize };

std::string to_string(Task task);
std::string to_string(Scaling scaling);
Task parse_task(std::string_view text);
Scaling parse_scaling(std::string_view text);

// One component block: the modalities it loads on (0-based, sorted) and its rank.
struct Block {
  std::vector<int> subset;
  int rank = 0;

  bool operator==(const Block&) const = default;
};

// Declarative layout of globally joint, partially joint and individual blocks.
// Blocks are kept in canonical order: larger subsets first, then lexicographic.
class StructureSpec {
 public:
  StructureSpec() = default;
  StructureSpec(int modality_count, std::vector<Block> blocks,
                std::vector<std::string> modality_names = {});

  // Every nonempty subset of {0..m-1} with the same rank.
  static StructureSpec full(int modality_count, int rank_per_block,
                            std::vector<std::string> modality_names = {});

  int modality_count() const { return modality_count_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<std::string>& modality_names() const { return names_; }
  std::string modality_name(int k) const;
  int total_rank() const;

  // Rank of the block with this subset, 0 when absent.
  int rank_of(const std::vector<int>& subset) const;
  StructureSpec with_rank(const std::vector<int>& subset, int rank) const;
  std::vector<std::vector<int>> subsets() const;

  // Keeps only the listed modalities. Each block is intersected with them;
  // blocks that collapse onto the same subset have their ranks summed.
  StructureSpec restricted_to(const std::vector<int>& modalities) const;

  std::string describe_subset(const std::vector<int>& subset) const;

  bool operator==(const StructureSpec& other) const {
    return modality_count_ == other.modality_count_ && blocks_ == other.blocks_;
  }

 private:
  int modality_count_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::string> names_;
};

bool canonical_less(const std::vector<int>& a, const std::vector<int>& b);

struct BlockColumns {
  std::size_t block = 0;  // index into StructureSpec::blocks()
  int offset = 0;
  int count = 0;
};

// Binary p x r loading mask S with its row (modality) and column (block) layout.
class StructureMask {
 public:
  StructureMask() = default;
  StructureMask(Matrix mask, std::vector<BlockColumns> columns, std::vector<int> row_offsets);

  const Matrix& matrix() const { return mask_; }
  Eigen::Index rows() const { return mask_.rows(); }
  Eigen::Index cols() const { return mask_.cols(); }
  const std::vector<BlockColumns>& block_columns() const { return columns_; }
  // m + 1 entries; modality k owns rows [row_offsets[k], row_offsets[k+1]).
  const std::vector<int>& row_offsets() const { return row_offsets_; }
  int modality_count() const { return static_cast<int>(row_offsets_.size()) - 1; }
  int modality_rows(int k) const { return row_offsets_[k + 1] - row_offsets_[k]; }

 private:
  Matrix mask_;
  std::vector<BlockColumns> columns_;
  std::vector<int> row_offsets_;
};

StructureMask build_structure_mask(const StructureSpec& spec, std::span<const int> feature_dims);

// Maps the two original class values onto {-1, +1}; the smaller value is negative.
struct LabelCoding {
  double negative = 0.0;
  double positive = 1.0;

  double encode(double raw) const;
  double decode(double coded) const { return coded > 0 ? positive : negative; }
};

struct RawDataset {
  std::vector<Matrix> modalities;
  // One 0/1 vector of length n per modality; an empty list means fully observed.
  std::vector<std::vector<std::uint8_t>> availability;
  Vector labels;  // may be empty for unlabeled (prediction-only) data
  std::vector<std::string> modality_names;
  std::vector<std::vector<std::string>> feature_names;
  std::vector<std::string> sample_ids;
};

class MultiModalDataset {
 public:
  MultiModalDataset() = default;

  int samples() const { return n_; }
  int modality_count() const { return static_cast<int>(modalities_.size()); }
  int features(int k) const { return static_cast<int>(modalities_[k].cols()); }
  int total_features() const;
  std::vector<int> feature_dims() const;

  const Matrix& modality(int k) const { return modalities_[k]; }
  const std::vector<Matrix>& modalities() const { return modalities_; }
  const Availability& availability() const { return availability_; }
  bool available(int i, int k) const { return availability_(i, k); }
  std::vector<int> observed_modalities(int i) const;

  bool has_labels() const { return labels_.size() > 0; }
  // Classification labels are stored as -1/+1; see label_coding().
  const Vector& labels() const { return labels_; }
  Task task() const { return task_; }
  const std::optional<LabelCoding>& label_coding() const { return coding_; }
  Vector original_labels() const;

  const std::vector<std::string>& modality_names() const { return modality_names_; }
  const std::vector<std::vector<std::string>>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }

  // [X_1, ..., X_m]; rows of unavailable modalities hold whatever the source had.
  Matrix concatenated() const;
  bool complete() const { return availability_.all(); }
  std::vector<int> complete_rows() const;

  MultiModalDataset subset_rows(std::span<const int> rows) const;
  MultiModalDataset with_availability(Availability availability) const;
  // Keeps only the listed modalities; samples left with nothing observed are dropped.
  MultiModalDataset select_modalities(const std::vector<int>& keep) const;

  friend MultiModalDataset validate_dataset(RawDataset raw, Task task,
                                            std::optional<LabelCoding> coding);

 private:
  int n_ = 0;
  std::vector<Matrix> modalities_;
  Availability availability_;
  Vector labels_;
  Task task_ = Task::Classification;
  std::optional<LabelCoding> coding_;
  std::vector<std::string> modality_names_;
  std::vector<std::vector<std::string>> feature_names_;
  std::vector<std::string> sample_ids_;
};

// Checks shapes and availability and recodes classification labels. A known
// coding (e.g. from a fitted model) may be supplied for test data.
MultiModalDataset validate_dataset(RawDataset raw, Task task,
                                   std::optional<LabelCoding> coding = std::nullopt);

struct FitConfig {
  double lambda = 1.0;
  double gamma = 0.01;
  double mu = 1.0;
  double epsilon = 1e-6;
  int max_iter = 500;
  int outer_max_iter = 20;
  int inner_max_iter = 100;
  Task task = Task::Classification;
  Scaling scaling = Scaling::Standardize;
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-feature affine map applied before fitting and prediction.
struct FeatureScaling {
  Vector center;
  Vector scale;

  // Statistics use observed rows only. Constant features get scale 1.
  static FeatureScaling fit(const MultiModalDataset& data, Scaling mode);
  static FeatureScaling identity(Eigen::Index p);

  // Scaled copy of modality k (columns offset by the modality's position).
  Matrix apply(const Matrix& block, Eigen::Index column_offset) const;
  Matrix restore(const Matrix& block, Eigen::Index column_offset) const;
};

struct FitSummary {
  int algorithm = 1;  // 1 = complete-modality solver, 2 = incomplete
  int iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  bool stalled = false;  // incomplete solver: stopped after an outer pass raised the objective
  double objective = 0.0;
  double last_change = 0.0;
  std::vector<double> history;
};

struct FissionModel {
  Matrix U;  // training latent components, n x r
  Matrix V;  // loadings, p x r, exact zeros outside the mask
  Vector beta;
  double intercept = 0.0;
  Vector dual;   // classification only
  Vector slack;  // classification only
  StructureSpec spec;
  StructureMask mask;
  FitConfig config;
  FeatureScaling scaling;
  std::vector<int> feature_dims;
  std::vector<std::string> modality_names;
  std::optional<LabelCoding> label_coding;
  double response_offset = 0.0;  // regression: mean of the training response
  double threshold = 0.0;        // classification: Youden cutoff on training scores
  FitSummary summary;
};

}  // namespace mmfl
