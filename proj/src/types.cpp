#include "mmfl/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace mmfl {

std::string to_string(Task task) {
  return task == Task::Classification ? "classification" : "regression";
}

std::string to_string(Scaling scaling) {
  switch (scaling) {
    case Scaling::None: return "none";
    case Scaling::Center: return "center";
    case Scaling::Standardize: return "standardize";
  }
  return "standardize";
}

Task parse_task(std::string_view text) {
  if (text == "classification") return Task::Classification;
  if (text == "regression") return Task::Regression;
  throw ValidationError("unknown task '" + std::string(text) + "'");
}

Scaling parse_scaling(std::string_view text) {
  if (text == "none") return Scaling::None;
  if (text == "center") return Scaling::Center;
  if (text == "standardize") return Scaling::Standardize;
  throw ValidationError("unknown scaling '" + std::string(text) + "'");
}

bool canonical_less(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return a.size() > b.size();
  return a < b;
}

StructureSpec::StructureSpec(int modality_count, std::vector<Block> blocks,
                             std::vector<std::string> modality_names)
    : modality_count_(modality_count), blocks_(std::move(blocks)), names_(std::move(modality_names)) {
  if (modality_count_ < 1) throw ValidationError("structure needs at least one modality");
  if (!names_.empty() && static_cast<int>(names_.size()) != modality_count_)
    throw ValidationError("structure has " + std::to_string(names_.size()) + " names for " +
                          std::to_string(modality_count_) + " modalities");
  std::set<std::vector<int>> seen;
  for (auto& block : blocks_) {
    if (block.subset.empty()) throw ValidationError("block with empty modality subset");
    if (block.rank < 0) throw ValidationError("block rank must be nonnegative");
    std::sort(block.subset.begin(), block.subset.end());
    if (std::adjacent_find(block.subset.begin(), block.subset.end()) != block.subset.end())
      throw ValidationError("block lists a modality twice");
    for (int k : block.subset)
      if (k < 0 || k >= modality_count_)
        throw ValidationError("subset index " + std::to_string(k) + " out of range");
    if (!seen.insert(block.subset).second)
      throw ValidationError("subset " + describe_subset(block.subset) + " appears more than once");
  }
  std::sort(blocks_.begin(), blocks_.end(),
            [](const Block& a, const Block& b) { return canonical_less(a.subset, b.subset); });
}

StructureSpec StructureSpec::full(int modality_count, int rank_per_block,
                                  std::vector<std::string> modality_names) {
  std::vector<Block> blocks;
  for (unsigned bits = 1; bits < (1u << modality_count); ++bits) {
    Block block;
    for (int k = 0; k < modality_count; ++k)
      if (bits & (1u << k)) block.subset.push_back(k);
    block.rank = rank_per_block;
    blocks.push_back(std::move(block));
  }
  return StructureSpec(modality_count, std::move(blocks), std::move(modality_names));
}

std::string StructureSpec::modality_name(int k) const {
  if (!names_.empty()) return names_[k];
  return "X" + std::to_string(k + 1);
}

int StructureSpec::total_rank() const {
  int r = 0;
  for (const auto& b : blocks_) r += b.rank;
  return r;
}

int StructureSpec::rank_of(const std::vector<int>& subset) const {
  auto sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& b : blocks_)
    if (b.subset == sorted) return b.rank;
  return 0;
}

StructureSpec StructureSpec::with_rank(const std::vector<int>& subset, int rank) const {
  auto sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  auto blocks = blocks_;
  auto it = std::find_if(blocks.begin(), blocks.end(),
                         [&](const Block& b) { return b.subset == sorted; });
  if (it == blocks.end())
    blocks.push_back({sorted, rank});
  else
    it->rank = rank;
  return StructureSpec(modality_count_, std::move(blocks), names_);
}

std::vector<std::vector<int>> StructureSpec::subsets() const {
  std::vector<std::vector<int>> out;
  for (const auto& b : blocks_) out.push_back(b.subset);
  return out;
}

StructureSpec StructureSpec::restricted_to(const std::vector<int>& modalities) const {
  std::vector<int> keep = modalities;
  std::sort(keep.begin(), keep.end());
  std::map<std::vector<int>, int> ranks;
  for (const auto& b : blocks_) {
    std::vector<int> mapped;
    for (int k : b.subset) {
      auto it = std::lower_bound(keep.begin(), keep.end(), k);
      if (it != keep.end() && *it == k) mapped.push_back(static_cast<int>(it - keep.begin()));
    }
    if (!mapped.empty()) ranks[mapped] += b.rank;
  }
  std::vector<Block> blocks;
  for (auto& [subset, rank] : ranks) blocks.push_back({subset, rank});
  std::vector<std::string> names;
  if (!names_.empty())
    for (int k : keep) names.push_back(names_[k]);
  return StructureSpec(static_cast<int>(keep.size()), std::move(blocks), std::move(names));
}

std::string StructureSpec::describe_subset(const std::vector<int>& subset) const {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) out << ',';
    int k = subset[i];
    if (k >= 0 && k < modality_count_)
      out << modality_name(k);
    else
      out << k;
  }
  out << ')';
  return out.str();
}

StructureMask::StructureMask(Matrix mask, std::vector<BlockColumns> columns,
                             std::vector<int> row_offsets)
    : mask_(std::move(mask)), columns_(std::move(columns)), row_offsets_(std::move(row_offsets)) {}

StructureMask build_structure_mask(const StructureSpec& spec, std::span<const int> feature_dims) {
  if (static_cast<int>(feature_dims.size()) != spec.modality_count())
    throw ValidationError("structure has " + std::to_string(spec.modality_count()) +
                          " modalities but " + std::to_string(feature_dims.size()) +
                          " feature dimensions were given");
  const int r = spec.total_rank();
  if (r < 1) throw ValidationError("total rank must be at least 1");

  std::vector<int> row_offsets{0};
  for (int d : feature_dims) {
    if (d < 1) throw ValidationError("every modality needs at least one feature");
    row_offsets.push_back(row_offsets.back() + d);
  }

  Matrix mask = Matrix::Zero(row_offsets.back(), r);
  std::vector<BlockColumns> columns;
  int offset = 0;
  for (std::size_t j = 0; j < spec.blocks().size(); ++j) {
    const auto& block = spec.blocks()[j];
    columns.push_back({j, offset, block.rank});
    for (int k : block.subset)
      mask.block(row_offsets[k], offset, row_offsets[k + 1] - row_offsets[k], block.rank).setOnes();
    offset += block.rank;
  }
  return StructureMask(std::move(mask), std::move(columns), std::move(row_offsets));
}

double LabelCoding::encode(double raw) const {
  if (raw == negative) return -1.0;
  if (raw == positive) return 1.0;
  std::ostringstream msg;
  msg << "label " << raw << " is not one of the two known classes (" << negative << ", "
      << positive << ")";
  throw ValidationError(msg.str());
}

int MultiModalDataset::total_features() const {
  int p = 0;
  for (const auto& m : modalities_) p += static_cast<int>(m.cols());
  return p;
}

std::vector<int> MultiModalDataset::feature_dims() const {
  std::vector<int> dims;
  for (const auto& m : modalities_) dims.push_back(static_cast<int>(m.cols()));
  return dims;
}

std::vector<int> MultiModalDataset::observed_modalities(int i) const {
  std::vector<int> out;
  for (int k = 0; k < modality_count(); ++k)
    if (availability_(i, k)) out.push_back(k);
  return out;
}

Vector MultiModalDataset::original_labels() const {
  if (!coding_) return labels_;
  Vector out(labels_.size());
  for (Eigen::Index i = 0; i < labels_.size(); ++i) out(i) = coding_->decode(labels_(i));
  return out;
}

Matrix MultiModalDataset::concatenated() const {
  Matrix X(n_, total_features());
  Eigen::Index offset = 0;
  for (const auto& m : modalities_) {
    X.middleCols(offset, m.cols()) = m;
    offset += m.cols();
  }
  return X;
}

std::vector<int> MultiModalDataset::complete_rows() const {
  std::vector<int> rows;
  for (int i = 0; i < n_; ++i)
    if (availability_.row(i).all()) rows.push_back(i);
  return rows;
}

MultiModalDataset MultiModalDataset::subset_rows(std::span<const int> rows) const {
  MultiModalDataset out = *this;
  out.n_ = static_cast<int>(rows.size());
  for (std::size_t k = 0; k < modalities_.size(); ++k) {
    Matrix m(rows.size(), modalities_[k].cols());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(i) = modalities_[k].row(rows[i]);
    out.modalities_[k] = std::move(m);
  }
  out.availability_.resize(rows.size(), modality_count());
  for (std::size_t i = 0; i < rows.size(); ++i) out.availability_.row(i) = availability_.row(rows[i]);
  if (has_labels()) {
    out.labels_.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out.labels_(i) = labels_(rows[i]);
  }
  if (!sample_ids_.empty()) {
    out.sample_ids_.clear();
    for (int i : rows) out.sample_ids_.push_back(sample_ids_[i]);
  }
  return out;
}

MultiModalDataset MultiModalDataset::with_availability(Availability availability) const {
  if (availability.rows() != n_ || availability.cols() != modality_count())
    throw ValidationError("availability grid has the wrong shape");
  for (int i = 0; i < n_; ++i)
    if (!availability.row(i).any())
      throw ValidationError("sample " + std::to_string(i) + " has no available modality");
  MultiModalDataset out = *this;
  out.availability_ = std::move(availability);
  return out;
}

MultiModalDataset MultiModalDataset::select_modalities(const std::vector<int>& keep) const {
  if (keep.empty()) throw ValidationError("modality selection is empty");
  std::vector<int> rows;
  for (int i = 0; i < n_; ++i) {
    bool any = false;
    for (int k : keep) any = any || availability_(i, k);
    if (any) rows.push_back(i);
  }
  MultiModalDataset base = subset_rows(rows);
  MultiModalDataset out = base;
  out.modalities_.clear();
  out.availability_.resize(base.n_, static_cast<Eigen::Index>(keep.size()));
  out.modality_names_.clear();
  out.feature_names_.clear();
  for (std::size_t j = 0; j < keep.size(); ++j) {
    int k = keep[j];
    if (k < 0 || k >= modality_count()) throw ValidationError("modality index out of range");
    out.modalities_.push_back(base.modalities_[k]);
    out.availability_.col(j) = base.availability_.col(k);
    if (!modality_names_.empty()) out.modality_names_.push_back(modality_names_[k]);
    if (!feature_names_.empty()) out.feature_names_.push_back(feature_names_[k]);
  }
  return out;
}

MultiModalDataset validate_dataset(RawDataset raw, Task task, std::optional<LabelCoding> coding) {
  const int m = static_cast<int>(raw.modalities.size());
  if (m < 1) throw ValidationError("dataset needs at least one modality");
  const auto n = raw.modalities.front().rows();
  for (int k = 0; k < m; ++k) {
    if (raw.modalities[k].rows() != n)
      throw ValidationError("sample count mismatch: modality " + std::to_string(k + 1) + " has " +
                            std::to_string(raw.modalities[k].rows()) + " rows, expected " +
                            std::to_string(n));
    if (raw.modalities[k].cols() < 1)
      throw ValidationError("empty modality " + std::to_string(k + 1));
  }
  if (n < 1) throw ValidationError("dataset has no samples");
  if (!raw.modality_names.empty() && static_cast<int>(raw.modality_names.size()) != m)
    throw ValidationError("modality name count does not match modality count");
  if (!raw.sample_ids.empty() && static_cast<Eigen::Index>(raw.sample_ids.size()) != n)
    throw ValidationError("sample id count does not match sample count");

  MultiModalDataset out;
  out.n_ = static_cast<int>(n);
  out.availability_ = Availability::Constant(n, m, true);
  if (!raw.availability.empty()) {
    if (static_cast<int>(raw.availability.size()) != m)
      throw ValidationError("availability must list every modality");
    for (int k = 0; k < m; ++k) {
      if (static_cast<Eigen::Index>(raw.availability[k].size()) != n)
        throw ValidationError("sample count mismatch in availability of modality " +
                              std::to_string(k + 1));
      for (Eigen::Index i = 0; i < n; ++i) {
        auto v = raw.availability[k][i];
        if (v > 1) throw ValidationError("availability entries must be 0 or 1");
        out.availability_(i, k) = v == 1;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (!out.availability_.row(i).any())
        throw ValidationError("sample " + std::to_string(i) + " has zero available modalities");
  }
  for (int k = 0; k < m; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      if (out.availability_(i, k) && !raw.modalities[k].row(i).allFinite())
        throw ValidationError("non-finite value in observed row " + std::to_string(i) +
                              " of modality " + std::to_string(k + 1));

  out.task_ = task;
  if (raw.labels.size() > 0) {
    if (raw.labels.size() != n)
      throw ValidationError("sample count mismatch: " + std::to_string(raw.labels.size()) +
                            " labels for " + std::to_string(n) + " samples");
    if (!raw.labels.allFinite()) throw ValidationError("labels contain non-finite values");
    if (task == Task::Classification) {
      if (!coding) {
        std::set<double> values(raw.labels.begin(), raw.labels.end());
        if (values.size() != 2)
          throw ValidationError("classification labels must take exactly two distinct values, got " +
                                std::to_string(values.size()));
        coding = LabelCoding{*values.begin(), *values.rbegin()};
      }
      out.labels_.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) out.labels_(i) = coding->encode(raw.labels(i));
    } else {
      out.labels_ = raw.labels;
    }
  }
  if (task == Task::Classification) out.coding_ = coding;

  out.modalities_ = std::move(raw.modalities);
  out.modality_names_ = std::move(raw.modality_names);
  out.feature_names_ = std::move(raw.feature_names);
  out.sample_ids_ = std::move(raw.sample_ids);
  if (out.modality_names_.empty())
    for (int k = 0; k < m; ++k) out.modality_names_.push_back("X" + std::to_string(k + 1));
  if (out.sample_ids_.empty())
    for (Eigen::Index i = 0; i < n; ++i) out.sample_ids_.push_back("s" + std::to_string(i + 1));
  return out;
}

void FitConfig::validate() const {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ValidationError("gamma must be nonnegative");
  if (!(mu > 0) || !std::isfinite(mu)) throw ValidationError("mu must be positive");
  if (!(epsilon > 0)) throw ValidationError("epsilon must be positive");
  if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
  if (outer_max_iter < 1) throw ValidationError("outer_max_iter must be at least 1");
  if (inner_max_iter < 1) throw ValidationError("inner_max_iter must be at least 1");
}

FeatureScaling FeatureScaling::identity(Eigen::Index p) {
  return {Vector::Zero(p), Vector::Ones(p)};
}

FeatureScaling FeatureScaling::fit(const MultiModalDataset& data, Scaling mode) {
  FeatureScaling s = identity(data.total_features());
  if (mode == Scaling::None) return s;
  Eigen::Index offset = 0;
  for (int k = 0; k < data.modality_count(); ++k) {
    const Matrix& X = data.modality(k);
    std::vector<int> rows;
    for (int i = 0; i < data.samples(); ++i)
      if (data.available(i, k)) rows.push_back(i);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double mean = 0;
      for (int i : rows) mean += X(i, j);
      mean /= static_cast<double>(rows.size());
      s.center(offset + j) = mean;
      if (mode == Scaling::Standardize && rows.size() > 1) {
        double ss = 0;
        for (int i : rows) ss += (X(i, j) - mean) * (X(i, j) - mean);
        double sd = std::sqrt(ss / static_cast<double>(rows.size() - 1));
        s.scale(offset + j) = sd > 1e-12 ? sd : 1.0;
      }
    }
    offset += X.cols();
  }
  return s;
}

Matrix FeatureScaling::apply(const Matrix& block, Eigen::Index column_offset) const {
  const auto c = center.segment(column_offset, block.cols()).transpose();
  const auto s = scale.segment(column_offset, block.cols()).transpose();
  return (block.rowwise() - c).array().rowwise() / s.array();
}

Matrix FeatureScaling::restore(const Matrix& block, Eigen::Index column_offset) const {
  const auto c = center.segment(column_offset, block.cols()).transpose();
  const auto s = scale.segment(column_offset, block.cols()).transpose();
  Matrix out = block.array().rowwise() * s.array();
  return out.rowwise() + c;
}

}  // namespace mmfl
