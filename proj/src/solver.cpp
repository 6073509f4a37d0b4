#include "mmfl/solver.hpp"

#include "mmfl/algebra.hpp"
#include "mmfl/classification.hpp"
#include "mmfl/incomplete.hpp"
#include "mmfl/regression.hpp"

#include <map>

namespace mmfl {

FissionModel fit(const MultiModalDataset& data, const StructureSpec& spec, const FitConfig& config,
                 const StepObserver& observer) {
  if (!data.complete()) return fit_incomplete(data, spec, config, observer);
  if (config.task == Task::Classification) return fit_classification(data, spec, config, observer);
  return fit_regression(data, spec, config, observer);
}

Matrix project(const FissionModel& model, const MultiModalDataset& data) {
  const auto dims = data.feature_dims();
  if (dims.size() != model.feature_dims.size())
    throw ValidationError("model expects " + std::to_string(model.feature_dims.size()) +
                          " modalities, data has " + std::to_string(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (dims[k] != model.feature_dims[k]) {
      const std::string name = k < model.modality_names.size() ? model.modality_names[k]
                                                               : "X" + std::to_string(k + 1);
      throw ValidationError("modality " + name + " has " + std::to_string(dims[k]) +
                            " features, model expects " + std::to_string(model.feature_dims[k]));
    }

  std::vector<Matrix> scaled;
  for (int k = 0; k < data.modality_count(); ++k)
    scaled.push_back(model.scaling.apply(data.modality(k), model.mask.row_offsets()[k]));

  std::map<std::vector<int>, std::vector<int>> groups;
  for (int i = 0; i < data.samples(); ++i) groups[data.observed_modalities(i)].push_back(i);

  const auto V_blocks = split_loadings(model.V, model.mask);
  Matrix latent(data.samples(), model.V.cols());
  for (const auto& [observed, rows] : groups) {
    Eigen::Index width = 0;
    for (int k : observed) width += V_blocks[k].rows();
    Matrix Xo(rows.size(), width);
    Matrix Vo(width, model.V.cols());
    Eigen::Index offset = 0;
    for (int k : observed) {
      for (std::size_t a = 0; a < rows.size(); ++a)
        Xo.row(a).segment(offset, V_blocks[k].rows()) = scaled[k].row(rows[a]);
      Vo.middleRows(offset, V_blocks[k].rows()) = V_blocks[k];
      offset += V_blocks[k].rows();
    }
    const Matrix Uo = project_rows(Xo, Vo, model.beta, model.config.lambda);
    for (std::size_t a = 0; a < rows.size(); ++a) latent.row(rows[a]) = Uo.row(a);
  }
  return latent;
}

Vector predict(const FissionModel& model, const MultiModalDataset& data) {
  const Matrix latent = project(model, data);
  Vector scores = latent * model.beta;
  scores.array() += model.intercept + model.response_offset;
  return scores;
}

Vector predict_labels(const FissionModel& model, const Vector& scores) {
  if (!model.label_coding) throw ValidationError("model has no class labels");
  Vector out(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    out(i) = scores(i) >= model.threshold ? model.label_coding->positive : model.label_coding->negative;
  return out;
}

}  // namespace mmfl
