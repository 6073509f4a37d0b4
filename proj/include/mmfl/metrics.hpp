#pragma once

#include "mmfl/types.hpp"

#include <vector>

namespace mmfl {

// Labels are positive when > 0, so both {0,1} and {-1,+1} codings work.

// Trapezoidal area under the ROC curve. Tied scores contribute one half.
double roc_auc(const Vector& scores, const Vector& labels);

struct YoudenResult {
  double threshold = 0.0;
  double j = 0.0;  // sensitivity + specificity - 1 at the threshold
};

// Scans midpoints between consecutive distinct scores (predict positive when
// score >= t) and keeps the smallest threshold with maximal J.
YoudenResult youden_threshold(const Vector& scores, const Vector& labels);

double accuracy_at(const Vector& scores, const Vector& labels, double threshold);

struct RocPoint {
  double threshold;
  double false_positive_rate;
  double true_positive_rate;
};

std::vector<RocPoint> roc_points(const Vector& scores, const Vector& labels);

double rmse(const Vector& predicted, const Vector& truth);

}  // namespace mmfl
