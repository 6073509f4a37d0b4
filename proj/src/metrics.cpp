#include "mmfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmfl {
namespace {

struct ClassCounts {
  double positives = 0;
  double negatives = 0;
};

ClassCounts count_classes(const Vector& scores, const Vector& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("scores and labels differ in length");
  ClassCounts c;
  for (Eigen::Index i = 0; i < labels.size(); ++i) (labels(i) > 0 ? c.positives : c.negatives) += 1;
  if (c.positives == 0 || c.negatives == 0)
    throw ValidationError("both classes must be present");
  return c;
}

std::vector<Eigen::Index> order_descending(const Vector& scores) {
  std::vector<Eigen::Index> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  return order;
}

}  // namespace

std::vector<RocPoint> roc_points(const Vector& scores, const Vector& labels) {
  const ClassCounts c = count_classes(scores, labels);
  const auto order = order_descending(scores);
  std::vector<RocPoint> points{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores(order[i]);
    while (i < order.size() && scores(order[i]) == s) {
      (labels(order[i]) > 0 ? tp : fp) += 1;
      ++i;
    }
    points.push_back({s, fp / c.negatives, tp / c.positives});
  }
  return points;
}

double roc_auc(const Vector& scores, const Vector& labels) {
  const auto points = roc_points(scores, labels);
  double area = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].false_positive_rate - points[i - 1].false_positive_rate) *
            (points[i].true_positive_rate + points[i - 1].true_positive_rate) / 2.0;
  return area;
}

YoudenResult youden_threshold(const Vector& scores, const Vector& labels) {
  const ClassCounts c = count_classes(scores, labels);
  std::vector<Eigen::Index> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });

  // Walking upward, everything at or below the current distinct score is predicted negative.
  double tp = c.positives, fp = c.negatives;
  YoudenResult best{scores(order.front()), 0.0};
  bool found = false;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores(order[i]);
    while (i < order.size() && scores(order[i]) == s) {
      (labels(order[i]) > 0 ? tp : fp) -= 1;
      ++i;
    }
    if (i == order.size()) break;
    const double t = s + (scores(order[i]) - s) / 2.0;
    const double j = tp / c.positives - fp / c.negatives;
    if (!found || j > best.j) {
      best = {t, j};
      found = true;
    }
  }
  return best;
}

double accuracy_at(const Vector& scores, const Vector& labels, double threshold) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  if (scores.size() == 0) return 0.0;
  double hits = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    hits += (scores(i) >= threshold) == (labels(i) > 0) ? 1.0 : 0.0;
  return hits / static_cast<double>(scores.size());
}

double rmse(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size() || truth.size() == 0)
    throw ValidationError("rmse needs two nonempty vectors of equal length");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
}

}  // namespace mmfl
