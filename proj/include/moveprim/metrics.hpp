#pragma once

// Confusion accounting, PPV, one-vs-all sensitivity/specificity and ROC.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "core_types.hpp"

namespace moveprim {

/// Rows are true classes, columns predicted classes.
struct Confusion {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  void add(int truth, int predicted) {
    if (truth < 0 || truth >= kNumClasses || predicted < 0 || predicted >= kNumClasses) {
      throw Error(ErrorCode::InvalidArgument, "class code out of range");
    }
    ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
  }

  std::size_t at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return n;
  }

  std::size_t trace() const {
    std::size_t n = 0;
    for (int k = 0; k < kNumClasses; ++k) n += at(k, k);
    return n;
  }

  std::size_t predicted_as(int k) const {
    std::size_t n = 0;
    for (int j = 0; j < kNumClasses; ++j) n += at(j, k);
    return n;
  }

  std::size_t truly(int k) const {
    std::size_t n = 0;
    for (int j = 0; j < kNumClasses; ++j) n += at(k, j);
    return n;
  }

  Confusion& operator+=(const Confusion& o) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (std::size_t j = 0; j < counts[i].size(); ++j) counts[i][j] += o.counts[i][j];
    }
    return *this;
  }

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// TP / (TP + FP) for class k; empty when nothing was predicted as k.
inline std::optional<double> ppv(const Confusion& c, int k) {
  const std::size_t predicted = c.predicted_as(k);
  if (predicted == 0) return std::nullopt;
  return static_cast<double>(c.at(k, k)) / static_cast<double>(predicted);
}

/// All true positives over all predictions (trace / total).
inline std::optional<double> overall_ppv(const Confusion& c) {
  const std::size_t total = c.total();
  if (total == 0) return std::nullopt;
  return static_cast<double>(c.trace()) / static_cast<double>(total);
}

struct SensitivitySpecificity {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// One-vs-all sensitivity TP/(TP+FN) and specificity TN/(TN+FP).
inline SensitivitySpecificity sensitivity_specificity(const Confusion& c, int k) {
  const std::size_t positives = c.truly(k);
  if (positives == 0) throw Error(ErrorCode::ClassAbsent, "class absent from ground truth");
  const std::size_t tp = c.at(k, k);
  const std::size_t fp = c.predicted_as(k) - tp;
  const std::size_t negatives = c.total() - positives;
  SensitivitySpecificity out;
  out.sensitivity = static_cast<double>(tp) / static_cast<double>(positives);
  out.specificity =
      negatives ? static_cast<double>(negatives - fp) / static_cast<double>(negatives) : 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// ROC

/// One-vs-rest margin of class k: its score minus the best competing score.
/// Raw scores (log-likelihoods, Mahalanobis distances) are not comparable
/// across samples; the margin ranks samples by how strongly k wins.
inline double ovr_margin(const ClassScores& s, int k) {
  double rival = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < kNumClasses; ++j) {
    if (j != k) rival = std::max(rival, s[static_cast<std::size_t>(j)]);
  }
  return s[static_cast<std::size_t>(k)] - rival;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predict positive when score >= threshold

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  std::size_t operating_point = 0;  // index into points

  const RocPoint& optimal() const { return points.at(operating_point); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

inline double trapezoid_auc(std::span<const RocPoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) * 0.5;
  }
  return area;
}

/// Point nearest to (fpr=0, tpr=1); ties go to the higher tpr, then the
/// earlier point.
inline std::size_t operating_point(std::span<const RocPoint> pts) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::hypot(pts[i].fpr, 1.0 - pts[i].tpr);
    if (d < best_d || (d == best_d && pts[i].tpr > pts[best].tpr)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

/// Sweep thresholds over the distinct scores in descending order. Equal
/// scores form a single step. The curve starts at (0,0) with threshold +inf.
inline RocCurve roc_curve(std::span<const bool> positive, std::span<const double> scores) {
  if (positive.size() != scores.size()) {
    throw Error(ErrorCode::DimensionMismatch, "label and score counts differ");
  }
  std::size_t P = 0;
  for (bool p : positive) P += p ? 1 : 0;
  const std::size_t N = positive.size() - P;
  if (P == 0 || N == 0) {
    throw Error(ErrorCode::OneClassOnly, "ROC needs both positives and negatives");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorCode::InvalidArgument, "NaN score");
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (positive[order[i]]) {
        ++tp;
      } else {
        ++fp;
      }
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(N),
                            static_cast<double>(tp) / static_cast<double>(P), s});
  }
  curve.auc = trapezoid_auc(curve.points);
  curve.operating_point = operating_point(curve.points);
  return curve;
}

/// Convenience overload for std::vector<bool>, which has no contiguous storage.
inline RocCurve roc_curve(const std::vector<bool>& positive, std::span<const double> scores) {
  const auto flags = std::make_unique<bool[]>(positive.size());
  std::copy(positive.begin(), positive.end(), flags.get());
  return roc_curve(std::span<const bool>(flags.get(), positive.size()), scores);
}

}  // namespace moveprim
