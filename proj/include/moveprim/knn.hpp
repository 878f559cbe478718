#pragma once

// Brute-force k-nearest neighbors (Euclidean). There is no training phase:
// fit only keeps a shared handle on the training rows.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "classifier.hpp"

namespace moveprim {

struct KnnOptions {
  int k = 5;
};

struct Neighbor {
  double dist2 = 0.0;
  Eigen::Index index = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

struct KnnResult {
  int label = 0;
  ClassScores scores{};
};

class KnnModel final : public Classifier {
 public:
  explicit KnnModel(KnnOptions opts = {}) : opts_(opts) {}

  Algorithm algorithm() const override { return Algorithm::Knn; }
  Eigen::Index dimension() const override { return data_ ? data_->x.cols() : 0; }

  void fit(SamplesPtr data) override {
    if (!data || data->x.rows() == 0) throw Error(ErrorCode::EmptyModel, "KNN has no training rows");
    if (opts_.k < 1 || opts_.k > data->x.rows()) {
      throw Error(ErrorCode::InvalidArgument, "KNN needs 1 <= k <= number of training rows");
    }
    data_ = std::move(data);
  }

  int k() const { return opts_.k; }

  /// The k nearest training rows, ordered by (distance, index).
  std::vector<Neighbor> neighbors(std::span<const double> x) const {
    require_fitted();
    check_dimension(x);
    const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
    std::vector<Neighbor> all(static_cast<std::size_t>(data_->x.rows()));
    for (Eigen::Index r = 0; r < data_->x.rows(); ++r) {
      all[static_cast<std::size_t>(r)] = {(data_->x.row(r) - row).squaredNorm(), r};
    }
    const auto k = static_cast<std::size_t>(opts_.k);
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    all.resize(k);
    return all;
  }

  KnnResult classify(std::span<const double> x) const { return vote(neighbors(x)); }

  ClassScores score(std::span<const double> x) const override { return classify(x).scores; }
  int predict(std::span<const double> x) const override { return classify(x).label; }

  /// Distances come from one matrix product per block of queries; the
  /// candidates near the k-th distance are then re-ranked with exactly
  /// computed distances, so results match the one-at-a-time scan.
  void predict_batch(const RowMatrix& x, std::vector<int>& labels,
                     ScoreMatrix& scores) const override {
    require_fitted();
    if (x.cols() != dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "feature count differs from the fitted model");
    }
    const RowMatrix& train = data_->x;
    const Eigen::VectorXd train_norms = train.rowwise().squaredNorm();
    const double max_train_norm = train_norms.size() ? train_norms.maxCoeff() : 0.0;
    labels.resize(static_cast<std::size_t>(x.rows()));
    scores.resize(x.rows(), kNumClasses);

    const Eigen::Index block = 128;
    const auto k = static_cast<std::size_t>(opts_.k);
    std::vector<double> approx(static_cast<std::size_t>(train.rows()));
    std::vector<Neighbor> candidates;
    for (Eigen::Index b0 = 0; b0 < x.rows(); b0 += block) {
      const Eigen::Index rows = std::min(block, x.rows() - b0);
      const Eigen::MatrixXd dots = x.middleRows(b0, rows) * train.transpose();
      for (Eigen::Index q = 0; q < rows; ++q) {
        const Eigen::Index r = b0 + q;
        const double qn = x.row(r).squaredNorm();
        for (Eigen::Index t = 0; t < train.rows(); ++t) {
          approx[static_cast<std::size_t>(t)] = qn + train_norms[t] - 2.0 * dots(q, t);
        }
        std::vector<double> sorted = approx;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
        const double kth = sorted[k - 1];
        const double slack = 1e-9 * (qn + max_train_norm) + 1e-12;
        candidates.clear();
        for (Eigen::Index t = 0; t < train.rows(); ++t) {
          if (approx[static_cast<std::size_t>(t)] <= kth + slack) {
            candidates.push_back({(train.row(t) - x.row(r)).squaredNorm(), t});
          }
        }
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                          candidates.end());
        candidates.resize(k);
        const auto res = vote(candidates);
        labels[static_cast<std::size_t>(r)] = res.label;
        for (int c = 0; c < kNumClasses; ++c) scores(r, c) = res.scores[static_cast<std::size_t>(c)];
      }
    }
  }

  /// Majority vote; ties go to the tied class with the smaller summed
  /// distance, then to the lowest class code.
  KnnResult vote(const std::vector<Neighbor>& nn) const {
    std::array<int, kNumClasses> votes{};
    std::array<double, kNumClasses> dist_sum{};
    for (const auto& n : nn) {
      const int c = data_->y[static_cast<std::size_t>(n.index)];
      ++votes[static_cast<std::size_t>(c)];
      dist_sum[static_cast<std::size_t>(c)] += std::sqrt(n.dist2);
    }
    KnnResult res;
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      const auto bu = static_cast<std::size_t>(best);
      if (votes[cu] > votes[bu] || (votes[cu] == votes[bu] && dist_sum[cu] < dist_sum[bu])) best = c;
    }
    res.label = best;
    for (int c = 0; c < kNumClasses; ++c) {
      res.scores[static_cast<std::size_t>(c)] =
          static_cast<double>(votes[static_cast<std::size_t>(c)]) / static_cast<double>(nn.size());
    }
    return res;
  }

  const SamplesPtr& data() const { return data_; }

  nlohmann::json to_json() const override {
    nlohmann::json j = {{"algorithm", "knn"}, {"k", opts_.k}, {"metric", "euclidean"}};
    if (data_) {
      j["x"] = detail::to_json(Eigen::MatrixXd(data_->x));
      j["y"] = data_->y;
    }
    return j;
  }

  static KnnModel from_json(const nlohmann::json& j) {
    KnnModel m(KnnOptions{j.at("k").get<int>()});
    if (j.contains("x")) {
      auto samples = std::make_shared<LabeledSamples>();
      samples->x = detail::matrix_from_json(j.at("x"));
      samples->y = j.at("y").get<std::vector<int>>();
      m.fit(std::move(samples));
    }
    return m;
  }

 private:
  void require_fitted() const {
    if (!data_) throw Error(ErrorCode::EmptyModel, "KNN model has not been fitted");
  }

  KnnOptions opts_;
  SamplesPtr data_;
};

}  // namespace moveprim
