#pragma once

// Gaussian naive Bayes: empirical class priors, one independent normal per
// feature and class. Scores are unnormalized log posteriors.

#include <cmath>
#include <numbers>

#include "classifier.hpp"

namespace moveprim {

inline constexpr double kNbcVarianceFloor = 1e-9;

class NbcModel final : public Classifier {
 public:
  Algorithm algorithm() const override { return Algorithm::Nbc; }
  Eigen::Index dimension() const override { return means_.cols(); }

  void fit(SamplesPtr data) override { fit(data->x, data->y); }

  void fit(const RowMatrix& x, std::span<const int> y) {
    if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
    }
    const auto counts = class_counts(y);
    int classes = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      const auto n_k = counts[static_cast<std::size_t>(k)];
      if (n_k == 0) continue;
      if (n_k < 2) {
        throw Error(ErrorCode::TooFewSamples, "naive Bayes needs at least 2 samples per present class");
      }
      ++classes;
    }
    if (classes < 2) throw Error(ErrorCode::MissingClass, "naive Bayes needs at least 2 classes");

    const Eigen::Index F = x.cols();
    means_ = Eigen::MatrixXd::Zero(kNumClasses, F);
    variances_ = Eigen::MatrixXd::Zero(kNumClasses, F);
    for (Eigen::Index r = 0; r < x.rows(); ++r) means_.row(y[static_cast<std::size_t>(r)]) += x.row(r);
    for (int k = 0; k < kNumClasses; ++k) {
      if (counts[static_cast<std::size_t>(k)]) {
        means_.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
      }
    }
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const int k = y[static_cast<std::size_t>(r)];
      variances_.row(k) += (x.row(r) - means_.row(k)).array().square().matrix();
    }
    for (int k = 0; k < kNumClasses; ++k) {
      const auto n_k = counts[static_cast<std::size_t>(k)];
      priors_[static_cast<std::size_t>(k)] =
          static_cast<double>(n_k) / static_cast<double>(x.rows());
      if (n_k) {
        variances_.row(k) /= static_cast<double>(n_k - 1);
      }
      variances_.row(k) = variances_.row(k).cwiseMax(kNbcVarianceFloor);
    }
    prepare();
  }

  ClassScores score(std::span<const double> x) const override {
    check_dimension(x);
    const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
    ClassScores s;
    for (int k = 0; k < kNumClasses; ++k) {
      if (priors_[static_cast<std::size_t>(k)] == 0.0) {
        s[static_cast<std::size_t>(k)] = kAbsentClassScore;
        continue;
      }
      const double quad =
          ((row - means_.row(k)).array().square() * half_precision_.row(k).array()).sum();
      s[static_cast<std::size_t>(k)] = log_norm_[static_cast<std::size_t>(k)] - quad;
    }
    return s;
  }

  const std::array<double, kNumClasses>& priors() const { return priors_; }
  const Eigen::MatrixXd& means() const { return means_; }
  const Eigen::MatrixXd& variances() const { return variances_; }

  nlohmann::json to_json() const override {
    return {{"algorithm", "nbc"},
            {"priors", priors_},
            {"means", detail::to_json(means_)},
            {"variances", detail::to_json(variances_)}};
  }

  static NbcModel from_json(const nlohmann::json& j) {
    NbcModel m;
    m.priors_ = j.at("priors").get<std::array<double, kNumClasses>>();
    m.means_ = detail::matrix_from_json(j.at("means"));
    m.variances_ = detail::matrix_from_json(j.at("variances"));
    m.prepare();
    return m;
  }

 private:
  // log p(C_k) - 1/2 sum_i log(2 pi var_ki), and 1/(2 var_ki).
  void prepare() {
    half_precision_ = (2.0 * variances_.array()).inverse().matrix();
    for (int k = 0; k < kNumClasses; ++k) {
      const double prior = priors_[static_cast<std::size_t>(k)];
      log_norm_[static_cast<std::size_t>(k)] =
          prior > 0.0 ? std::log(prior) -
                            0.5 * (2.0 * std::numbers::pi * variances_.row(k).array()).log().sum()
                      : kAbsentClassScore;
    }
  }

  std::array<double, kNumClasses> priors_{};
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  Eigen::MatrixXd half_precision_;
  std::array<double, kNumClasses> log_norm_{};
};

}  // namespace moveprim
