#pragma once

/**
 * Linear discriminant analysis.
 *
 * Training finds the projection maximizing between-class over within-class
 * scatter: the leading K-1 generalized eigenvectors of (S_B, S_w + shrink*I),
 * where shrink = lambda * tr(S_w) / F keeps the regularization scale-free.
 * Test samples are projected and scored by negative squared Mahalanobis
 * distance to each projected class mean under the pooled projected
 * within-class covariance.
 *
 * S_B has rank K-1, so instead of a dense F x F generalized eigensolve we
 * whiten with the Cholesky factor L of the regularized S_w and take the SVD
 * of the F x K matrix L^-1 M^T, where M holds the count-weighted centered
 * class means (S_B = M^T M). The resulting columns satisfy w^T S_w' w = 1.
 */

#include <algorithm>
#include <cmath>

#include "classifier.hpp"

namespace moveprim {

struct LdaOptions {
  double lambda = 1e-6;
};

class LdaModel final : public Classifier {
 public:
  explicit LdaModel(LdaOptions opts = {}) : opts_(opts) {}

  Algorithm algorithm() const override { return Algorithm::Lda; }
  Eigen::Index dimension() const override { return projection_.rows(); }

  void fit(SamplesPtr data) override { fit(data->x, data->y); }

  void fit(const RowMatrix& x, std::span<const int> y) {
    if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
    }
    const auto counts = class_counts(y);
    present_.fill(false);
    int classes = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      const auto n_k = counts[static_cast<std::size_t>(k)];
      if (n_k == 0) continue;
      if (n_k < 2) {
        throw Error(ErrorCode::TooFewSamples, "LDA needs at least 2 samples per present class");
      }
      present_[static_cast<std::size_t>(k)] = true;
      ++classes;
    }
    if (classes < 2) throw Error(ErrorCode::MissingClass, "LDA needs at least 2 classes");

    const Eigen::Index n = x.rows();
    const Eigen::Index F = x.cols();

    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(kNumClasses, F);
    for (Eigen::Index r = 0; r < n; ++r) means.row(y[static_cast<std::size_t>(r)]) += x.row(r);
    for (int k = 0; k < kNumClasses; ++k) {
      if (present_[static_cast<std::size_t>(k)]) {
        means.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
      }
    }
    const Eigen::RowVectorXd grand = x.colwise().mean();

    RowMatrix centered = x;
    for (Eigen::Index r = 0; r < n; ++r) centered.row(r) -= means.row(y[static_cast<std::size_t>(r)]);
    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(F, F);
    within.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    within.triangularView<Eigen::StrictlyUpper>() = within.transpose();
    centered = RowMatrix();

    const double trace = within.trace();
    if (!(trace > 0.0)) {
      throw Error(ErrorCode::DegenerateScatter, "within-class scatter vanishes");
    }

    Eigen::MatrixXd between_factor(F, classes);  // M^T
    {
      int c = 0;
      for (int k = 0; k < kNumClasses; ++k) {
        if (!present_[static_cast<std::size_t>(k)]) continue;
        between_factor.col(c++) =
            std::sqrt(static_cast<double>(counts[static_cast<std::size_t>(k)])) *
            (means.row(k) - grand).transpose();
      }
    }

    shrinkage_ = opts_.lambda * trace / static_cast<double>(F);
    Eigen::MatrixXd regularized = within;
    regularized.diagonal().array() += shrinkage_;
    Eigen::LLT<Eigen::MatrixXd> chol(regularized);
    if (chol.info() != Eigen::Success) {
      throw Error(ErrorCode::DegenerateScatter, "regularized within-class scatter not positive definite");
    }
    const Eigen::MatrixXd whitened = chol.matrixL().solve(between_factor);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(whitened, Eigen::ComputeThinU);
    // At most K-1 discriminant directions, and never more than the feature count.
    const Eigen::Index dims = std::min<Eigen::Index>(classes - 1, F);
    const auto& sv = svd.singularValues();
    if (!(sv[0] > 1e-12 * std::sqrt(trace))) {
      throw Error(ErrorCode::DegenerateScatter, "class means do not separate");
    }
    eigenvalues_ = sv.head(dims).array().square();
    projection_ = chol.matrixU().solve(svd.matrixU().leftCols(dims));

    // Fix the sign of each direction (largest-magnitude entry positive).
    for (Eigen::Index c = 0; c < dims; ++c) {
      Eigen::Index arg;
      projection_.col(c).cwiseAbs().maxCoeff(&arg);
      if (projection_(arg, c) < 0.0) projection_.col(c) *= -1.0;
    }

    projected_means_ = Eigen::MatrixXd::Zero(kNumClasses, dims);
    for (int k = 0; k < kNumClasses; ++k) {
      if (present_[static_cast<std::size_t>(k)]) {
        projected_means_.row(k) = means.row(k) * projection_;
      }
    }
    covariance_ = projection_.transpose() * within * projection_ /
                  static_cast<double>(n - classes);
    covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> cov_chol(covariance_);
    if (cov_chol.info() != Eigen::Success) {
      throw Error(ErrorCode::DegenerateScatter, "projected covariance not positive definite");
    }
    precision_ = cov_chol.solve(Eigen::MatrixXd::Identity(dims, dims));
    precision_ = 0.5 * (precision_ + precision_.transpose()).eval();

    priors_.fill(0.0);
    for (int k = 0; k < kNumClasses; ++k) {
      priors_[static_cast<std::size_t>(k)] =
          static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(n);
    }
  }

  ClassScores score(std::span<const double> x) const override {
    check_dimension(x);
    const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::RowVectorXd z = row * projection_;
    return score_projected(z);
  }

  void predict_batch(const RowMatrix& x, std::vector<int>& labels,
                     ScoreMatrix& scores) const override {
    if (x.cols() != dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "feature count differs from the fitted model");
    }
    const Eigen::MatrixXd z = x * projection_;
    labels.resize(static_cast<std::size_t>(x.rows()));
    scores.resize(x.rows(), kNumClasses);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto s = score_projected(z.row(r));
      for (int k = 0; k < kNumClasses; ++k) scores(r, k) = s[static_cast<std::size_t>(k)];
      labels[static_cast<std::size_t>(r)] = argmax(s);
    }
  }

  Eigen::RowVectorXd project(std::span<const double> x) const {
    check_dimension(x);
    return Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) *
           projection_;
  }

  const Eigen::MatrixXd& projection() const { return projection_; }
  const Eigen::MatrixXd& projected_means() const { return projected_means_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const std::array<double, kNumClasses>& priors() const { return priors_; }
  bool has_class(int k) const { return present_[static_cast<std::size_t>(k)]; }
  double shrinkage() const { return shrinkage_; }
  double lambda() const { return opts_.lambda; }

  nlohmann::json to_json() const override {
    return {{"algorithm", "lda"},
            {"lambda", opts_.lambda},
            {"shrinkage", shrinkage_},
            {"present", present_},
            {"priors", priors_},
            {"projection", detail::to_json(projection_)},
            {"projected_means", detail::to_json(projected_means_)},
            {"covariance", detail::to_json(covariance_)},
            {"precision", detail::to_json(precision_)},
            {"eigenvalues", detail::to_json(eigenvalues_)}};
  }

  static LdaModel from_json(const nlohmann::json& j) {
    LdaModel m(LdaOptions{j.at("lambda").get<double>()});
    m.shrinkage_ = j.at("shrinkage").get<double>();
    m.present_ = j.at("present").get<std::array<bool, kNumClasses>>();
    m.priors_ = j.at("priors").get<std::array<double, kNumClasses>>();
    m.projection_ = detail::matrix_from_json(j.at("projection"));
    m.projected_means_ = detail::matrix_from_json(j.at("projected_means"));
    m.covariance_ = detail::matrix_from_json(j.at("covariance"));
    m.precision_ = detail::matrix_from_json(j.at("precision"));
    m.eigenvalues_ = detail::vector_from_json(j.at("eigenvalues"));
    return m;
  }

 private:
  template <typename Row>
  ClassScores score_projected(const Row& z) const {
    ClassScores s;
    for (int k = 0; k < kNumClasses; ++k) {
      if (!present_[static_cast<std::size_t>(k)]) {
        s[static_cast<std::size_t>(k)] = kAbsentClassScore;
        continue;
      }
      const Eigen::RowVectorXd d = z - projected_means_.row(k);
      s[static_cast<std::size_t>(k)] = -(d * precision_ * d.transpose())(0, 0);
    }
    return s;
  }

  LdaOptions opts_;
  double shrinkage_ = 0.0;
  std::array<bool, kNumClasses> present_{};
  std::array<double, kNumClasses> priors_{};
  Eigen::MatrixXd projection_;       // F x (K-1)
  Eigen::MatrixXd projected_means_;  // kNumClasses x (K-1)
  Eigen::MatrixXd covariance_;       // pooled projected within-class covariance
  Eigen::MatrixXd precision_;
  Eigen::VectorXd eigenvalues_;
};

}  // namespace moveprim
