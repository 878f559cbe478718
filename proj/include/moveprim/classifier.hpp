#pragma once

// Common fit/score/predict interface shared by the four classifiers.

#include <nlohmann/json.hpp>

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core_types.hpp"

namespace moveprim {

enum class Algorithm : std::uint8_t { Lda, Nbc, Svm, Knn };

inline constexpr std::array<Algorithm, 4> kAllAlgorithms = {Algorithm::Lda, Algorithm::Nbc,
                                                            Algorithm::Svm, Algorithm::Knn};

constexpr std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Lda: return "lda";
    case Algorithm::Nbc: return "nbc";
    case Algorithm::Svm: return "svm";
    case Algorithm::Knn: return "knn";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (auto a : kAllAlgorithms) {
    if (algorithm_name(a) == name) return a;
  }
  return std::nullopt;
}

/// Training rows and their class codes (0..kNumClasses-1).
struct LabeledSamples {
  RowMatrix x;
  std::vector<int> y;
};

using SamplesPtr = std::shared_ptr<const LabeledSamples>;

using ScoreMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumClasses, Eigen::RowMajor>;

inline constexpr double kAbsentClassScore = -std::numeric_limits<double>::infinity();

/// Index of the largest score; ties resolve to the lowest class code.
inline int argmax(const ClassScores& s) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k) {
    if (s[static_cast<std::size_t>(k)] > s[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

inline std::array<std::size_t, kNumClasses> class_counts(std::span<const int> y) {
  std::array<std::size_t, kNumClasses> counts{};
  for (int c : y) {
    if (c < 0 || c >= kNumClasses) {
      throw Error(ErrorCode::InvalidArgument, "class code out of range: " + std::to_string(c));
    }
    ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

inline void check_samples(const LabeledSamples& data) {
  if (static_cast<Eigen::Index>(data.y.size()) != data.x.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
  }
}

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Algorithm algorithm() const = 0;
  virtual void fit(SamplesPtr data) = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual ClassScores score(std::span<const double> x) const = 0;

  virtual int predict(std::span<const double> x) const { return argmax(score(x)); }

  /// Scores and predictions for every row of `x`.
  virtual void predict_batch(const RowMatrix& x, std::vector<int>& labels,
                             ScoreMatrix& scores) const {
    labels.resize(static_cast<std::size_t>(x.rows()));
    scores.resize(x.rows(), kNumClasses);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto s = score(std::span<const double>(x.row(r).data(), static_cast<std::size_t>(x.cols())));
      for (int k = 0; k < kNumClasses; ++k) scores(r, k) = s[static_cast<std::size_t>(k)];
      labels[static_cast<std::size_t>(r)] = argmax(s);
    }
  }

  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_dimension(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(dimension()) +
                                                    " features, got " + std::to_string(x.size()));
    }
  }
};

namespace detail {

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

}  // namespace moveprim
