#pragma once

// Reference computations used only by tests. Each one takes the direct,
// slow route so it stays independent of the library code it checks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// k nearest rows by exhaustive scan, ties by lower index.
inline std::vector<std::pair<double, int>> nearest(const std::vector<std::vector<double>>& train,
                                                   const std::vector<double>& q, int k) {
  std::vector<std::pair<double, int>> all;
  for (int i = 0; i < static_cast<int>(train.size()); ++i) {
    double d = 0.0;
    for (std::size_t f = 0; f < q.size(); ++f) {
      const double diff = train[static_cast<std::size_t>(i)][f] - q[f];
      d += diff * diff;
    }
    all.emplace_back(d, i);
  }
  std::sort(all.begin(), all.end());
  all.resize(static_cast<std::size_t>(k));
  return all;
}

inline int knn_label(const std::vector<std::vector<double>>& train, const std::vector<int>& y,
                     const std::vector<double>& q, int k) {
  const auto nn = nearest(train, q, k);
  std::vector<int> votes(4, 0);
  std::vector<double> dist(4, 0.0);
  for (const auto& [d, i] : nn) {
    ++votes[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
    dist[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += std::sqrt(d);
  }
  int best = 0;
  for (int c = 1; c < 4; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const auto bu = static_cast<std::size_t>(best);
    if (votes[cu] > votes[bu] || (votes[cu] == votes[bu] && dist[cu] < dist[bu])) best = c;
  }
  return best;
}

inline double gaussian_log_density(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - (x - mean) * (x - mean) / (2.0 * var);
}

/// Two-class Fisher direction S_w^-1 (mu1 - mu0).
inline Eigen::VectorXd fisher_direction(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  const auto F = x.cols();
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(F), mu1 = Eigen::VectorXd::Zero(F);
  int n0 = 0, n1 = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (y[static_cast<std::size_t>(r)] == 0) { mu0 += x.row(r).transpose(); ++n0; }
    else { mu1 += x.row(r).transpose(); ++n1; }
  }
  mu0 /= n0;
  mu1 /= n1;
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(F, F);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd d = x.row(r).transpose() - (y[static_cast<std::size_t>(r)] == 0 ? mu0 : mu1);
    sw += d * d.transpose();
  }
  return sw.inverse() * (mu1 - mu0);
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly,
/// ties counting one half.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) {
      if (p > n) wins += 1.0;
      else if (p == n) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Largest-remainder apportionment of `total` over integer weights.
inline std::vector<long> apportion(const std::vector<long>& weights, long total) {
  long sum = 0;
  for (long w : weights) sum += w;
  std::vector<long> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rema;
  long assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(weights[i]) * static_cast<double>(total) / static_cast<double>(sum);
    out[i] = static_cast<long>(std::floor(exact));
    assigned += out[i];
    rema.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::sort(rema.begin(), rema.end());
  for (long r = 0; r < total - assigned; ++r) ++out[rema[static_cast<std::size_t>(r)].second];
  return out;
}

}  // namespace oracle
