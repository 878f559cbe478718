#pragma once

/**
 * Soft-margin linear support vector machines trained with sequential minimal
 * optimization on the dual problem
 *
 *   min_a  1/2 a^T Q a - e^T a    s.t.  y^T a = 0,  0 <= a_i <= C,
 *
 * with Q_ij = y_i y_j <x_i, x_j>. Working pairs are chosen by the maximal
 * violating pair for the first index and second-order gain for the second;
 * the full gradient is kept up to date after every pair step, which needs two
 * kernel columns per step (served from an LRU cache). Training stops when the
 * KKT gap m(a) - M(a) drops below `tol`.
 *
 * The multi-class model is one-versus-all: machine k separates class k (+1)
 * from the rest (-1), and the score of class k is its decision value.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <memory>
#include <unordered_map>

#include "classifier.hpp"

namespace moveprim {

struct SvmOptions {
  double c = 1.0;
  double tol = 1e-3;
  /// Pair-update cap; 0 selects max(10^7, 100 n).
  std::int64_t max_iterations = 0;
  std::size_t cache_bytes = std::size_t{256} << 20;
  /// Kernel K(x, z) = <x, z> / scale^2; 0 selects sqrt(feature count), which
  /// keeps K(x, x) near 1 for standardized features.
  double kernel_scale = 0.0;
  /// Precompute the whole Gram matrix when it needs at most this many bytes.
  std::size_t gram_bytes = std::size_t{2} << 30;
  /// Drop bound variables that cannot re-enter the working set from the
  /// selection scans; they are checked again before declaring convergence.
  bool shrinking = true;
};

struct BinarySvm {
  Eigen::VectorXd w;
  double b = 0.0;
  Eigen::VectorXd alpha;
  double c = 1.0;
  double tol = 1e-3;
  std::int64_t iterations = 0;
  bool converged = false;

  double decision(std::span<const double> x) const {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())).dot(w) + b;
  }

  nlohmann::json to_json() const {
    return {{"w", detail::to_json(w)},   {"b", b},     {"alpha", detail::to_json(alpha)},
            {"c", c},                    {"tol", tol}, {"iterations", iterations},
            {"converged", converged}};
  }

  static BinarySvm from_json(const nlohmann::json& j) {
    BinarySvm m;
    m.w = detail::vector_from_json(j.at("w"));
    m.b = j.at("b").get<double>();
    m.alpha = detail::vector_from_json(j.at("alpha"));
    m.c = j.at("c").get<double>();
    m.tol = j.at("tol").get<double>();
    m.iterations = j.at("iterations").get<std::int64_t>();
    m.converged = j.at("converged").get<bool>();
    return m;
  }
};

namespace detail {

/// Linear-kernel columns K(:, i) = X x_i. When the full Gram matrix fits in
/// `gram_bytes` it is computed once (one symmetric rank-k update) and shared;
/// otherwise columns are computed on demand and kept in an LRU cache.
class KernelColumns {
 public:
  KernelColumns(const RowMatrix& x, const SvmOptions& opts)
      : x_(x),
        inv_scale2_(1.0 / (resolve_scale(opts, x.cols()) * resolve_scale(opts, x.cols()))),
        capacity_(std::max<std::size_t>(
            2, opts.cache_bytes / (sizeof(double) * static_cast<std::size_t>(std::max<Eigen::Index>(x.rows(), 1))))) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n * n * sizeof(double) <= opts.gram_bytes) {
      gram_ = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(x.rows(), x.rows()));
      gram_->selfadjointView<Eigen::Lower>().rankUpdate(x);
      gram_->triangularView<Eigen::StrictlyUpper>() = gram_->transpose();
      *gram_ *= inv_scale2_;
    }
  }

  static double resolve_scale(const SvmOptions& opts, Eigen::Index features) {
    if (opts.kernel_scale > 0.0) return opts.kernel_scale;
    return std::sqrt(static_cast<double>(std::max<Eigen::Index>(features, 1)));
  }

  double inv_scale2() const { return inv_scale2_; }

  bool precomputed() const { return gram_ != nullptr; }

  /// Valid until two further calls (the cache keeps at least two columns).
  const double* column(Eigen::Index i) {
    if (gram_) return gram_->col(i).data();
    auto it = index_.find(i);
    if (it != index_.end()) {
      entries_.splice(entries_.begin(), entries_, it->second);
      return it->second->second.data();
    }
    if (entries_.size() >= capacity_) {
      index_.erase(entries_.back().first);
      entries_.pop_back();
    }
    entries_.emplace_front(i, (x_ * x_.row(i).transpose()) * inv_scale2_);
    index_[i] = entries_.begin();
    return entries_.front().second.data();
  }

  /// Drop cached columns (the Gram matrix, if any, is kept).
  void reset_cache() {
    entries_.clear();
    index_.clear();
  }

 private:
  using Entry = std::pair<Eigen::Index, Eigen::VectorXd>;
  const RowMatrix& x_;
  double inv_scale2_;
  std::size_t capacity_;
  std::shared_ptr<Eigen::MatrixXd> gram_;
  std::list<Entry> entries_;
  std::unordered_map<Eigen::Index, std::list<Entry>::iterator> index_;
};

}  // namespace detail

/// Train one binary machine on labels in {-1, +1}. `kernel` may be shared
/// between machines trained on the same rows.
inline BinarySvm svm_fit_binary(const RowMatrix& x, std::span<const int> y, SvmOptions opts,
                                detail::KernelColumns& kernel) {
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(y.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
  }
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw Error(ErrorCode::InvalidArgument, "binary SVM labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error(ErrorCode::SingleClass, "binary SVM needs both classes");
  if (!(opts.c > 0.0) || !(opts.tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "SVM needs C > 0 and tol > 0");
  }

  const double C = opts.c;
  constexpr double kTau = 1e-12;
  const std::int64_t max_iter =
      opts.max_iterations > 0 ? opts.max_iterations
                              : std::max<std::int64_t>(10'000'000, 100 * static_cast<std::int64_t>(n));

  Eigen::VectorXd yd(n);
  for (Eigen::Index i = 0; i < n; ++i) yd[i] = y[static_cast<std::size_t>(i)];
  const Eigen::VectorXd diag = x.rowwise().squaredNorm() * kernel.inv_scale2();  // K_ii (= Q_ii)
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);

  auto is_upper = [&](Eigen::Index t) { return alpha[t] >= C; };
  auto is_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };
  auto in_up = [&](Eigen::Index t) { return yd[t] > 0 ? !is_upper(t) : !is_lower(t); };
  auto in_low = [&](Eigen::Index t) { return yd[t] > 0 ? !is_lower(t) : !is_upper(t); };

  // Linear kernel: grad = y .* (X v) / s^2 - 1 with v = X^T (alpha .* y), so
  // the gradient of shrunk variables can be rebuilt exactly in O(n F).
  auto reconstruct = [&] {
    const Eigen::VectorXd v = x.transpose() * alpha.cwiseProduct(yd);
    grad = (yd.array() * (x * v).array() * kernel.inv_scale2() - 1.0).matrix();
  };

  std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) active[static_cast<std::size_t>(t)] = t;
  auto activate_all = [&] {
    if (static_cast<Eigen::Index>(active.size()) == n) return;
    reconstruct();
    active.resize(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t) active[static_cast<std::size_t>(t)] = t;
  };
  const std::int64_t shrink_every = std::min<std::int64_t>(n, 1000);
  std::int64_t countdown = shrink_every;
  bool unshrunk = false;
  auto shrink = [&] {
    double g1 = -std::numeric_limits<double>::infinity();  // max over I_up of -y g
    double g2 = -std::numeric_limits<double>::infinity();  // max over I_low of y g
    for (auto t : active) {
      if (in_up(t)) g1 = std::max(g1, -yd[t] * grad[t]);
      if (in_low(t)) g2 = std::max(g2, yd[t] * grad[t]);
    }
    if (!unshrunk && g1 + g2 <= 10.0 * opts.tol) {
      unshrunk = true;
      activate_all();
    }
    auto removable = [&](Eigen::Index t) {
      if (is_upper(t)) return yd[t] > 0 ? -grad[t] > g1 : -grad[t] > g2;
      if (is_lower(t)) return yd[t] > 0 ? grad[t] > g2 : grad[t] > g1;
      return false;
    };
    std::erase_if(active, removable);
  };

  BinarySvm out;
  std::int64_t iter = 0;
  while (iter < max_iter) {
    if (opts.shrinking && --countdown == 0) {
      countdown = shrink_every;
      shrink();
    }
    // First index: maximal violation among I_up.
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (auto t : active) {
      if (in_up(t) && -yd[t] * grad[t] > gmax) {
        gmax = -yd[t] * grad[t];
        i = t;
      }
    }
    // Second index: largest second-order decrease among violating I_low.
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_gain = std::numeric_limits<double>::infinity();
    const double* ki = i >= 0 ? kernel.column(i) : nullptr;
    for (auto t : active) {
      if (!in_low(t)) continue;
      gmax2 = std::max(gmax2, yd[t] * grad[t]);
      if (i < 0) continue;
      const double diff = gmax + yd[t] * grad[t];
      if (diff > 0.0) {
        double quad = diag[i] + diag[t] - 2.0 * ki[t];
        if (quad <= 0.0) quad = kTau;
        const double gain = -(diff * diff) / quad;
        if (gain < best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < opts.tol) {
      if (static_cast<Eigen::Index>(active.size()) < n) {
        // Optimal on the active set only: recheck with every variable.
        activate_all();
        countdown = shrink_every;
        continue;
      }
      out.converged = true;
      break;
    }
    ++iter;

    // List-backed cache: references stay valid while the entry is resident,
    // and a capacity of at least 2 keeps both columns resident here.
    const double* col_i = kernel.column(i);
    const double kij = col_i[j];
    const double* col_j = kernel.column(j);
    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qij = yd[i] * yd[j] * kij;

    if (yd[i] != yd[j]) {
      double quad = diag[i] + diag[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    // grad_t += Q_ti dA_i + Q_tj dA_j, with Q_ti = y_t y_i K_ti.
    const double di = (alpha[i] - old_ai) * yd[i];
    const double dj = (alpha[j] - old_aj) * yd[j];
    if (static_cast<Eigen::Index>(active.size()) == n) {
      const Eigen::Map<const Eigen::VectorXd> ci(col_i, n);
      const Eigen::Map<const Eigen::VectorXd> cj(col_j, n);
      grad.array() += yd.array() * (di * ci.array() + dj * cj.array());
    } else {
      for (auto t : active) grad[t] += yd[t] * (di * col_i[t] + dj * col_j[t]);
    }
  }
  out.iterations = iter;
  activate_all();

  // Bias: average over free vectors, midpoint of the feasible interval otherwise.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  Eigen::Index free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = yd[t] * grad[t];
    if (is_upper(t)) {
      if (yd[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (yd[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);

  out.alpha = alpha;
  out.w = (x.transpose() * alpha.cwiseProduct(yd)) * kernel.inv_scale2();
  out.b = -rho;
  out.c = C;
  out.tol = opts.tol;
  return out;
}

inline BinarySvm svm_fit_binary(const RowMatrix& x, std::span<const int> y, SvmOptions opts = {}) {
  detail::KernelColumns kernel(x, opts);
  return svm_fit_binary(x, y, opts, kernel);
}

class SvmOvaModel final : public Classifier {
 public:
  explicit SvmOvaModel(SvmOptions opts = {}) : opts_(opts) {}

  Algorithm algorithm() const override { return Algorithm::Svm; }
  Eigen::Index dimension() const override { return weights_.rows(); }

  void fit(SamplesPtr data) override { fit(data->x, data->y); }

  void fit(const RowMatrix& x, std::span<const int> y) {
    const auto counts = class_counts(y);
    for (int k = 0; k < kNumClasses; ++k) {
      if (counts[static_cast<std::size_t>(k)] == 0) {
        throw Error(ErrorCode::MissingClass,
                    "one-vs-all SVM needs all " + std::to_string(kNumClasses) + " classes");
      }
    }
    std::vector<int> binary(y.size());
    detail::KernelColumns kernel(x, opts_);
    machines_.clear();
    weights_.resize(x.cols(), kNumClasses);
    for (int k = 0; k < kNumClasses; ++k) {
      for (std::size_t r = 0; r < y.size(); ++r) binary[r] = y[r] == k ? 1 : -1;
      kernel.reset_cache();
      machines_.push_back(svm_fit_binary(x, binary, opts_, kernel));
      weights_.col(k) = machines_.back().w;
      biases_[static_cast<std::size_t>(k)] = machines_.back().b;
    }
  }

  ClassScores score(std::span<const double> x) const override {
    check_dimension(x);
    const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::RowVector4d f = row * weights_;
    ClassScores s;
    for (int k = 0; k < kNumClasses; ++k) s[static_cast<std::size_t>(k)] = f[k] + biases_[static_cast<std::size_t>(k)];
    return s;
  }

  void predict_batch(const RowMatrix& x, std::vector<int>& labels,
                     ScoreMatrix& scores) const override {
    if (x.cols() != dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "feature count differs from the fitted model");
    }
    scores = x * weights_;
    labels.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      ClassScores s;
      for (int k = 0; k < kNumClasses; ++k) {
        scores(r, k) += biases_[static_cast<std::size_t>(k)];
        s[static_cast<std::size_t>(k)] = scores(r, k);
      }
      labels[static_cast<std::size_t>(r)] = argmax(s);
    }
  }

  const std::vector<BinarySvm>& machines() const { return machines_; }

  nlohmann::json to_json() const override {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : machines_) ms.push_back(m.to_json());
    return {{"algorithm", "svm"}, {"c", opts_.c}, {"tol", opts_.tol}, {"machines", ms}};
  }

  static SvmOvaModel from_json(const nlohmann::json& j) {
    SvmOptions opts;
    opts.c = j.at("c").get<double>();
    opts.tol = j.at("tol").get<double>();
    SvmOvaModel m(opts);
    for (const auto& mj : j.at("machines")) m.machines_.push_back(BinarySvm::from_json(mj));
    if (m.machines_.size() != kNumClasses) {
      throw Error(ErrorCode::InvalidArgument, "SVM model needs 4 machines");
    }
    m.weights_.resize(m.machines_[0].w.size(), kNumClasses);
    for (int k = 0; k < kNumClasses; ++k) {
      m.weights_.col(k) = m.machines_[static_cast<std::size_t>(k)].w;
      m.biases_[static_cast<std::size_t>(k)] = m.machines_[static_cast<std::size_t>(k)].b;
    }
    return m;
  }

 private:
  SvmOptions opts_;
  std::vector<BinarySvm> machines_;
  Eigen::Matrix<double, Eigen::Dynamic, kNumClasses> weights_;
  std::array<double, kNumClasses> biases_{};
};

}  // namespace moveprim
