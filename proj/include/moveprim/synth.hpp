#pragma once

// Synthetic data. gen_signal_dataset renders labeled IMU recordings from
// minimum-jerk templates on the active arm; gen_feature_dataset draws feature
// rows from per-label diagonal Gaussians (for large-scale timing runs);
// estimate_moments links the two.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "core_types.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace moveprim {

struct DurationRange {
  double min_s = 0.5;
  double max_s = 1.0;
};

struct SignalGenSpec {
  std::array<std::size_t, kNumClasses> counts = {810, 708, 781, 582};
  double sample_rate_hz = kDefaultSampleRateHz;
  std::array<DurationRange, kNumClasses> durations = {
      DurationRange{0.6, 1.1}, DurationRange{0.8, 1.4}, DurationRange{0.6, 1.1},
      DurationRange{0.5, 1.0}};
  // Scales every random component: sensor noise, movement variability and
  // subject differences. Zero gives noiseless, template-exact movements; the
  // default is calibrated so LDA lands near 0.95 overall PPV.
  double noise_std = 2.0;
  std::uint64_t seed = 0;
  int subjects = 6;
  int trials = 5;
  Side active_side = Side::Right;
  double min_window_s = 0.25;  // durations must cover two of these

  void validate() const {
    for (int k = 0; k < kNumClasses; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (counts[ku] == 0) throw Error(ErrorCode::InvalidSpec, "every label needs a positive count");
      if (!(durations[ku].min_s >= 2.0 * min_window_s) || durations[ku].max_s < durations[ku].min_s) {
        throw Error(ErrorCode::InvalidSpec,
                    "durations must satisfy 2 x window <= min <= max for every label");
      }
    }
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidSpec, "sample rate must be positive");
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise std must be non-negative");
    if (subjects < 1 || trials < 1) {
      throw Error(ErrorCode::InvalidSpec, "need at least one subject and one trial");
    }
  }
};

namespace detail {

inline constexpr double kGravity = 9.81;

// Minimum-jerk position profile and its derivatives on u in [0, 1].
inline double mj_pos(double u) { return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u); }
inline double mj_vel(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
inline double mj_acc(double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }

// Bell-shaped excursion that leaves and returns to zero: 64 u^3 (1-u)^3.
inline double bump(double u) {
  const double v = u * (1.0 - u);
  return 64.0 * v * v * v;
}
inline double bump_rate(double u) {
  const double v = u * (1.0 - u);
  return 192.0 * v * v * (1.0 - 2.0 * u);
}

/// Motion parameters of one primitive, expressed for the active hand.
struct Movement {
  Eigen::Vector3d displacement = Eigen::Vector3d::Zero();  // metres, world frame
  double yaw = 0.0;   // peak excursion about the vertical axis (rad)
  double roll = 0.0;  // peak excursion about the forward axis (rad)
  double tremor = 0.0;
};

inline Movement draw_movement(PrimitiveLabel label, double ns, Rng& rng) {
  auto vary = [&](double nominal, double rel) { return nominal * (1.0 + rel * ns * rng.normal()); };
  Movement m;
  switch (label) {
    case PrimitiveLabel::Reach:
      // Forward and slightly up, turning outward with some supination.
      m.displacement = Eigen::Vector3d(vary(0.35, 0.2), vary(0.05, 0.5), vary(0.08, 0.4));
      m.yaw = vary(0.45, 0.25);
      m.roll = vary(0.3, 0.4);
      break;
    case PrimitiveLabel::Transport:
      // Lateral carry with a sustained tilt of the hand (object rotation).
      m.displacement = Eigen::Vector3d(vary(0.08, 0.5), vary(0.3, 0.2), vary(0.06, 0.5));
      m.yaw = vary(0.1, 0.5);
      m.roll = vary(0.7, 0.2);
      break;
    case PrimitiveLabel::Reposition:
      // Back toward the body and slightly down, turning inward.
      m.displacement = Eigen::Vector3d(vary(-0.3, 0.2), vary(-0.05, 0.5), vary(-0.04, 0.5));
      m.yaw = vary(-0.4, 0.25);
      m.roll = vary(-0.1, 0.5);
      break;
    case PrimitiveLabel::Idle:
      m.tremor = 0.08;
      break;
  }
  return m;
}

struct SiteNoise {
  double accel = 0.12;  // m/s^2
  double gyro = 0.04;   // rad/s
  double quat = 0.004;
};

/// Motion gain of each site relative to the active hand.
inline std::array<double, kNumSites> site_gains(Side active) {
  std::array<double, kNumSites> g{};
  g[site_index(SensorSite::Head)] = 0.1;
  g[site_index(SensorSite::Sternum)] = 0.1;
  g[site_index(SensorSite::Pelvis)] = 0.1;
  const bool right = active == Side::Right;
  g[site_index(right ? SensorSite::RHand : SensorSite::LHand)] = 1.0;
  g[site_index(right ? SensorSite::RForearm : SensorSite::LForearm)] = 0.8;
  g[site_index(right ? SensorSite::RArm : SensorSite::LArm)] = 0.5;
  g[site_index(right ? SensorSite::RScapula : SensorSite::LScapula)] = 0.25;
  return g;
}

/// Per-subject constant orientation of each sensor.
inline std::array<Eigen::Quaterniond, kNumSites> mounting(double ns, Rng& rng) {
  std::array<Eigen::Quaterniond, kNumSites> q;
  for (auto& m : q) {
    const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    const double angle = 0.15 * ns * rng.normal();
    m = axis.norm() > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()))
                          : Eigen::Quaterniond::Identity();
  }
  return q;
}

/// Write one primitive into rows [start, start + n) of `samples`.
inline void render_segment(Eigen::MatrixXd& samples, Eigen::Index start, Eigen::Index n,
                           double rate, PrimitiveLabel label, double subject_gain,
                           const std::array<Eigen::Quaterniond, kNumSites>& mount,
                           const std::array<double, kNumSites>& gains, double ns, Rng& rng) {
  const Movement m = draw_movement(label, ns, rng);
  const double T = static_cast<double>(n) / rate;
  const SiteNoise noise;
  const Eigen::Vector3d up(0.0, 0.0, kGravity);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const Eigen::Vector3d acc_hand = m.displacement * (mj_acc(u) / (T * T)) * subject_gain;
    const double yaw = m.yaw * bump(u) * subject_gain;
    const double roll = m.roll * bump(u) * subject_gain;
    const double yaw_rate = m.yaw * bump_rate(u) / T * subject_gain;
    const double roll_rate = m.roll * bump_rate(u) / T * subject_gain;
    for (int s = 0; s < kNumSites; ++s) {
      const double g = gains[static_cast<std::size_t>(s)];
      const Eigen::AngleAxisd rz(g * yaw, Eigen::Vector3d::UnitZ());
      const Eigen::AngleAxisd rx(g * roll, Eigen::Vector3d::UnitX());
      const Eigen::Quaterniond motion = Eigen::Quaterniond(rz) * Eigen::Quaterniond(rx);
      const Eigen::Quaterniond q = (motion * mount[static_cast<std::size_t>(s)]).normalized();
      // Body-frame angular velocity of Rz(yaw) * Rx(roll), then expressed in
      // the sensor frame through the mounting rotation.
      const Eigen::Vector3d omega_motion =
          rx.toRotationMatrix().transpose() * Eigen::Vector3d(0.0, 0.0, g * yaw_rate) +
          Eigen::Vector3d(g * roll_rate, 0.0, 0.0);
      const Eigen::Vector3d omega =
          mount[static_cast<std::size_t>(s)].toRotationMatrix().transpose() * omega_motion;
      Eigen::Vector3d acc_world = g * acc_hand;
      if (m.tremor > 0.0 && g > 0.0) {
        acc_world += g * m.tremor * ns * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      }
      const Eigen::Vector3d acc = q.toRotationMatrix().transpose() * (acc_world + up);

      const Eigen::Index row = start + i;
      const int base = s * kImuChannels;
      for (int c = 0; c < 3; ++c) {
        samples(row, base + c) = acc[c] + noise.accel * ns * rng.normal();
        samples(row, base + 3 + c) = omega[c] + noise.gyro * ns * rng.normal();
      }
      Eigen::Vector4d qv(q.w(), q.x(), q.y(), q.z());
      for (int c = 0; c < 4; ++c) qv[c] += noise.quat * ns * rng.normal();
      qv.normalize();
      for (int c = 0; c < 4; ++c) samples(row, base + 6 + c) = qv[c];
    }
  }
}

}  // namespace detail

/// Render the labeled dataset: all segments are shuffled, dealt into
/// subjects x trials recordings and tiled back to back.
inline Dataset gen_signal_dataset(const SignalGenSpec& spec, int threads = 1) {
  spec.validate();
  const double ns = spec.noise_std;
  Rng layout_rng(derive_seed(spec.seed, 0));
  std::vector<PrimitiveLabel> labels;
  for (int k = 0; k < kNumClasses; ++k) {
    labels.insert(labels.end(), spec.counts[static_cast<std::size_t>(k)], label_from_code(k));
  }
  layout_rng.shuffle(std::span<PrimitiveLabel>(labels));

  std::vector<Eigen::Index> lengths(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& range = spec.durations[static_cast<std::size_t>(code(labels[i]))];
    const double secs = layout_rng.uniform(range.min_s, range.max_s);
    lengths[i] = static_cast<Eigen::Index>(std::round(secs * spec.sample_rate_hz));
  }

  const auto n_rec = static_cast<std::size_t>(spec.subjects * spec.trials);
  const auto gains = detail::site_gains(spec.active_side);
  std::vector<std::array<Eigen::Quaterniond, kNumSites>> mounts;
  std::vector<double> subject_gain;
  for (int s = 0; s < spec.subjects; ++s) {
    Rng rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(s)));
    mounts.push_back(detail::mounting(ns, rng));
    subject_gain.push_back(std::max(0.3, 1.0 + 0.15 * ns * rng.normal()));
  }

  Dataset d;
  d.recordings.resize(n_rec);
  std::vector<std::size_t> first(n_rec + 1, 0);
  for (std::size_t r = 0; r <= n_rec; ++r) first[r] = labels.size() * r / n_rec;

  parallel_for(n_rec, threads, [&](std::size_t r) {
    const auto subject = static_cast<int>(r) / spec.trials;
    const auto trial = static_cast<int>(r) % spec.trials;
    auto& lr = d.recordings[r];
    lr.recording.sample_rate_hz = spec.sample_rate_hz;
    lr.recording.subject_id = "S" + std::to_string(subject + 1);
    lr.recording.trial_id = "T" + std::to_string(trial + 1);
    Eigen::Index total = 0;
    for (std::size_t i = first[r]; i < first[r + 1]; ++i) total += lengths[i];
    lr.recording.samples.resize(total, kRecordingColumns);
    lr.recording.timestamps.resize(static_cast<std::size_t>(total));
    for (Eigen::Index t = 0; t < total; ++t) {
      lr.recording.timestamps[static_cast<std::size_t>(t)] =
          static_cast<double>(t) / spec.sample_rate_hz;
    }
    Eigen::Index at = 0;
    for (std::size_t i = first[r]; i < first[r + 1]; ++i) {
      Rng rng(derive_seed(spec.seed, 1'000'000 + i));
      detail::render_segment(lr.recording.samples, at, lengths[i], spec.sample_rate_hz, labels[i],
                             subject_gain[static_cast<std::size_t>(subject)],
                             mounts[static_cast<std::size_t>(subject)], gains, ns, rng);
      lr.segments.push_back({at, at + lengths[i], labels[i]});
      at += lengths[i];
    }
  });
  return d;
}

// ---------------------------------------------------------------------------
// Feature-level moment sampler

struct MomentSpec {
  std::size_t total = 300000;
  std::array<double, kNumClasses> proportions = {810.0 / 2881.0, 708.0 / 2881.0, 781.0 / 2881.0,
                                                 582.0 / 2881.0};
  Eigen::MatrixXd mean;      // kNumClasses x F
  Eigen::MatrixXd variance;  // kNumClasses x F
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;

  Eigen::Index features() const { return mean.cols(); }

  void validate() const {
    double sum = 0.0;
    for (double p : proportions) {
      if (!(p >= 0.0)) throw Error(ErrorCode::InvalidSpec, "proportions must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSpec, "proportions must sum to 1");
    if (mean.rows() != kNumClasses || variance.rows() != kNumClasses ||
        mean.cols() != variance.cols() || mean.cols() == 0) {
      throw Error(ErrorCode::InvalidSpec, "moment matrices must be 4 x F with F > 0");
    }
    if ((variance.array() < 0.0).any()) throw Error(ErrorCode::InvalidSpec, "variances must be >= 0");
    if (total == 0) throw Error(ErrorCode::InvalidSpec, "total must be positive");
  }
};

/// round(p_k * total), then nudged one at a time (largest rounding deficit
/// first) until the counts sum to total.
inline std::array<std::size_t, kNumClasses> apportion(const std::array<double, kNumClasses>& p,
                                                      std::size_t total) {
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> deficit{};
  std::int64_t sum = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double exact = p[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::llround(exact));
    deficit[k] = exact - static_cast<double>(counts[k]);
    sum += static_cast<std::int64_t>(counts[k]);
  }
  while (sum != static_cast<std::int64_t>(total)) {
    const bool grow = sum < static_cast<std::int64_t>(total);
    std::size_t pick = 0;
    for (std::size_t k = 1; k < counts.size(); ++k) {
      const bool better = grow ? deficit[k] > deficit[pick] : deficit[k] < deficit[pick];
      if (better && (grow || counts[k] > 0)) pick = k;
    }
    if (grow) {
      ++counts[pick];
      deficit[pick] -= 1.0;
      ++sum;
    } else {
      --counts[pick];
      deficit[pick] += 1.0;
      --sum;
    }
  }
  return counts;
}

/// Rows drawn from independent per-feature Gaussians with each label's
/// moments. Rows are shuffled; window_segment holds the row index.
inline FeatureMatrix gen_feature_dataset(const MomentSpec& spec) {
  spec.validate();
  const auto counts = apportion(spec.proportions, spec.total);
  std::vector<PrimitiveLabel> labels;
  labels.reserve(spec.total);
  for (int k = 0; k < kNumClasses; ++k) {
    labels.insert(labels.end(), counts[static_cast<std::size_t>(k)], label_from_code(k));
  }
  Rng rng(derive_seed(spec.seed, 7));
  rng.shuffle(std::span<PrimitiveLabel>(labels));

  const Eigen::Index F = spec.features();
  const Eigen::MatrixXd sd = spec.variance.cwiseSqrt();
  FeatureMatrix fm;
  fm.x.resize(static_cast<Eigen::Index>(spec.total), F);
  fm.window_label = labels;
  fm.window_segment.resize(spec.total);
  for (std::size_t i = 0; i < spec.total; ++i) {
    const int k = code(labels[i]);
    double* row = fm.x.row(static_cast<Eigen::Index>(i)).data();
    for (Eigen::Index f = 0; f < F; ++f) row[f] = spec.mean(k, f) + sd(k, f) * rng.normal();
    fm.window_segment[i] = i;
  }
  fm.layout.feature_names = spec.feature_names;
  return fm;
}

/// Per-label mean and (n-1) variance of the segment-mean feature vectors.
inline MomentSpec estimate_moments(const FeatureMatrix& fm) {
  const Eigen::Index F = fm.features();
  std::vector<std::size_t> ids = fm.window_segment;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t S = ids.size();
  Eigen::MatrixXd seg_mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), F);
  std::vector<std::size_t> seg_windows(S, 0);
  std::vector<int> seg_label(S, -1);
  for (Eigen::Index w = 0; w < fm.windows(); ++w) {
    const auto s = static_cast<std::size_t>(
        std::lower_bound(ids.begin(), ids.end(), fm.window_segment[static_cast<std::size_t>(w)]) -
        ids.begin());
    seg_mean.row(static_cast<Eigen::Index>(s)) += fm.x.row(w);
    ++seg_windows[s];
    seg_label[s] = code(fm.window_label[static_cast<std::size_t>(w)]);
  }
  std::array<std::vector<Eigen::Index>, kNumClasses> members;
  for (std::size_t s = 0; s < S; ++s) {
    seg_mean.row(static_cast<Eigen::Index>(s)) /= static_cast<double>(seg_windows[s]);
    members[static_cast<std::size_t>(seg_label[s])].push_back(static_cast<Eigen::Index>(s));
  }

  MomentSpec out;
  out.mean = Eigen::MatrixXd::Zero(kNumClasses, F);
  out.variance = Eigen::MatrixXd::Zero(kNumClasses, F);
  out.feature_names = fm.layout.feature_names;
  for (int k = 0; k < kNumClasses; ++k) {
    const auto& m = members[static_cast<std::size_t>(k)];
    if (m.size() < 2) {
      throw Error(ErrorCode::LabelTooSmall, std::string("label '") +
                                                std::string(label_name(label_from_code(k))) +
                                                "' needs at least 2 segments");
    }
    NormAccumulator acc(F);
    for (auto s : m) acc.add(seg_mean.row(s));
    out.mean.row(k) = acc.mean().transpose();
    out.variance.row(k) = acc.variance().cwiseMax(0.0).transpose();
    out.proportions[static_cast<std::size_t>(k)] = static_cast<double>(m.size()) / static_cast<double>(S);
  }
  return out;
}

}  // namespace moveprim
