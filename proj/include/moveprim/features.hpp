#pragma once

// Sliding windows, z-score normalization and the eight per-channel window
// statistics (mean, std, min, max, spectral entropy, skewness, spectral
// energy, RMS).

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "parallel.hpp"

namespace moveprim {

inline constexpr int kFeaturesPerChannel = 8;
inline constexpr double kVarianceFloor = 1e-9;
inline constexpr double kPowerFloor = 1e-12;

inline constexpr std::array<std::string_view, kFeaturesPerChannel> kFeatureNames = {
    "mean", "std", "min", "max", "entropy", "skewness", "energy", "rms"};

struct WindowSpec {
  double width_s = 0.25;
  double stride_s = 0.1;

  /// Sample counts use round-half-away-from-zero.
  Eigen::Index width_samples(double rate_hz) const {
    return static_cast<Eigen::Index>(std::round(width_s * rate_hz));
  }
  Eigen::Index stride_samples(double rate_hz) const {
    return static_cast<Eigen::Index>(std::round(stride_s * rate_hz));
  }

  void validate(double rate_hz) const {
    if (!(stride_s > 0.0) || !(stride_s <= width_s)) {
      throw Error(ErrorCode::InvalidArgument, "window spec needs 0 < stride <= width");
    }
    if (width_samples(rate_hz) < 8) {
      throw Error(ErrorCode::WindowTooShort, "window must span at least 8 samples");
    }
    if (stride_samples(rate_hz) < 1) {
      throw Error(ErrorCode::InvalidArgument, "stride rounds to zero samples");
    }
  }

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

inline Eigen::Index window_count(Eigen::Index samples, const WindowSpec& spec, double rate_hz) {
  spec.validate(rate_hz);
  const Eigen::Index w = spec.width_samples(rate_hz);
  const Eigen::Index s = spec.stride_samples(rate_hz);
  if (samples < w) {
    throw Error(ErrorCode::RecordingTooShort, std::to_string(samples) +
                                                  " samples is shorter than one window of " +
                                                  std::to_string(w));
  }
  return (samples - w) / s + 1;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
  std::vector<int> columns;  // recording columns the statistics belong to
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored at kVarianceFloor
};

/// Streaming per-column mean/variance (Welford), so fitting never has to
/// materialize the training rows.
class NormAccumulator {
 public:
  explicit NormAccumulator(Eigen::Index columns)
      : mean_(Eigen::VectorXd::Zero(columns)), m2_(Eigen::VectorXd::Zero(columns)) {}

  template <typename Row>
  void add(const Row& row) {
    ++count_;
    const Eigen::VectorXd delta = row.transpose() - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(row.transpose() - mean_);
  }

  Eigen::Index count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  /// Unfloored sample (n-1) variance.
  Eigen::VectorXd variance() const { return m2_ / static_cast<double>(count_ - 1); }

  NormStats finish(std::vector<int> columns) const {
    if (count_ < 2) {
      throw Error(ErrorCode::TooFewSamples, "normalization needs at least 2 samples per column");
    }
    NormStats stats;
    stats.columns = std::move(columns);
    stats.mean = mean_;
    stats.stddev = (m2_ / static_cast<double>(count_ - 1)).cwiseSqrt().cwiseMax(kVarianceFloor);
    return stats;
  }

 private:
  Eigen::Index count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

/// Per-column mean and sample (n-1) standard deviation of `rows`.
inline NormStats fit_norm(const Eigen::MatrixXd& rows, std::vector<int> columns = {}) {
  if (columns.empty()) {
    columns.resize(static_cast<std::size_t>(rows.cols()));
    std::iota(columns.begin(), columns.end(), 0);
  }
  NormAccumulator acc(rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) acc.add(rows.row(r));
  return acc.finish(std::move(columns));
}

/// Fit normalization on the samples covered by the given (global) segment ids.
inline NormStats fit_norm_on_segments(const Dataset& d, const SensorConfig& config,
                                      std::span<const std::size_t> segment_ids) {
  const auto cols = channel_columns(config);
  const auto refs = enumerate_segments(d);
  NormAccumulator acc(static_cast<Eigen::Index>(cols.size()));
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t id : segment_ids) {
    const auto& ref = refs.at(id);
    const auto& lr = d.recordings[ref.recording];
    const auto& seg = lr.segments[ref.segment];
    for (Eigen::Index t = seg.start_idx; t < seg.end_idx; ++t) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        row[static_cast<Eigen::Index>(c)] = lr.recording.samples(t, cols[c]);
      }
      acc.add(row);
    }
  }
  return acc.finish(cols);
}

// ---------------------------------------------------------------------------
// Per-window statistics

namespace detail {

// FFTW planning is not thread-safe; plans are created once per length under
// a lock and then executed with the new-array interface, which is.
class RealFft {
 public:
  static const RealFft& for_length(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<RealFft>> plans;
    std::lock_guard lock(mutex);
    auto& slot = plans[n];
    if (!slot) slot.reset(new RealFft(n));
    return *slot;
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() { fftw_destroy_plan(plan_); }

  int length() const { return n_; }

  void execute(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }

 private:
  explicit RealFft(int n) : n_(n) {
    auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
    auto* out = static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)));
    plan_ = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }

  int n_;
  fftw_plan plan_;
};

struct FftBuffers {
  explicit FftBuffers(int n)
      : in(static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)))),
        out(static_cast<fftw_complex*>(
            fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)))) {}
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
  ~FftBuffers() {
    fftw_free(in);
    fftw_free(out);
  }
  double* in;
  fftw_complex* out;
};

}  // namespace detail

/// Computes the eight statistics of one channel. Reuses FFT buffers across
/// calls; one instance per thread.
class ChannelFeaturizer {
 public:
  explicit ChannelFeaturizer(int window_length)
      : fft_(detail::RealFft::for_length(window_length)), buffers_(window_length) {
    if (window_length < 8) {
      throw Error(ErrorCode::WindowTooShort, "window must span at least 8 samples");
    }
  }

  int length() const { return fft_.length(); }

  /// Mutable access to the input buffer; fill it, then call compute().
  std::span<double> input() { return {buffers_.in, static_cast<std::size_t>(length())}; }

  void compute(std::span<double, kFeaturesPerChannel> out) {
    const int n = length();
    const double* x = buffers_.in;
    const double nd = static_cast<double>(n);

    double sum = 0.0, sum_sq = 0.0;
    double lo = x[0], hi = x[0];
    for (int i = 0; i < n; ++i) {
      sum += x[i];
      sum_sq += x[i] * x[i];
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    const double mean = sum / nd;
    double m2 = 0.0, m3 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = x[i] - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    const double sample_var = m2 / (nd - 1.0);
    m2 /= nd;
    m3 /= nd;
    const double skew = m2 < kPowerFloor ? 0.0 : m3 / std::pow(m2, 1.5);

    // Spectrum over positive frequencies k = 1..floor(n/2); DC excluded.
    fft_.execute(buffers_.in, buffers_.out);
    const int bins = n / 2;
    double total = 0.0;
    for (int k = 1; k <= bins; ++k) {
      const double p = buffers_.out[k][0] * buffers_.out[k][0] + buffers_.out[k][1] * buffers_.out[k][1];
      power_scratch_[static_cast<std::size_t>(k)] = p;
      total += p;
    }
    double entropy = 0.0;
    if (total >= kPowerFloor) {
      for (int k = 1; k <= bins; ++k) {
        const double p = power_scratch_[static_cast<std::size_t>(k)] / total;
        if (p > 0.0) entropy -= p * std::log2(p);
      }
    }

    out[0] = mean;
    out[1] = std::sqrt(std::max(sample_var, 0.0));
    out[2] = lo;
    out[3] = hi;
    out[4] = std::max(entropy, 0.0);
    out[5] = skew;
    out[6] = total / nd;
    out[7] = std::sqrt(sum_sq / nd);
  }

 private:
  const detail::RealFft& fft_;
  detail::FftBuffers buffers_;
  std::array<double, 4096> power_scratch_{};
};

/// Features of a normalized [w x C] window: C blocks of 8 values, channel-major.
inline Eigen::VectorXd extract_features(const Eigen::Ref<const Eigen::MatrixXd>& window) {
  const auto w = window.rows();
  if (w < 8) throw Error(ErrorCode::WindowTooShort, "window must span at least 8 samples");
  if (w / 2 >= 4096) throw Error(ErrorCode::InvalidArgument, "window longer than 8190 samples");
  if (!window.allFinite()) throw Error(ErrorCode::InvalidArgument, "window contains NaN/Inf");
  ChannelFeaturizer fz(static_cast<int>(w));
  Eigen::VectorXd out(window.cols() * kFeaturesPerChannel);
  for (Eigen::Index c = 0; c < window.cols(); ++c) {
    auto in = fz.input();
    for (Eigen::Index i = 0; i < w; ++i) in[static_cast<std::size_t>(i)] = window(i, c);
    fz.compute(std::span<double, kFeaturesPerChannel>(out.data() + c * kFeaturesPerChannel,
                                                      kFeaturesPerChannel));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Featurization of whole datasets

struct FeatureLayout {
  SensorConfig config = SensorConfig::all();
  WindowSpec window;
  std::vector<std::string> feature_names;
};

inline std::vector<std::string> feature_names(const SensorConfig& config) {
  std::vector<std::string> names;
  const int per_site = channel_count(config.kind());
  for (auto site : config.sites()) {
    for (int ch = 0; ch < per_site; ++ch) {
      for (auto f : kFeatureNames) {
        names.push_back(std::string(site_name(site)) + "." + std::string(kChannelNames[ch]) + "." +
                        std::string(f));
      }
    }
  }
  return names;
}

struct FeatureMatrix {
  RowMatrix x;  // windows x features
  std::vector<PrimitiveLabel> window_label;
  std::vector<std::size_t> window_segment;  // global segment id
  FeatureLayout layout;

  Eigen::Index windows() const { return x.rows(); }
  Eigen::Index features() const { return x.cols(); }
};

struct WindowAssignment {
  Eigen::Index start = 0;
  PrimitiveLabel label = PrimitiveLabel::Idle;
  std::size_t segment = 0;  // global id
};

/// Label each window of one recording by sample-majority vote. Ties go to the
/// label of the segment holding the window's center sample (lowest code if
/// the center is unlabeled). Windows touching no segment are dropped.
inline std::vector<WindowAssignment> assign_windows(const LabeledRecording& lr,
                                                    std::size_t first_segment_id,
                                                    Eigen::Index width, Eigen::Index stride) {
  std::vector<WindowAssignment> out;
  const Eigen::Index T = lr.recording.length();
  if (T < width) return out;
  const auto& segs = lr.segments;
  std::size_t first = 0;
  for (Eigen::Index a = 0; a + width <= T; a += stride) {
    const Eigen::Index b = a + width;
    while (first < segs.size() && segs[first].end_idx <= a) ++first;
    std::array<Eigen::Index, kNumClasses> per_label{};
    Eigen::Index best_seg_overlap = 0;
    std::ptrdiff_t center_seg = -1;
    const Eigen::Index center = a + width / 2;
    for (std::size_t s = first; s < segs.size() && segs[s].start_idx < b; ++s) {
      const Eigen::Index overlap = std::min(b, segs[s].end_idx) - std::max(a, segs[s].start_idx);
      if (overlap <= 0) continue;
      per_label[static_cast<std::size_t>(code(segs[s].label))] += overlap;
      best_seg_overlap = std::max(best_seg_overlap, overlap);
      if (segs[s].start_idx <= center && center < segs[s].end_idx) {
        center_seg = static_cast<std::ptrdiff_t>(s);
      }
    }
    if (best_seg_overlap == 0) continue;

    const Eigen::Index top = *std::max_element(per_label.begin(), per_label.end());
    int label = -1;
    if (center_seg >= 0 &&
        per_label[static_cast<std::size_t>(code(segs[static_cast<std::size_t>(center_seg)].label))] ==
            top) {
      label = code(segs[static_cast<std::size_t>(center_seg)].label);
    } else {
      for (int k = 0; k < kNumClasses; ++k) {
        if (per_label[static_cast<std::size_t>(k)] == top) {
          label = k;
          break;
        }
      }
    }

    // Owning segment: the one with the largest overlap among those of the
    // winning label; prefer the center segment, then the earliest.
    std::ptrdiff_t owner = -1;
    Eigen::Index owner_overlap = 0;
    for (std::size_t s = first; s < segs.size() && segs[s].start_idx < b; ++s) {
      if (code(segs[s].label) != label) continue;
      const Eigen::Index overlap = std::min(b, segs[s].end_idx) - std::max(a, segs[s].start_idx);
      if (overlap <= 0) continue;
      const bool better = overlap > owner_overlap ||
                          (overlap == owner_overlap && static_cast<std::ptrdiff_t>(s) == center_seg);
      if (better) {
        owner = static_cast<std::ptrdiff_t>(s);
        owner_overlap = overlap;
      }
    }
    out.push_back({a, label_from_code(label), first_segment_id + static_cast<std::size_t>(owner)});
  }
  return out;
}

/// Window, normalize (with `norm`) and featurize every labeled window of the
/// dataset over the channels of `config`.
inline FeatureMatrix featurize(const Dataset& d, const SensorConfig& config,
                               const WindowSpec& spec, const NormStats& norm, int threads = 1) {
  const auto cols = channel_columns(config);
  if (norm.columns != cols) {
    throw Error(ErrorCode::DimensionMismatch,
                "normalization statistics were fitted on a different channel subset");
  }

  struct Job {
    std::size_t recording;
    WindowAssignment window;
  };
  std::vector<Job> jobs;
  std::size_t seg_offset = 0;
  Eigen::Index width = 0;
  for (std::size_t r = 0; r < d.recordings.size(); ++r) {
    const auto& lr = d.recordings[r];
    const double rate = lr.recording.sample_rate_hz;
    spec.validate(rate);
    const Eigen::Index w = spec.width_samples(rate);
    if (width != 0 && w != width) {
      throw Error(ErrorCode::InvalidArgument, "recordings disagree on window length");
    }
    width = w;
    for (const auto& win : assign_windows(lr, seg_offset, w, spec.stride_samples(rate))) {
      jobs.push_back({r, win});
    }
    seg_offset += lr.segments.size();
  }

  FeatureMatrix fm;
  fm.layout = {config, spec, feature_names(config)};
  const auto C = static_cast<Eigen::Index>(cols.size());
  fm.x.resize(static_cast<Eigen::Index>(jobs.size()), C * kFeaturesPerChannel);
  fm.window_label.resize(jobs.size());
  fm.window_segment.resize(jobs.size());
  if (jobs.empty()) return fm;

  const Eigen::VectorXd inv_std = norm.stddev.cwiseInverse();
  const std::size_t block = 256;
  const std::size_t blocks = (jobs.size() + block - 1) / block;
  parallel_for(blocks, threads, [&](std::size_t bi) {
    ChannelFeaturizer fz(static_cast<int>(width));
    for (std::size_t j = bi * block; j < std::min(jobs.size(), (bi + 1) * block); ++j) {
      const auto& job = jobs[j];
      const auto& samples = d.recordings[job.recording].recording.samples;
      double* row = fm.x.row(static_cast<Eigen::Index>(j)).data();
      for (Eigen::Index c = 0; c < C; ++c) {
        const double* src = samples.col(cols[static_cast<std::size_t>(c)]).data() + job.window.start;
        auto in = fz.input();
        const double mu = norm.mean[c];
        const double is = inv_std[c];
        for (Eigen::Index i = 0; i < width; ++i) {
          const double v = src[i];
          if (!std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument,
                        "non-finite sample in channel used by the sensor config");
          }
          in[static_cast<std::size_t>(i)] = (v - mu) * is;
        }
        fz.compute(std::span<double, kFeaturesPerChannel>(row + c * kFeaturesPerChannel,
                                                          kFeaturesPerChannel));
      }
      fm.window_label[j] = job.window.label;
      fm.window_segment[j] = job.window.segment;
    }
  });
  return fm;
}

/// Featurize with normalization fitted on every labeled segment.
inline FeatureMatrix featurize_all(const Dataset& d, const SensorConfig& config,
                                   const WindowSpec& spec, int threads = 1) {
  std::vector<std::size_t> ids(d.segment_count());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return featurize(d, config, spec, fit_norm_on_segments(d, config, ids), threads);
}

/// CSV export: `window,segment,label,f0..f{F-1}`.
inline void write_feature_csv(const FeatureMatrix& fm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << "window,segment,label";
  for (Eigen::Index f = 0; f < fm.features(); ++f) out << ",f" << f;
  out << '\n';
  char buf[64];
  for (Eigen::Index w = 0; w < fm.windows(); ++w) {
    out << w << ',' << fm.window_segment[static_cast<std::size_t>(w)] << ','
        << label_name(fm.window_label[static_cast<std::size_t>(w)]);
    for (Eigen::Index f = 0; f < fm.features(); ++f) {
      std::snprintf(buf, sizeof buf, ",%.9g", fm.x(w, f));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace moveprim
