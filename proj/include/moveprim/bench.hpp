#pragma once

// Training and testing time against dataset size, and power-law fits of the
// measured times. Only the classifier phase is timed: subsampling and copying
// rows happen outside the timed sections, and featurization is not involved.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "classifiers.hpp"
#include "csv.hpp"
#include "features.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "synth.hpp"

namespace moveprim {

inline constexpr std::string_view kTimingCsvHeader = "algorithm,phase,fraction,n_samples,time_s";

using BenchClock = std::chrono::steady_clock;

inline double seconds_since(BenchClock::time_point t0) {
  return std::chrono::duration<double>(BenchClock::now() - t0).count();
}

/// Smallest non-zero step observed between consecutive clock readings.
inline double clock_resolution() {
  double best = 1.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto t0 = BenchClock::now();
    auto t1 = BenchClock::now();
    while (t1 == t0) t1 = BenchClock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

inline std::vector<double> fraction_grid(double first, double last, double step) {
  std::vector<double> out;
  const int n = static_cast<int>(std::llround((last - first) / step));
  for (int i = 0; i <= n; ++i) out.push_back(std::round((first + step * i) * 1e9) / 1e9);
  return out;
}

/// 0.2, 0.3, ..., 1.0
inline std::vector<double> default_fractions() { return fraction_grid(0.2, 1.0, 0.1); }

/// 0.25, 0.5, 0.75, 1.0
inline std::vector<double> quartile_fractions() { return fraction_grid(0.25, 1.0, 0.25); }

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "median of an empty series");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Nested stratified subsamples: each label's rows are shuffled once and a
/// fraction f takes the first round(f * n_k) of them, so a larger fraction
/// always contains every smaller one.
class NestedSubsampler {
 public:
  NestedSubsampler(std::span<const PrimitiveLabel> labels, std::uint64_t seed) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      by_label_[static_cast<std::size_t>(code(labels[i]))].push_back(i);
    }
    Rng rng(derive_seed(seed, 11));
    for (auto& rows : by_label_) rng.shuffle(std::span<std::size_t>(rows));
  }

  std::vector<std::size_t> take(double fraction) const {
    std::vector<std::size_t> out;
    for (int k = 0; k < kNumClasses; ++k) {
      const auto& rows = by_label_[static_cast<std::size_t>(k)];
      const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
      if (n == 0) {
        throw Error(ErrorCode::MissingClassAtFraction,
                    "fraction " + csv::format(fraction) + " keeps no '" +
                        std::string(label_name(label_from_code(k))) + "' rows");
      }
      out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::array<std::vector<std::size_t>, kNumClasses> by_label_;
};

struct BenchOptions {
  int reps = 3;
  std::size_t probe_size = 1000;
  ClassifierOptions classifiers;
  /// Operations shorter than this are repeated until one timed sample spans
  /// it, and the sample is divided by the repeat count.
  double min_sample_s = 0.1;
  /// Per-algorithm time budget in seconds. A fraction whose projected cost
  /// would exceed it is not run; larger fractions are skipped as well.
  std::optional<double> wall_s;
};

inline SamplesPtr gather_rows(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  auto s = std::make_shared<LabeledSamples>();
  s->x.resize(static_cast<Eigen::Index>(rows.size()), fm.features());
  s->y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s->x.row(static_cast<Eigen::Index>(i)) = fm.x.row(static_cast<Eigen::Index>(rows[i]));
    s->y[i] = code(fm.window_label[rows[i]]);
  }
  return s;
}

/// Fixed probe rows shared by every fraction.
inline RowMatrix probe_rows(const FeatureMatrix& fm, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(fm.windows()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 12));
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(std::min(size, idx.size()));
  std::sort(idx.begin(), idx.end());
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), fm.features());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = fm.x.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

namespace detail {
inline volatile int bench_sink = 0;  // keeps predictions from being optimized away
}

/// Per-sample predict latency: one predict() call per probe row, with whole
/// probe passes repeated until `min_s` has elapsed.
inline double time_per_sample(const Classifier& model, const RowMatrix& probe, double min_s = 0.0) {
  const auto cols = static_cast<std::size_t>(probe.cols());
  int sink = 0;
  std::size_t calls = 0;
  const auto t0 = BenchClock::now();
  double t = 0.0;
  do {
    for (Eigen::Index r = 0; r < probe.rows(); ++r) {
      sink += model.predict(std::span<const double>(probe.row(r).data(), cols));
    }
    calls += static_cast<std::size_t>(probe.rows());
    t = seconds_since(t0);
  } while (t < min_s);
  detail::bench_sink = sink;
  return t / static_cast<double>(calls);
}

/// Wall time of one fit, averaged over back-to-back refits when a single fit
/// is shorter than `min_s`.
inline double time_fit(Classifier& model, const SamplesPtr& data, double min_s = 0.0) {
  std::size_t fits = 0;
  const auto t0 = BenchClock::now();
  double t = 0.0;
  do {
    SamplesPtr handle = data;
    model.fit(std::move(handle));
    ++fits;
    t = seconds_since(t0);
  } while (t < min_s);
  return t / static_cast<double>(fits);
}

struct FractionTiming {
  TimingPoint point;
  double elapsed_s = 0.0;  // everything spent on this fraction, warm-up included
};

/// One fraction: a discarded warm-up fit, then `reps` fresh models timed back
/// to back. Each fitted model then gets one timed probe sample.
inline FractionTiming time_fraction(Algorithm algorithm, const FeatureMatrix& fm,
                                    const NestedSubsampler& sampler, const RowMatrix& probe,
                                    double fraction, const BenchOptions& opts) {
  const auto t_all = BenchClock::now();
  const auto rows = sampler.take(fraction);
  const SamplesPtr data = gather_rows(fm, rows);
  std::vector<double> train, test;
  std::vector<std::unique_ptr<Classifier>> models;
  for (int rep = 0; rep <= opts.reps; ++rep) {
    auto model = make_classifier(algorithm, opts.classifiers);
    const double fit_s = time_fit(*model, data, rep == 0 ? 0.0 : opts.min_sample_s);
    if (rep == 0) continue;
    train.push_back(fit_s);
    models.push_back(std::move(model));
  }
  (void)time_per_sample(*models.front(), probe);  // warm-up
  for (const auto& m : models) test.push_back(time_per_sample(*m, probe, opts.min_sample_s));
  FractionTiming out;
  out.point = {fraction, rows.size(), median(train), median(test)};
  out.elapsed_s = seconds_since(t_all);
  return out;
}

inline void check_fractions(std::span<const double> fractions) {
  if (fractions.empty()) throw Error(ErrorCode::InvalidArgument, "no fractions given");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0 && fractions[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "fractions must lie in (0, 1]");
    }
    if (i > 0 && !(fractions[i] > fractions[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "fractions must be strictly increasing");
    }
  }
}

/// Least-squares line through (log n, log t). Points at or below the clock
/// resolution are dropped; at least four must remain.
inline ScalingFit fit_scaling(std::span<const TimingPoint> points, Phase phase, double resolution = 0.0) {
  std::vector<double> lx, ly;
  for (const auto& p : points) {
    const double t = phase == Phase::Train ? p.train_s : p.test_s;
    if (t > resolution && p.n_samples > 0) {
      lx.push_back(std::log(static_cast<double>(p.n_samples)));
      ly.push_back(std::log(t));
    }
  }
  if (lx.size() < 4) {
    throw Error(ErrorCode::BelowClockResolution,
                std::string(phase_name(phase)) + " times: " + std::to_string(lx.size()) +
                    " of " + std::to_string(points.size()) +
                    " fractions above the clock resolution, 4 needed");
  }
  const auto n = static_cast<Eigen::Index>(lx.size());
  const Eigen::Map<const Eigen::VectorXd> x(lx.data(), n), y(ly.data(), n);
  const double mx = x.mean(), my = y.mean();
  const Eigen::VectorXd dx = x.array() - mx, dy = y.array() - my;
  const double sxx = dx.squaredNorm();
  ScalingFit fit;
  fit.slope = sxx > 0.0 ? dx.dot(dy) / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  const double syy = dy.squaredNorm();
  const double sse = (dy - fit.slope * dx).squaredNorm();
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  return fit;
}

inline ScalingFit fit_scaling(const TimingRun& run, Phase phase, double resolution = 0.0) {
  return fit_scaling(std::span<const TimingPoint>(run.points), phase, resolution);
}

/// exp(intercept) * n^slope
inline double extrapolate(const ScalingFit& fit, std::size_t n) {
  return std::exp(fit.intercept + fit.slope * std::log(static_cast<double>(n)));
}

/// Train-time projection from the points measured so far: a power-law fit
/// with two or more points, quadratic growth from a single point.
inline double project_train_time(std::span<const TimingPoint> done, std::size_t n) {
  if (done.empty()) return 0.0;
  if (done.size() == 1) {
    const double r = static_cast<double>(n) / static_cast<double>(done[0].n_samples);
    return done[0].train_s * r * r;
  }
  std::vector<double> lx, ly;
  for (const auto& p : done) {
    lx.push_back(std::log(static_cast<double>(p.n_samples)));
    ly.push_back(std::log(std::max(p.train_s, 1e-12)));
  }
  const auto m = static_cast<Eigen::Index>(lx.size());
  const Eigen::Map<const Eigen::VectorXd> x(lx.data(), m), y(ly.data(), m);
  const Eigen::VectorXd dx = x.array() - x.mean();
  const double slope = std::max(dx.dot(y.array().matrix() - Eigen::VectorXd::Constant(m, y.mean())) /
                                    dx.squaredNorm(),
                                1.0);
  return std::exp(y.mean() + slope * (std::log(static_cast<double>(n)) - x.mean()));
}

/// Times training and per-sample testing at each fraction of `fm`, then fits
/// power laws. Fractions beyond the wall are skipped and the full-size train
/// time is projected instead.
inline TimingSummary time_training(Algorithm algorithm, const FeatureMatrix& fm,
                                   std::span<const double> fractions, std::uint64_t seed,
                                   const BenchOptions& opts = {}, double resolution = 0.0) {
  check_fractions(fractions);
  if (opts.reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
  const NestedSubsampler sampler(fm.window_label, seed);
  for (double f : fractions) (void)sampler.take(f);  // fail before any timing
  const RowMatrix probe = probe_rows(fm, opts.probe_size, seed);

  TimingSummary out;
  out.run.algorithm = algorithm;
  out.run.reps = opts.reps;
  out.run.seed = seed;
  out.full_n = static_cast<std::size_t>(fm.windows());
  double spent = 0.0;
  for (double f : fractions) {
    if (opts.wall_s) {
      const auto n = sampler.take(f).size();
      const double projected = project_train_time(out.run.points, n) * (opts.reps + 1);
      if (spent + projected > *opts.wall_s) {
        out.exceeds_wall = true;
        break;
      }
    }
    const auto ft = time_fraction(algorithm, fm, sampler, probe, f, opts);
    out.run.points.push_back(ft.point);
    spent += ft.elapsed_s;
  }
  auto try_fit = [&](Phase p) -> std::optional<ScalingFit> {
    try {
      return fit_scaling(out.run, p, resolution);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BelowClockResolution) throw;
      return std::nullopt;
    }
  };
  out.train_fit = try_fit(Phase::Train);
  out.test_fit = try_fit(Phase::Test);
  if (out.run.points.empty() || out.run.points.back().n_samples != out.full_n) {
    out.projected_full_train_s =
        out.train_fit ? extrapolate(*out.train_fit, out.full_n)
                      : project_train_time(out.run.points, out.full_n);
  }
  return out;
}

/// Moment-matched dataset at full scale, timed at quartile fractions.
inline std::vector<TimingSummary> bench_realworld(const MomentSpec& spec,
                                                  std::span<const Algorithm> algorithms,
                                                  const BenchOptions& opts,
                                                  std::span<const double> fractions = {},
                                                  double resolution = 0.0) {
  const auto fm = gen_feature_dataset(spec);
  const auto grid = fractions.empty() ? quartile_fractions()
                                      : std::vector<double>(fractions.begin(), fractions.end());
  std::vector<TimingSummary> out;
  for (auto a : algorithms) out.push_back(time_training(a, fm, grid, spec.seed, opts, resolution));
  return out;
}

inline void write_timing_csv(const std::vector<TimingSummary>& runs, const std::filesystem::path& path) {
  auto out = csv::open_for_write(path);
  out << kTimingCsvHeader << '\n';
  for (const auto& t : runs) {
    for (Phase phase : {Phase::Train, Phase::Test}) {
      for (const auto& p : t.run.points) {
        out << algorithm_name(t.run.algorithm) << ',' << phase_name(phase) << ','
            << csv::format(p.fraction) << ',' << p.n_samples << ','
            << csv::format(phase == Phase::Train ? p.train_s : p.test_s) << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace moveprim
