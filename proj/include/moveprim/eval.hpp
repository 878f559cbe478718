#pragma once

// Evaluation protocol: repeated stratified train/test splits over labeled
// segments, window-level training, segment-level voting and scoring.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "classifiers.hpp"
#include "core_types.hpp"
#include "features.hpp"
#include "metrics.hpp"
#include "report.hpp"
#include "rng.hpp"

namespace moveprim {

struct SplitPlan {
  double train_frac = 0.6;
  int repeats = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
    }
    if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "at least one repeat is required");
  }
};

struct Split {
  std::vector<std::size_t> train;  // sorted global segment ids
  std::vector<std::size_t> test;
};

using SegmentsByLabel = std::array<std::vector<std::size_t>, kNumClasses>;

inline SegmentsByLabel segments_by_label(const Dataset& d) {
  SegmentsByLabel out;
  std::size_t id = 0;
  for (const auto& r : d.recordings) {
    for (const auto& s : r.segments) out[static_cast<std::size_t>(code(s.label))].push_back(id++);
  }
  return out;
}

/// Per label, round(train_frac * n) segments drawn uniformly at random for
/// training; the rest are test. The draw depends only on (seed, repeat), so
/// every sensor configuration and algorithm sees the same split. Labels with
/// no segments are skipped.
inline Split stratified_split(const SegmentsByLabel& by_label, const SplitPlan& plan,
                              int repeat_index) {
  plan.validate();
  Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(repeat_index)));
  Split out;
  for (int k = 0; k < kNumClasses; ++k) {
    auto ids = by_label[static_cast<std::size_t>(k)];
    if (ids.empty()) continue;
    if (ids.size() < 2) {
      throw Error(ErrorCode::LabelTooSmall, std::string("label '") +
                                                std::string(label_name(label_from_code(k))) +
                                                "' has fewer than 2 segments");
    }
    std::sort(ids.begin(), ids.end());
    const auto n = static_cast<double>(ids.size());
    auto n_train = static_cast<std::size_t>(std::round(plan.train_frac * n));
    n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
    rng.shuffle(std::span<std::size_t>(ids));
    out.train.insert(out.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---------------------------------------------------------------------------
// Segment voting

struct SegmentPrediction {
  std::size_t segment = 0;
  int label = 0;
  ClassScores scores{};
};

/// Majority vote over each segment's windows; ties go to the tied class with
/// the greatest mean score (then the lowest code). Segment scores are the mean
/// window scores. Every id in `segments` must own at least one window.
inline std::vector<SegmentPrediction> segment_vote(std::span<const int> window_labels,
                                                   const ScoreMatrix& window_scores,
                                                   std::span<const std::size_t> window_segment,
                                                   std::span<const std::size_t> segments) {
  if (window_labels.size() != window_segment.size() ||
      static_cast<std::size_t>(window_scores.rows()) != window_labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "window label, score and segment counts differ");
  }
  std::vector<SegmentPrediction> out(segments.size());
  std::vector<std::array<int, kNumClasses>> votes(segments.size());
  std::vector<std::size_t> windows(segments.size(), 0);
  std::vector<std::size_t> order(segments.begin(), segments.end());
  std::sort(order.begin(), order.end());
  auto position = [&](std::size_t seg) -> std::ptrdiff_t {
    const auto it = std::lower_bound(order.begin(), order.end(), seg);
    if (it == order.end() || *it != seg) return -1;
    return it - order.begin();
  };
  std::vector<std::size_t> slot(order.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    slot[static_cast<std::size_t>(position(segments[i]))] = i;
  }
  for (std::size_t w = 0; w < window_segment.size(); ++w) {
    const auto p = position(window_segment[w]);
    if (p < 0) continue;
    const std::size_t i = slot[static_cast<std::size_t>(p)];
    const int label = window_labels[w];
    ++votes[i][static_cast<std::size_t>(label)];
    ++windows[i];
    for (int k = 0; k < kNumClasses; ++k) {
      out[i].scores[static_cast<std::size_t>(k)] += window_scores(static_cast<Eigen::Index>(w), k);
    }
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (windows[i] == 0) {
      throw Error(ErrorCode::SegmentWithoutWindows,
                  "segment " + std::to_string(segments[i]) + " has no windows");
    }
    auto& pred = out[i];
    pred.segment = segments[i];
    for (auto& s : pred.scores) s /= static_cast<double>(windows[i]);
    int best = 0;
    for (int k = 1; k < kNumClasses; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const auto bu = static_cast<std::size_t>(best);
      if (votes[i][ku] > votes[i][bu] ||
          (votes[i][ku] == votes[i][bu] && pred.scores[ku] > pred.scores[bu])) {
        best = k;
      }
    }
    pred.label = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment driver

struct ExperimentOptions {
  int threads = 1;
  ClassifierOptions classifiers;
};

/// Outcome of one algorithm on one repeat.
struct RepeatResult {
  Confusion segments;
  Confusion windows;
  std::vector<int> truth;                  // per test segment
  std::vector<ClassScores> scores;         // per test segment
};

inline nlohmann::json experiment_config_json(const SensorConfig& config, const WindowSpec& spec,
                                             std::span<const Algorithm> algorithms,
                                             const SplitPlan& plan) {
  nlohmann::json algos = nlohmann::json::array();
  for (auto a : algorithms) algos.push_back(algo_key(a));
  return {{"sites", config.sites_string()},
          {"kind", std::string(kind_name(config.kind()))},
          {"window_s", spec.width_s},
          {"stride_s", spec.stride_s},
          {"train_frac", plan.train_frac},
          {"repeats", plan.repeats},
          {"seed", plan.seed},
          {"algorithms", algos}};
}

struct TrainTest {
  LabeledSamples train;
  RowMatrix test;
  std::vector<int> test_labels;
  std::vector<std::size_t> test_segment;
};

/// Split a featurized dataset's windows by the segment they belong to.
inline TrainTest partition_windows(const FeatureMatrix& fm, const Split& split) {
  std::vector<char> is_train;
  std::size_t max_id = 0;
  for (auto s : fm.window_segment) max_id = std::max(max_id, s);
  is_train.assign(max_id + 1, 0);
  for (auto s : split.train) {
    if (s <= max_id) is_train[s] = 1;
  }
  std::vector<Eigen::Index> tr;
  std::vector<Eigen::Index> te;
  for (Eigen::Index w = 0; w < fm.windows(); ++w) {
    (is_train[fm.window_segment[static_cast<std::size_t>(w)]] ? tr : te).push_back(w);
  }
  TrainTest out;
  out.train.x.resize(static_cast<Eigen::Index>(tr.size()), fm.features());
  out.train.y.resize(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out.train.x.row(static_cast<Eigen::Index>(i)) = fm.x.row(tr[i]);
    out.train.y[i] = code(fm.window_label[static_cast<std::size_t>(tr[i])]);
  }
  out.test.resize(static_cast<Eigen::Index>(te.size()), fm.features());
  for (std::size_t i = 0; i < te.size(); ++i) {
    out.test.row(static_cast<Eigen::Index>(i)) = fm.x.row(te[i]);
    out.test_labels.push_back(code(fm.window_label[static_cast<std::size_t>(te[i])]));
    out.test_segment.push_back(fm.window_segment[static_cast<std::size_t>(te[i])]);
  }
  return out;
}

inline AlgorithmSummary summarize(Algorithm a, const std::vector<RepeatResult>& repeats) {
  AlgorithmSummary s;
  s.algorithm = a;
  std::array<std::vector<std::optional<double>>, kNumClasses> ppv_k;
  std::array<std::vector<std::optional<double>>, kNumClasses> win_ppv_k;
  std::array<std::vector<std::optional<double>>, kNumClasses> auc_k;
  std::vector<std::optional<double>> win_overall;
  std::array<std::vector<bool>, kNumClasses> pooled_truth;
  std::array<std::vector<double>, kNumClasses> pooled_scores;
  for (const auto& r : repeats) {
    s.confusion += r.segments;
    s.overall_ppv_by_repeat.push_back(overall_ppv(r.segments));
    win_overall.push_back(overall_ppv(r.windows));
    for (int k = 0; k < kNumClasses; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      ppv_k[ku].push_back(ppv(r.segments, k));
      win_ppv_k[ku].push_back(ppv(r.windows, k));
      std::vector<bool> truth_flags;
      std::vector<double> score_k;
      for (std::size_t i = 0; i < r.truth.size(); ++i) {
        truth_flags.push_back(r.truth[i] == k);
        score_k.push_back(ovr_margin(r.scores[i], k));
      }
      const std::size_t pos = static_cast<std::size_t>(std::count(truth_flags.begin(), truth_flags.end(), true));
      if (pos > 0 && pos < truth_flags.size()) {
        auc_k[ku].push_back(roc_curve(truth_flags, score_k).auc);
      } else {
        auc_k[ku].push_back(std::nullopt);
      }
      pooled_truth[ku].insert(pooled_truth[ku].end(), truth_flags.begin(), truth_flags.end());
      pooled_scores[ku].insert(pooled_scores[ku].end(), score_k.begin(), score_k.end());
    }
  }
  s.overall_ppv = MeanStd::of(s.overall_ppv_by_repeat);
  s.window_overall_ppv = MeanStd::of(win_overall);
  for (int k = 0; k < kNumClasses; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    s.per_primitive_ppv[ku] = MeanStd::of(ppv_k[ku]);
    s.window_per_primitive_ppv[ku] = MeanStd::of(win_ppv_k[ku]);
    s.auc[ku] = MeanStd::of(auc_k[ku]);
    const auto& truth = pooled_truth[ku];
    const std::size_t pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
    if (pos > 0 && pos < truth.size()) {
      s.roc[ku] = roc_curve(truth, pooled_scores[ku]);
    }
  }
  return s;
}

/// One repeat: split, fit normalization on the training segments, featurize,
/// then train and score every algorithm. Results are indexed like
/// `algorithms`.
inline std::vector<RepeatResult> run_repeat(const Dataset& d, const SensorConfig& config,
                                            const WindowSpec& spec,
                                            std::span<const Algorithm> algorithms,
                                            const SplitPlan& plan, int repeat,
                                            const ExperimentOptions& opts = {}) {
  const auto split = stratified_split(segments_by_label(d), plan, repeat);
  const auto norm = fit_norm_on_segments(d, config, split.train);
  const auto fm = featurize(d, config, spec, norm, opts.threads);
  auto tt = partition_windows(fm, split);
  std::vector<int> test_truth_by_segment;
  {
    const auto refs = enumerate_segments(d);
    for (auto id : split.test) {
      const auto& ref = refs[id];
      test_truth_by_segment.push_back(code(d.recordings[ref.recording].segments[ref.segment].label));
    }
  }
  auto train = std::make_shared<LabeledSamples>(std::move(tt.train));
  std::vector<RepeatResult> results;
  for (auto a : algorithms) {
    auto model = make_classifier(a, opts.classifiers);
    model->fit(train);
    std::vector<int> labels;
    ScoreMatrix scores;
    model->predict_batch(tt.test, labels, scores);
    RepeatResult r;
    for (std::size_t i = 0; i < labels.size(); ++i) r.windows.add(tt.test_labels[i], labels[i]);
    const auto segs = segment_vote(labels, scores, tt.test_segment, split.test);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      r.segments.add(test_truth_by_segment[i], segs[i].label);
      r.truth.push_back(test_truth_by_segment[i]);
      r.scores.push_back(segs[i].scores);
    }
    results.push_back(std::move(r));
  }
  return results;
}

/// The full protocol: `plan.repeats` independent splits, aggregated into mean
/// and sample standard deviation per metric. PPVs are computed over segments
/// (primitives); window-level figures are kept as diagnostics.
inline EvalReport run_experiment(const Dataset& d, const SensorConfig& config,
                                 const WindowSpec& spec, std::span<const Algorithm> algorithms,
                                 const SplitPlan& plan, const ExperimentOptions& opts = {}) {
  plan.validate();
  if (algorithms.empty()) throw Error(ErrorCode::InvalidArgument, "no algorithms requested");
  const auto counts = d.label_counts();
  for (int k = 0; k < kNumClasses; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw Error(ErrorCode::MissingClass, std::string("dataset has no '") +
                                               std::string(label_name(label_from_code(k))) +
                                               "' segments");
    }
  }
  std::vector<std::vector<RepeatResult>> per_algo(algorithms.size());
  for (int rep = 0; rep < plan.repeats; ++rep) {
    auto results = run_repeat(d, config, spec, algorithms, plan, rep, opts);
    for (std::size_t i = 0; i < results.size(); ++i) per_algo[i].push_back(std::move(results[i]));
  }
  EvalReport report;
  report.config = experiment_config_json(config, spec, algorithms, plan);
  for (std::size_t i = 0; i < algorithms.size(); ++i) {
    report.algorithms.push_back(summarize(algorithms[i], per_algo[i]));
  }
  report.notes.push_back(
      "ROC axes: false positive rate on x, true positive rate on y; operating point = point "
      "nearest (0,1).");
  report.notes.push_back("PPVs are segment-level (one vote per primitive); window-level PPVs are "
                         "diagnostics.");
  return report;
}

}  // namespace moveprim
