#pragma once

// Evaluation report documents and their JSON form.
//
// Non-finite numbers are not representable in JSON; they are written as the
// strings "inf" / "-inf" / "nan". Undefined values (a PPV with no
// predictions, say) are written as null.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "classifier.hpp"
#include "core_types.hpp"
#include "metrics.hpp"

namespace moveprim {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline nlohmann::json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw Error(ErrorCode::InvalidArgument, "not a number: '" + s + "'");
  }
  return j.get<double>();
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? number_json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return number_from_json(j);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Summary statistics

/// Mean and sample standard deviation over the defined values of a series.
struct MeanStd {
  std::optional<double> mean;
  double std = 0.0;
  std::size_t n = 0;  // defined values

  static MeanStd of(const std::vector<std::optional<double>>& values) {
    MeanStd out;
    double sum = 0.0;
    for (const auto& v : values) {
      if (!v) continue;
      sum += *v;
      ++out.n;
    }
    if (out.n == 0) return out;
    const double mean = sum / static_cast<double>(out.n);
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - mean) * (*v - mean);
    }
    out.mean = mean;
    out.std = out.n > 1 ? std::sqrt(ss / static_cast<double>(out.n - 1)) : 0.0;
    return out;
  }

  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

inline void to_json(nlohmann::json& j, const MeanStd& m) {
  j = {{"mean", detail::optional_json(m.mean)}, {"std", m.std}, {"n", m.n}};
}

inline void from_json(const nlohmann::json& j, MeanStd& m) {
  m.mean = detail::optional_from_json(j.at("mean"));
  m.std = j.at("std").get<double>();
  m.n = j.at("n").get<std::size_t>();
}

using PerPrimitive = std::array<MeanStd, kNumClasses>;

inline nlohmann::json per_primitive_json(const PerPrimitive& p) {
  nlohmann::json j = nlohmann::json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    j[std::string(label_name(label_from_code(k)))] = p[static_cast<std::size_t>(k)];
  }
  return j;
}

inline PerPrimitive per_primitive_from_json(const nlohmann::json& j) {
  PerPrimitive p;
  for (int k = 0; k < kNumClasses; ++k) {
    p[static_cast<std::size_t>(k)] = j.at(std::string(label_name(label_from_code(k)))).get<MeanStd>();
  }
  return p;
}

// ---------------------------------------------------------------------------
// ROC and confusion JSON

inline nlohmann::json roc_json(const RocCurve& c) {
  nlohmann::json fpr = nlohmann::json::array();
  nlohmann::json tpr = nlohmann::json::array();
  nlohmann::json thr = nlohmann::json::array();
  for (const auto& p : c.points) {
    fpr.push_back(p.fpr);
    tpr.push_back(p.tpr);
    thr.push_back(detail::number_json(p.threshold));
  }
  return {{"fpr", fpr}, {"tpr", tpr}, {"threshold", thr}, {"auc", c.auc},
          {"operating_point", c.operating_point}};
}

inline RocCurve roc_from_json(const nlohmann::json& j) {
  RocCurve c;
  const auto& fpr = j.at("fpr");
  const auto& tpr = j.at("tpr");
  const auto& thr = j.at("threshold");
  for (std::size_t i = 0; i < fpr.size(); ++i) {
    c.points.push_back({fpr[i].get<double>(), tpr[i].get<double>(), detail::number_from_json(thr[i])});
  }
  c.auc = j.at("auc").get<double>();
  c.operating_point = j.at("operating_point").get<std::size_t>();
  return c;
}

inline nlohmann::json confusion_json(const Confusion& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : c.counts) rows.push_back(row);
  return rows;
}

inline Confusion confusion_from_json(const nlohmann::json& j) {
  Confusion c;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    for (std::size_t k = 0; k < c.counts[i].size(); ++k) c.counts[i][k] = j.at(i).at(k).get<std::size_t>();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Report sections

struct AlgorithmSummary {
  Algorithm algorithm = Algorithm::Lda;
  PerPrimitive per_primitive_ppv;
  MeanStd overall_ppv;
  PerPrimitive auc;                         // per-repeat AUCs
  std::array<RocCurve, kNumClasses> roc;    // pooled over repeats
  Confusion confusion;                      // summed over repeats
  std::vector<std::optional<double>> overall_ppv_by_repeat;
  PerPrimitive window_per_primitive_ppv;
  MeanStd window_overall_ppv;

  friend bool operator==(const AlgorithmSummary&, const AlgorithmSummary&) = default;
};

struct TuningEntry {
  Algorithm algorithm = Algorithm::Lda;
  std::vector<std::string> parameters;
  std::string domain_knowledge;  // low | medium | high

  std::size_t parameter_count() const { return parameters.size(); }
  friend bool operator==(const TuningEntry&, const TuningEntry&) = default;
};

/// Tuning requirements of each algorithm family, one entry per algorithm.
inline std::vector<TuningEntry> tuning_table() {
  return {
      {Algorithm::Lda, {"prior probability", "regularization term", "optimizer"}, "medium"},
      {Algorithm::Nbc, {"selection of prior distribution"}, "low"},
      {Algorithm::Svm,
       {"kernel function", "kernel scale", "kernel offset", "regularization term",
        "number of iterations", "nu", "prior probability", "convergence parameter", "optimizer"},
       "high"},
      {Algorithm::Knn,
       {"number of neighbors (k)", "distance metric", "search algorithm", "tie breaker",
        "weighting criterion"},
       "low"},
  };
}

struct AblationStep {
  SensorConfig config = SensorConfig::all();
  std::optional<double> overall_ppv;
  std::array<std::optional<double>, kNumClasses> per_primitive_ppv{};

  friend bool operator==(const AblationStep& a, const AblationStep& b) {
    return a.config == b.config && a.overall_ppv == b.overall_ppv &&
           a.per_primitive_ppv == b.per_primitive_ppv;
  }
};

enum class Phase : std::uint8_t { Train, Test };

constexpr std::string_view phase_name(Phase p) { return p == Phase::Train ? "train" : "test"; }

struct TimingPoint {
  double fraction = 0.0;
  std::size_t n_samples = 0;
  double train_s = 0.0;  // median wall-clock fit time
  double test_s = 0.0;   // median per-sample predict time

  friend bool operator==(const TimingPoint&, const TimingPoint&) = default;
};

struct TimingRun {
  Algorithm algorithm = Algorithm::Lda;
  std::vector<TimingPoint> points;
  int reps = 1;
  std::uint64_t seed = 0;

  friend bool operator==(const TimingRun&, const TimingRun&) = default;
};

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;

  friend bool operator==(const ScalingFit&, const ScalingFit&) = default;
};

struct TimingSummary {
  TimingRun run;
  std::optional<ScalingFit> train_fit;  // empty when below clock resolution
  std::optional<ScalingFit> test_fit;
  std::size_t full_n = 0;                       // size of the full dataset
  std::optional<double> projected_full_train_s;  // when the full size was not run
  bool exceeds_wall = false;

  friend bool operator==(const TimingSummary&, const TimingSummary&) = default;
};

struct EvalReport {
  int schema_version = kReportSchemaVersion;
  nlohmann::json config = nlohmann::json::object();
  std::vector<AlgorithmSummary> algorithms;
  std::vector<TimingSummary> timings;
  double clock_resolution_s = 0.0;
  std::vector<AblationStep> ablation;
  std::vector<std::string> notes;

  const AlgorithmSummary* find(Algorithm a) const {
    for (const auto& s : algorithms) {
      if (s.algorithm == a) return &s;
    }
    return nullptr;
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline Algorithm algorithm_from_json(const nlohmann::json& j) {
  const auto name = j.get<std::string>();
  const auto a = parse_algorithm(name);
  if (!a) throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + name + "'");
  return *a;
}

inline std::string algo_key(Algorithm a) { return std::string(algorithm_name(a)); }

inline nlohmann::json ablation_json(const std::vector<AblationStep>& steps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : steps) {
    nlohmann::json per = nlohmann::json::object();
    for (int k = 0; k < kNumClasses; ++k) {
      per[std::string(label_name(label_from_code(k)))] =
          detail::optional_json(s.per_primitive_ppv[static_cast<std::size_t>(k)]);
    }
    arr.push_back({{"sites", s.config.sites_string()},
                   {"kind", std::string(kind_name(s.config.kind()))},
                   {"n_sensors", s.config.sites().size()},
                   {"overall_ppv", detail::optional_json(s.overall_ppv)},
                   {"per_primitive_ppv", per}});
  }
  return arr;
}

inline std::vector<AblationStep> ablation_from_json(const nlohmann::json& j) {
  std::vector<AblationStep> steps;
  for (const auto& e : j) {
    const auto kind = parse_kind(e.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown data kind in report");
    AblationStep s;
    s.config = SensorConfig::create(parse_site_list(e.at("sites").get<std::string>()), *kind);
    s.overall_ppv = detail::optional_from_json(e.at("overall_ppv"));
    for (int k = 0; k < kNumClasses; ++k) {
      s.per_primitive_ppv[static_cast<std::size_t>(k)] = detail::optional_from_json(
          e.at("per_primitive_ppv").at(std::string(label_name(label_from_code(k)))));
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

inline nlohmann::json timing_json(const TimingSummary& t) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : t.run.points) {
    pts.push_back({{"fraction", p.fraction}, {"n_samples", p.n_samples}, {"train_s", p.train_s},
                   {"test_s", p.test_s}});
  }
  auto fit = [](const std::optional<ScalingFit>& f) -> nlohmann::json {
    if (!f) return nullptr;
    return {{"slope", f->slope}, {"intercept", f->intercept}, {"r2", f->r2}};
  };
  return {{"algorithm", algo_key(t.run.algorithm)},
          {"reps", t.run.reps},
          {"seed", t.run.seed},
          {"points", pts},
          {"train_fit", fit(t.train_fit)},
          {"test_fit", fit(t.test_fit)},
          {"full_n", t.full_n},
          {"projected_full_train_s", detail::optional_json(t.projected_full_train_s)},
          {"exceeds_wall", t.exceeds_wall}};
}

inline TimingSummary timing_from_json(const nlohmann::json& j) {
  TimingSummary t;
  t.run.algorithm = algorithm_from_json(j.at("algorithm"));
  t.run.reps = j.at("reps").get<int>();
  t.run.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("points")) {
    t.run.points.push_back({p.at("fraction").get<double>(), p.at("n_samples").get<std::size_t>(),
                            p.at("train_s").get<double>(), p.at("test_s").get<double>()});
  }
  auto fit = [](const nlohmann::json& f) -> std::optional<ScalingFit> {
    if (f.is_null()) return std::nullopt;
    return ScalingFit{f.at("slope").get<double>(), f.at("intercept").get<double>(),
                      f.at("r2").get<double>()};
  };
  t.train_fit = fit(j.at("train_fit"));
  t.test_fit = fit(j.at("test_fit"));
  t.full_n = j.at("full_n").get<std::size_t>();
  t.projected_full_train_s = detail::optional_from_json(j.at("projected_full_train_s"));
  t.exceeds_wall = j.at("exceeds_wall").get<bool>();
  return t;
}

/// Top-level keys follow the published report layout; per-algorithm blocks
/// are keyed by algorithm name.
inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["config"] = r.config;
  j["algorithms"] = nlohmann::json::array();
  j["per_primitive_ppv"] = nlohmann::json::object();
  j["overall_ppv"] = nlohmann::json::object();
  j["roc"] = nlohmann::json::object();
  j["auc"] = nlohmann::json::object();
  j["operating_points"] = nlohmann::json::object();
  j["confusion"] = nlohmann::json::object();
  j["window_level"] = nlohmann::json::object();
  for (const auto& s : r.algorithms) {
    const auto key = algo_key(s.algorithm);
    j["algorithms"].push_back(key);
    j["per_primitive_ppv"][key] = per_primitive_json(s.per_primitive_ppv);
    nlohmann::json by_repeat = nlohmann::json::array();
    for (const auto& v : s.overall_ppv_by_repeat) by_repeat.push_back(detail::optional_json(v));
    j["overall_ppv"][key] = s.overall_ppv;
    j["overall_ppv"][key]["by_repeat"] = by_repeat;
    nlohmann::json roc = nlohmann::json::object();
    nlohmann::json ops = nlohmann::json::object();
    for (int k = 0; k < kNumClasses; ++k) {
      const auto name = std::string(label_name(label_from_code(k)));
      const auto& curve = s.roc[static_cast<std::size_t>(k)];
      roc[name] = roc_json(curve);
      if (curve.empty()) {
        ops[name] = nullptr;
      } else {
        const auto& p = curve.optimal();
        ops[name] = {{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", detail::number_json(p.threshold)}};
      }
    }
    j["roc"][key] = roc;
    j["auc"][key] = per_primitive_json(s.auc);
    j["operating_points"][key] = ops;
    j["confusion"][key] = confusion_json(s.confusion);
    j["window_level"][key] = {{"per_primitive_ppv", per_primitive_json(s.window_per_primitive_ppv)},
                              {"overall_ppv", s.window_overall_ppv}};
  }
  nlohmann::json timings = nlohmann::json::object();
  timings["clock_resolution_s"] = r.clock_resolution_s;
  timings["runs"] = nlohmann::json::array();
  for (const auto& t : r.timings) timings["runs"].push_back(timing_json(t));
  j["timings"] = timings;
  nlohmann::json tuning = nlohmann::json::object();
  for (const auto& e : tuning_table()) {
    tuning[algo_key(e.algorithm)] = {{"parameter_count", e.parameter_count()},
                                     {"parameters", e.parameters},
                                     {"domain_knowledge", e.domain_knowledge}};
  }
  j["tuning_metadata"] = tuning;
  j["ablation"] = ablation_json(r.ablation);
  j["notes"] = r.notes;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion) {
    throw Error(ErrorCode::InvalidArgument,
                "unsupported report schema version " + std::to_string(r.schema_version));
  }
  r.config = j.at("config");
  for (const auto& name : j.at("algorithms")) {
    AlgorithmSummary s;
    s.algorithm = algorithm_from_json(name);
    const auto key = algo_key(s.algorithm);
    s.per_primitive_ppv = per_primitive_from_json(j.at("per_primitive_ppv").at(key));
    const auto& overall = j.at("overall_ppv").at(key);
    s.overall_ppv = overall.get<MeanStd>();
    for (const auto& v : overall.at("by_repeat")) s.overall_ppv_by_repeat.push_back(detail::optional_from_json(v));
    for (int k = 0; k < kNumClasses; ++k) {
      const auto label = std::string(label_name(label_from_code(k)));
      s.roc[static_cast<std::size_t>(k)] = roc_from_json(j.at("roc").at(key).at(label));
    }
    s.auc = per_primitive_from_json(j.at("auc").at(key));
    s.confusion = confusion_from_json(j.at("confusion").at(key));
    const auto& w = j.at("window_level").at(key);
    s.window_per_primitive_ppv = per_primitive_from_json(w.at("per_primitive_ppv"));
    s.window_overall_ppv = w.at("overall_ppv").get<MeanStd>();
    r.algorithms.push_back(std::move(s));
  }
  const auto& timings = j.at("timings");
  r.clock_resolution_s = timings.at("clock_resolution_s").get<double>();
  for (const auto& t : timings.at("runs")) r.timings.push_back(timing_from_json(t));
  r.ablation = ablation_from_json(j.at("ablation"));
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

}  // namespace moveprim
