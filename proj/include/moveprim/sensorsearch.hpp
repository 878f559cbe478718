#pragma once

// Sensor ablation: the hand-ordered removal path, exhaustive subset search and
// IMU-versus-accelerometer comparison. Every configuration is scored by an
// evaluator (normally run_experiment with one algorithm); splits depend only
// on (seed, repeat), so configurations are compared on identical segments.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "core_types.hpp"
#include "csv.hpp"
#include "eval.hpp"
#include "parallel.hpp"
#include "report.hpp"

namespace moveprim {

inline constexpr std::string_view kSearchCsvHeader =
    "sites,kind,n_sensors,overall_ppv,reach_ppv,transport_ppv,reposition_ppv,idle_ppv";

using Evaluator = std::function<AblationStep(const SensorConfig&)>;

/// 11 -> 7 -> 5 -> 4 -> 3 -> 2 -> 1 sensors: drop the non-active arm, then
/// sternum and pelvis, then head, then the active scapula, arm and hand,
/// leaving the active forearm.
inline std::vector<SensorConfig> domain_knowledge_path(Side active, DataKind kind = DataKind::Imu) {
  const bool right = active == Side::Right;
  const SensorSite scapula = right ? SensorSite::RScapula : SensorSite::LScapula;
  const SensorSite arm = right ? SensorSite::RArm : SensorSite::LArm;
  const SensorSite forearm = right ? SensorSite::RForearm : SensorSite::LForearm;
  const SensorSite hand = right ? SensorSite::RHand : SensorSite::LHand;
  const std::vector<std::vector<SensorSite>> steps = {
      {kAllSites.begin(), kAllSites.end()},
      {SensorSite::Head, SensorSite::Sternum, SensorSite::Pelvis, scapula, arm, forearm, hand},
      {SensorSite::Head, scapula, arm, forearm, hand},
      {scapula, arm, forearm, hand},
      {arm, forearm, hand},
      {forearm, hand},
      {forearm},
  };
  std::vector<SensorConfig> out;
  for (const auto& s : steps) out.push_back(SensorConfig::create(s, kind));
  return out;
}

/// Evaluator running the full protocol with a single algorithm.
inline Evaluator make_evaluator(const Dataset& d, const WindowSpec& spec, const SplitPlan& plan,
                                Algorithm algorithm = Algorithm::Lda,
                                ExperimentOptions opts = {}) {
  return [&d, spec, plan, algorithm, opts](const SensorConfig& config) {
    const std::array<Algorithm, 1> algos = {algorithm};
    const auto report = run_experiment(d, config, spec, algos, plan, opts);
    const auto& s = report.algorithms.front();
    AblationStep step;
    step.config = config;
    step.overall_ppv = s.overall_ppv.mean;
    for (int k = 0; k < kNumClasses; ++k) {
      step.per_primitive_ppv[static_cast<std::size_t>(k)] = s.per_primitive_ppv[static_cast<std::size_t>(k)].mean;
    }
    return step;
  };
}

inline std::vector<AblationStep> evaluate_all(const std::vector<SensorConfig>& configs,
                                              const Evaluator& evaluate, int threads = 1) {
  std::vector<AblationStep> steps(configs.size());
  parallel_for(configs.size(), threads, [&](std::size_t i) { steps[i] = evaluate(configs[i]); });
  return steps;
}

struct SearchResult {
  std::vector<AblationStep> steps;
  std::size_t best = 0;  // index into steps
  std::size_t evaluations = 0;

  const AblationStep& best_step() const { return steps.at(best); }
};

/// Highest overall PPV; ties go to fewer sensors, then to the lower site mask.
inline std::size_t best_index(const std::vector<AblationStep>& steps) {
  if (steps.empty()) throw Error(ErrorCode::InvalidArgument, "no configurations evaluated");
  auto key = [](const AblationStep& s) { return s.overall_ppv.value_or(-1.0); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    const auto& a = steps[i];
    const auto& b = steps[best];
    if (key(a) != key(b)) {
      if (key(a) > key(b)) best = i;
    } else if (a.config.size() != b.config.size()) {
      if (a.config.size() < b.config.size()) best = i;
    } else if (a.config.mask() < b.config.mask()) {
      best = i;
    }
  }
  return best;
}

/// All 2^n - 1 non-empty subsets of `whitelist` (all 11 sites when empty),
/// in increasing site-mask order.
inline std::vector<SensorConfig> enumerate_subsets(std::vector<SensorSite> whitelist, DataKind kind) {
  if (whitelist.empty()) whitelist.assign(kAllSites.begin(), kAllSites.end());
  std::sort(whitelist.begin(), whitelist.end());
  if (std::adjacent_find(whitelist.begin(), whitelist.end()) != whitelist.end()) {
    throw Error(ErrorCode::InvalidArgument, "whitelist lists a site twice");
  }
  std::vector<std::uint16_t> masks;
  const std::uint32_t n = static_cast<std::uint32_t>(whitelist.size());
  for (std::uint32_t sub = 1; sub < (1u << n); ++sub) {
    std::uint16_t mask = 0;
    for (std::uint32_t b = 0; b < n; ++b) {
      if (sub & (1u << b)) mask |= static_cast<std::uint16_t>(1u << site_index(whitelist[b]));
    }
    masks.push_back(mask);
  }
  std::sort(masks.begin(), masks.end());
  std::vector<SensorConfig> out;
  out.reserve(masks.size());
  for (auto m : masks) out.push_back(SensorConfig::from_mask(m, kind));
  return out;
}

/// Evaluate every subset; `budget` caps the number of evaluations.
inline SearchResult exhaustive_search(const std::vector<SensorSite>& whitelist, DataKind kind,
                                      const Evaluator& evaluate,
                                      std::optional<std::size_t> budget = std::nullopt,
                                      int threads = 1) {
  const auto configs = enumerate_subsets(whitelist, kind);
  if (budget && configs.size() > *budget) {
    throw Error(ErrorCode::BudgetExceeded, std::to_string(configs.size()) +
                                               " configurations exceed the budget of " +
                                               std::to_string(*budget));
  }
  SearchResult r;
  r.steps = evaluate_all(configs, evaluate, threads);
  r.evaluations = configs.size();
  r.best = best_index(r.steps);
  return r;
}

struct KindComparison {
  AblationStep imu;
  AblationStep accelerometer;
};

/// Each configuration scored twice, as IMU and as accelerometer-only.
inline std::vector<KindComparison> compare_data_kinds(const std::vector<SensorConfig>& configs,
                                                      const Evaluator& evaluate, int threads = 1) {
  std::vector<SensorConfig> both;
  for (const auto& c : configs) {
    both.push_back(c.with_kind(DataKind::Imu));
    both.push_back(c.with_kind(DataKind::Accelerometer));
  }
  const auto steps = evaluate_all(both, evaluate, threads);
  std::vector<KindComparison> out;
  for (std::size_t i = 0; i < configs.size(); ++i) out.push_back({steps[2 * i], steps[2 * i + 1]});
  return out;
}

inline void write_search_csv(const std::vector<AblationStep>& steps, const std::filesystem::path& path) {
  auto out = csv::open_for_write(path);
  out << kSearchCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); };
  for (const auto& s : steps) {
    out << s.config.sites_string() << ',' << kind_name(s.config.kind()) << ',' << s.config.size()
        << ',' << opt(s.overall_ppv);
    for (const auto& p : s.per_primitive_ppv) out << ',' << opt(p);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace moveprim
