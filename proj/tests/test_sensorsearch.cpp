#include <moveprim/sensorsearch.hpp>
#include <moveprim/synth.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace moveprim;

namespace {

using Sites = std::set<SensorSite>;

Sites sites_of(const SensorConfig& c) { return {c.sites().begin(), c.sites().end()}; }

// Power set by recursion over the list, independent of bit masks.
void power_set(const std::vector<SensorSite>& list, std::size_t i, Sites current, std::vector<Sites>& out) {
  if (i == list.size()) {
    if (!current.empty()) out.push_back(current);
    return;
  }
  power_set(list, i + 1, current, out);
  current.insert(list[i]);
  power_set(list, i + 1, current, out);
}

// A deterministic score depending only on the site set, with deliberate ties.
double fake_score(const Sites& s) {
  double v = 0.0;
  for (auto site : s) v += (site_index(site) % 3 == 0) ? 0.1 : 0.05;
  return std::min(v, 0.3);
}

Evaluator fake_evaluator(std::atomic<int>* calls = nullptr) {
  return [calls](const SensorConfig& c) {
    if (calls) ++*calls;
    AblationStep s;
    s.config = c;
    s.overall_ppv = fake_score(sites_of(c));
    s.per_primitive_ppv = {0.1, 0.2, std::nullopt, 0.4};
    return s;
  };
}

Dataset small_dataset() {
  SignalGenSpec spec;
  spec.counts = {24, 24, 24, 24};
  spec.subjects = 2;
  spec.trials = 2;
  spec.seed = 12;
  return gen_signal_dataset(spec);
}

const std::vector<SensorSite> kFourActive = {SensorSite::RScapula, SensorSite::RArm, SensorSite::RForearm,
                                             SensorSite::RHand};

}  // namespace

TEST(DomainPath, RightActive) {
  const auto path = domain_knowledge_path(Side::Right);
  ASSERT_EQ(path.size(), 7u);
  const std::vector<std::size_t> sizes = {11, 7, 5, 4, 3, 2, 1};
  for (std::size_t i = 0; i < path.size(); ++i) EXPECT_EQ(path[i].size(), sizes[i]);
  EXPECT_EQ(sites_of(path[1]), (Sites{SensorSite::Head, SensorSite::Sternum, SensorSite::Pelvis, SensorSite::RScapula,
                                      SensorSite::RArm, SensorSite::RForearm, SensorSite::RHand}));
  EXPECT_EQ(sites_of(path.back()), Sites{SensorSite::RForearm});
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto prev = sites_of(path[i - 1]);
    for (auto s : sites_of(path[i])) EXPECT_TRUE(prev.count(s));
  }
}

TEST(DomainPath, LeftIsMirror) {
  const std::map<SensorSite, SensorSite> mirror = {
      {SensorSite::RScapula, SensorSite::LScapula}, {SensorSite::RArm, SensorSite::LArm},
      {SensorSite::RForearm, SensorSite::LForearm}, {SensorSite::RHand, SensorSite::LHand},
      {SensorSite::LScapula, SensorSite::RScapula}, {SensorSite::LArm, SensorSite::RArm},
      {SensorSite::LForearm, SensorSite::RForearm}, {SensorSite::LHand, SensorSite::RHand}};
  const auto right = domain_knowledge_path(Side::Right);
  const auto left = domain_knowledge_path(Side::Left);
  ASSERT_EQ(right.size(), left.size());
  for (std::size_t i = 0; i < right.size(); ++i) {
    Sites mirrored;
    for (auto s : sites_of(right[i])) mirrored.insert(mirror.count(s) ? mirror.at(s) : s);
    EXPECT_EQ(mirrored, sites_of(left[i]));
  }
}

TEST(Exhaustive, ThreeSitesSevenConfigs) {
  std::atomic<int> calls = 0;
  const auto r = exhaustive_search({SensorSite::Head, SensorSite::RArm, SensorSite::LHand}, DataKind::Imu,
                                   fake_evaluator(&calls));
  EXPECT_EQ(r.evaluations, 7u);
  EXPECT_EQ(r.steps.size(), 7u);
  EXPECT_EQ(calls.load(), 7);
}

TEST(Exhaustive, FourSitesMatchIndependentEnumerator) {
  std::atomic<int> calls = 0;
  const auto r = exhaustive_search(kFourActive, DataKind::Imu, fake_evaluator(&calls));
  std::vector<Sites> expected;
  power_set(kFourActive, 0, {}, expected);
  ASSERT_EQ(expected.size(), 15u);
  EXPECT_EQ(calls.load(), 15);
  std::set<Sites> seen;
  for (const auto& s : r.steps) {
    EXPECT_TRUE(seen.insert(sites_of(s.config)).second) << "evaluated twice";
    EXPECT_EQ(s.overall_ppv, fake_score(sites_of(s.config)));
  }
  EXPECT_EQ(seen, std::set<Sites>(expected.begin(), expected.end()));

  // Brute-force argmax: highest score, then fewest sites, then the lowest
  // site indices compared from the highest index down.
  const Sites* best = nullptr;
  for (const auto& s : expected) {
    if (!best) {
      best = &s;
      continue;
    }
    const double a = fake_score(s);
    const double b = fake_score(*best);
    if (a != b) {
      if (a > b) best = &s;
      continue;
    }
    if (s.size() != best->size()) {
      if (s.size() < best->size()) best = &s;
      continue;
    }
    unsigned ma = 0, mb = 0;
    for (auto x : s) ma |= 1u << site_index(x);
    for (auto x : *best) mb |= 1u << site_index(x);
    if (ma < mb) best = &s;
  }
  EXPECT_EQ(sites_of(r.best_step().config), *best);
  for (const auto& s : r.steps) EXPECT_LE(*s.overall_ppv, *r.best_step().overall_ppv);
}

TEST(Exhaustive, AllSites2047) {
  std::atomic<int> calls = 0;
  const auto r = exhaustive_search({}, DataKind::Accelerometer, fake_evaluator(&calls));
  EXPECT_EQ(r.evaluations, 2047u);
  EXPECT_EQ(calls.load(), 2047);
  std::set<std::uint16_t> masks;
  for (const auto& s : r.steps) {
    masks.insert(s.config.mask());
    EXPECT_EQ(s.config.kind(), DataKind::Accelerometer);
  }
  EXPECT_EQ(masks.size(), 2047u);
}

TEST(Exhaustive, BudgetExceeded) {
  std::atomic<int> calls = 0;
  try {
    exhaustive_search(kFourActive, DataKind::Imu, fake_evaluator(&calls), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
  EXPECT_EQ(calls.load(), 0);
  EXPECT_NO_THROW(exhaustive_search(kFourActive, DataKind::Imu, fake_evaluator(), 15));
}

TEST(Exhaustive, ThreadsDoNotChangeResult) {
  const auto a = exhaustive_search(kFourActive, DataKind::Imu, fake_evaluator(), std::nullopt, 1);
  const auto b = exhaustive_search(kFourActive, DataKind::Imu, fake_evaluator(), std::nullopt, 3);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_EQ(a.best, b.best);
}

TEST(BestIndex, TiesFavorFewerSensorsThenCanonicalOrder) {
  auto step = [](std::vector<SensorSite> s, double ppv) {
    AblationStep a;
    a.config = SensorConfig::create(std::move(s), DataKind::Imu);
    a.overall_ppv = ppv;
    return a;
  };
  const std::vector<AblationStep> steps = {
      step({SensorSite::Head, SensorSite::RHand}, 0.9),
      step({SensorSite::RHand}, 0.9),
      step({SensorSite::Head}, 0.9),
      step({SensorSite::RArm}, 0.8),
  };
  EXPECT_EQ(best_index(steps), 2u);
}

TEST(BestIndex, UndefinedRanksLowest) {
  AblationStep a;
  a.config = SensorConfig::create({SensorSite::Head}, DataKind::Imu);
  AblationStep b;
  b.config = SensorConfig::create({SensorSite::RHand, SensorSite::RArm}, DataKind::Imu);
  b.overall_ppv = 0.0;
  EXPECT_EQ(best_index({a, b}), 1u);
}

TEST(KindColumns, AccelerometerIsStrictSubset) {
  for (const auto& cfg : domain_knowledge_path(Side::Right)) {
    const auto imu_cols = channel_columns(cfg.with_kind(DataKind::Imu));
    const auto acc_cols = channel_columns(cfg.with_kind(DataKind::Accelerometer));
    const std::set<int> imu(imu_cols.begin(), imu_cols.end());
    EXPECT_LT(acc_cols.size(), imu_cols.size());
    for (int c : acc_cols) EXPECT_TRUE(imu.count(c));
    const auto imu_names = feature_names(cfg.with_kind(DataKind::Imu));
    const auto acc_names = feature_names(cfg.with_kind(DataKind::Accelerometer));
    const std::set<std::string> names(imu_names.begin(), imu_names.end());
    EXPECT_LT(acc_names.size(), imu_names.size());
    for (const auto& n : acc_names) EXPECT_TRUE(names.count(n)) << n;
  }
}

TEST(RealEvaluator, DomainStepsAgreeWithExhaustive) {
  const auto d = small_dataset();
  SplitPlan plan;
  plan.repeats = 1;
  plan.seed = 5;
  const auto eval = make_evaluator(d, WindowSpec{}, plan, Algorithm::Lda);
  const auto r = exhaustive_search(kFourActive, DataKind::Imu, eval);
  ASSERT_EQ(r.steps.size(), 15u);
  const auto path = domain_knowledge_path(Side::Right);
  for (std::size_t i = 3; i < path.size(); ++i) {
    const auto it = std::find_if(r.steps.begin(), r.steps.end(),
                                 [&](const AblationStep& s) { return s.config == path[i]; });
    ASSERT_NE(it, r.steps.end());
    EXPECT_EQ(*it, eval(path[i]));
  }
}

TEST(CompareKinds, PairsAndDeterminism) {
  const auto d = small_dataset();
  SplitPlan plan;
  plan.repeats = 1;
  plan.seed = 6;
  const auto eval = make_evaluator(d, WindowSpec{}, plan, Algorithm::Lda);
  const std::vector<SensorConfig> configs = {SensorConfig::create({SensorSite::RForearm, SensorSite::RHand}, DataKind::Imu)};
  const auto a = compare_data_kinds(configs, eval);
  const auto b = compare_data_kinds(configs, eval, 2);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].imu.config.kind(), DataKind::Imu);
  EXPECT_EQ(a[0].accelerometer.config.kind(), DataKind::Accelerometer);
  EXPECT_EQ(a[0].imu.config.sites(), a[0].accelerometer.config.sites());
  EXPECT_EQ(a[0].imu, b[0].imu);
  EXPECT_EQ(a[0].accelerometer, b[0].accelerometer);
}

TEST(SearchCsv, HeaderAndRows) {
  const auto r = exhaustive_search({SensorSite::Head, SensorSite::RArm}, DataKind::Imu, fake_evaluator());
  const auto path = std::filesystem::temp_directory_path() / "moveprim_search_test.csv";
  write_search_csv(r.steps, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kSearchCsvHeader);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NE(rows[2].find("Head;RArm,imu,2,"), std::string::npos) << rows[2];
  // undefined PPV becomes an empty field
  EXPECT_NE(rows[0].find(",0.2,,0.4"), std::string::npos) << rows[0];
  std::filesystem::remove(path);
}
