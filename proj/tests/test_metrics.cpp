#include <moveprim/metrics.hpp>
#include <moveprim/rng.hpp>

#include <gtest/gtest.h>

#include <limits>
#include <utility>
#include <vector>

#include "oracles.hpp"

using namespace moveprim;

namespace {

Confusion from_counts(const std::array<std::array<std::size_t, 4>, 4>& m) {
  Confusion c;
  c.counts = m;
  return c;
}

// Expands a confusion into (truth, predicted) pairs so counts can be re-tallied
// without touching the confusion accessors.
std::vector<std::pair<int, int>> pairs_of(const Confusion& c) {
  std::vector<std::pair<int, int>> out;
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      for (std::size_t i = 0; i < c.counts[t][p]; ++i) out.emplace_back(t, p);
    }
  }
  return out;
}

const std::array<std::array<std::size_t, 4>, 4> kHandBuilt = {{
    {40, 3, 5, 2},
    {4, 31, 1, 0},
    {6, 2, 45, 7},
    {0, 1, 3, 22},
}};

}  // namespace

TEST(Ppv, SimpleRatio) {
  Confusion c;
  for (int i = 0; i < 46; ++i) c.add(0, 0);
  for (int i = 0; i < 4; ++i) c.add(2, 0);
  ASSERT_TRUE(ppv(c, 0).has_value());
  EXPECT_DOUBLE_EQ(*ppv(c, 0), 0.92);
}

TEST(Ppv, DiagonalIsPerfect) {
  const auto c = from_counts({{{5, 0, 0, 0}, {0, 7, 0, 0}, {0, 0, 9, 0}, {0, 0, 0, 3}}});
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(*ppv(c, k), 1.0);
  EXPECT_DOUBLE_EQ(*overall_ppv(c), 1.0);
}

TEST(Ppv, UndefinedWhenNeverPredicted) {
  const auto c = from_counts({{{5, 0, 0, 0}, {0, 7, 0, 0}, {0, 0, 9, 0}, {0, 0, 2, 0}}});
  EXPECT_FALSE(ppv(c, 3).has_value());
  EXPECT_TRUE(ppv(c, 2).has_value());
}

TEST(Ppv, MatchesPairRecount) {
  const auto c = from_counts(kHandBuilt);
  const auto pairs = pairs_of(c);
  std::size_t tp_all = 0;
  std::size_t fp_all = 0;
  for (int k = 0; k < 4; ++k) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& [t, p] : pairs) {
      if (p != k) continue;
      (t == k ? tp : fp) += 1;
    }
    tp_all += tp;
    fp_all += fp;
    EXPECT_EQ(*ppv(c, k), static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  EXPECT_EQ(*overall_ppv(c), static_cast<double>(tp_all) / static_cast<double>(tp_all + fp_all));
  EXPECT_EQ(*overall_ppv(c), static_cast<double>(c.trace()) / static_cast<double>(c.total()));
}

TEST(SensitivitySpecificity, Perfect) {
  const auto c = from_counts({{{5, 0, 0, 0}, {0, 7, 0, 0}, {0, 0, 9, 0}, {0, 0, 0, 3}}});
  for (int k = 0; k < 4; ++k) {
    const auto s = sensitivity_specificity(c, k);
    EXPECT_DOUBLE_EQ(s.sensitivity, 1.0);
    EXPECT_DOUBLE_EQ(s.specificity, 1.0);
  }
}

TEST(SensitivitySpecificity, AlwaysWrongOnClass) {
  const auto c = from_counts({{{0, 6, 0, 0}, {0, 7, 0, 0}, {0, 0, 9, 0}, {0, 0, 0, 3}}});
  EXPECT_DOUBLE_EQ(sensitivity_specificity(c, 0).sensitivity, 0.0);
}

TEST(SensitivitySpecificity, MatchesOneVsAllRecount) {
  const auto c = from_counts(kHandBuilt);
  const auto pairs = pairs_of(c);
  for (int k = 0; k < 4; ++k) {
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (const auto& [t, p] : pairs) {
      const bool truth = t == k;
      const bool pred = p == k;
      if (truth && pred) tp += 1;
      if (truth && !pred) fn += 1;
      if (!truth && !pred) tn += 1;
      if (!truth && pred) fp += 1;
    }
    const auto s = sensitivity_specificity(c, k);
    EXPECT_EQ(s.sensitivity, tp / (tp + fn));
    EXPECT_EQ(s.specificity, tn / (tn + fp));
  }
}

TEST(SensitivitySpecificity, ClassAbsent) {
  const auto c = from_counts({{{5, 0, 0, 0}, {0, 7, 0, 0}, {0, 0, 9, 0}, {0, 0, 0, 0}}});
  try {
    sensitivity_specificity(c, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassAbsent);
  }
}

TEST(Confusion, RejectsOutOfRangeCodes) {
  Confusion c;
  EXPECT_THROW(c.add(4, 0), Error);
  EXPECT_THROW(c.add(0, -1), Error);
}

TEST(Roc, PerfectSeparation) {
  const std::vector<bool> pos = {true, true, false, false};
  const std::vector<double> s = {0.9, 0.8, 0.3, 0.1};
  const auto c = roc_curve(pos, s);
  EXPECT_DOUBLE_EQ(c.auc, 1.0);
  EXPECT_DOUBLE_EQ(c.optimal().fpr, 0.0);
  EXPECT_DOUBLE_EQ(c.optimal().tpr, 1.0);
}

TEST(Roc, InvertedScores) {
  const std::vector<bool> pos = {true, true, false, false};
  const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  EXPECT_DOUBLE_EQ(roc_curve(pos, s).auc, 0.0);
}

TEST(Roc, HandTracedCurve) {
  const std::vector<bool> pos = {true, true, false, false};
  const std::vector<double> s = {0.9, 0.8, 0.85, 0.1};
  const auto c = roc_curve(pos, s);
  const std::vector<std::pair<double, double>> expected = {
      {0.0, 0.0}, {0.0, 0.5}, {0.5, 0.5}, {0.5, 1.0}, {1.0, 1.0}};
  ASSERT_EQ(c.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_DOUBLE_EQ(c.points[i].fpr, expected[i].first);
    EXPECT_DOUBLE_EQ(c.points[i].tpr, expected[i].second);
  }
  EXPECT_DOUBLE_EQ(c.points[1].threshold, 0.9);
  EXPECT_DOUBLE_EQ(c.points[4].threshold, 0.1);
  EXPECT_DOUBLE_EQ(c.auc, 0.75);
  EXPECT_DOUBLE_EQ(c.auc, oracle::pairwise_auc({0.9, 0.8}, {0.85, 0.1}));
}

TEST(Roc, TiesFormOneStep) {
  const std::vector<bool> pos = {true, false, true, false};
  const std::vector<double> s = {0.5, 0.5, 0.5, 0.5};
  const auto c = roc_curve(pos, s);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_DOUBLE_EQ(c.auc, 0.5);
}

TEST(Roc, OneClassOnly) {
  const std::vector<bool> pos = {true, true};
  const std::vector<double> s = {0.1, 0.2};
  try {
    roc_curve(pos, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OneClassOnly);
  }
}

TEST(Roc, OperatingPointTieFavorsHigherTpr) {
  const std::vector<RocPoint> pts = {{0.0, 0.0, 1.0}, {0.0, 0.6, 0.8}, {0.4, 1.0, 0.5}, {1.0, 1.0, 0.1}};
  EXPECT_EQ(operating_point(pts), 2u);
}

TEST(RocProperties, RandomScoresMonotoneAndMatchPairwise) {
  Rng rng(42);
  const int n = 2000;
  std::vector<bool> pos;
  std::vector<double> s;
  std::vector<double> neg_s;
  std::vector<double> pos_scores;
  std::vector<double> neg_scores;
  for (int i = 0; i < n; ++i) {
    const bool p = i % 2 == 0;
    // Coarse scores force many ties.
    const double v = std::floor(rng.uniform() * 50.0) / 50.0;
    pos.push_back(p);
    s.push_back(v);
    neg_s.push_back(-v);
    (p ? pos_scores : neg_scores).push_back(v);
  }
  const auto c = roc_curve(pos, s);
  EXPECT_GE(c.auc, 0.45);
  EXPECT_LE(c.auc, 0.55);
  EXPECT_NEAR(c.auc, oracle::pairwise_auc(pos_scores, neg_scores), 1e-12);
  EXPECT_NEAR(c.auc + roc_curve(pos, neg_s).auc, 1.0, 1e-12);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.front().tpr, 0.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
    EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
  }
}

TEST(OvrMargin, BestMinusRival) {
  const ClassScores s = {1.0, 4.0, 2.5, -1.0};
  EXPECT_DOUBLE_EQ(ovr_margin(s, 1), 1.5);
  EXPECT_DOUBLE_EQ(ovr_margin(s, 0), -3.0);
}
