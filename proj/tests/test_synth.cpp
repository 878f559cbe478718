#include <moveprim/features.hpp>
#include <moveprim/synth.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"

using namespace moveprim;

namespace {

SignalGenSpec small_spec(std::uint64_t seed) {
  SignalGenSpec spec;
  spec.counts = {20, 18, 19, 15};
  spec.subjects = 2;
  spec.trials = 2;
  spec.seed = seed;
  return spec;
}

MomentSpec toy_moments(std::size_t total, Eigen::Index F) {
  MomentSpec m;
  m.total = total;
  m.seed = 17;
  m.mean.resize(kNumClasses, F);
  m.variance.resize(kNumClasses, F);
  for (int k = 0; k < kNumClasses; ++k) {
    for (Eigen::Index f = 0; f < F; ++f) {
      m.mean(k, f) = 1.0 + k + 0.5 * static_cast<double>(f);
      m.variance(k, f) = 0.25 + 0.1 * k + 0.05 * static_cast<double>(f);
    }
  }
  return m;
}

std::vector<long> paper_base_counts() { return {810, 708, 781, 582}; }

}  // namespace

TEST(SignalGen, SegmentCountsFollowSpec) {
  const auto d = gen_signal_dataset(small_spec(1));
  EXPECT_EQ(d.segment_count(), 72u);
  const auto c = d.label_counts();
  EXPECT_EQ(c[0], 20u);
  EXPECT_EQ(c[1], 18u);
  EXPECT_EQ(c[2], 19u);
  EXPECT_EQ(c[3], 15u);
  EXPECT_EQ(d.recordings.size(), 4u);
}

TEST(SignalGen, DefaultCountsSumTo2881) {
  const SignalGenSpec spec;
  std::size_t sum = 0;
  for (auto c : spec.counts) sum += c;
  EXPECT_EQ(sum, 2881u);
}

TEST(SignalGen, PassesValidationWithUnitQuaternions) {
  const auto d = gen_signal_dataset(small_spec(2));
  ValidationOptions opts;
  opts.quaternion_tolerance = 1e-6;
  EXPECT_TRUE(validate_dataset(d, opts).empty());
  double worst = 0.0;
  for (const auto& lr : d.recordings) {
    for (int site = 0; site < kNumSites; ++site) {
      for (Eigen::Index t = 0; t < lr.recording.length(); ++t) {
        const double n = lr.recording.samples.row(t).segment(site * kImuChannels + 6, 4).norm();
        worst = std::max(worst, std::abs(n - 1.0));
      }
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(SignalGen, SegmentsTileRecordings) {
  const auto d = gen_signal_dataset(small_spec(3));
  for (const auto& lr : d.recordings) {
    Eigen::Index at = 0;
    for (const auto& s : lr.segments) {
      EXPECT_EQ(s.start_idx, at);
      at = s.end_idx;
    }
    EXPECT_EQ(at, lr.recording.length());
  }
}

TEST(SignalGen, Deterministic) {
  const auto a = gen_signal_dataset(small_spec(4));
  const auto b = gen_signal_dataset(small_spec(4));
  ASSERT_EQ(a.recordings.size(), b.recordings.size());
  for (std::size_t r = 0; r < a.recordings.size(); ++r) {
    EXPECT_EQ(a.recordings[r].segments, b.recordings[r].segments);
    EXPECT_TRUE(a.recordings[r].recording.samples == b.recordings[r].recording.samples);
  }
  const auto c = gen_signal_dataset(small_spec(5));
  EXPECT_FALSE(a.recordings[0].recording.samples.rows() == c.recordings[0].recording.samples.rows() &&
               a.recordings[0].recording.samples == c.recordings[0].recording.samples);
}

TEST(SignalGen, ThreadCountDoesNotChangeOutput) {
  const auto a = gen_signal_dataset(small_spec(6), 1);
  const auto b = gen_signal_dataset(small_spec(6), 3);
  for (std::size_t r = 0; r < a.recordings.size(); ++r) {
    EXPECT_TRUE(a.recordings[r].recording.samples == b.recordings[r].recording.samples);
  }
}

TEST(SignalGen, NoiselessReachesOfEqualLengthMatch) {
  SignalGenSpec spec = small_spec(8);
  spec.counts = {120, 2, 2, 2};
  spec.noise_std = 0.0;
  const auto d = gen_signal_dataset(spec);
  const auto cols = channel_columns(SensorConfig::create({SensorSite::RHand}, DataKind::Imu));
  std::map<Eigen::Index, Eigen::MatrixXd> first_by_length;
  int compared = 0;
  for (const auto& lr : d.recordings) {
    for (const auto& s : lr.segments) {
      if (s.label != PrimitiveLabel::Reach) continue;
      Eigen::MatrixXd block(s.length(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) {
        block.col(static_cast<Eigen::Index>(c)) = lr.recording.samples.col(cols[c]).segment(s.start_idx, s.length());
      }
      const auto it = first_by_length.find(s.length());
      if (it == first_by_length.end()) {
        first_by_length.emplace(s.length(), block);
      } else {
        EXPECT_TRUE(it->second.isApprox(block, 1e-12)) << "length " << s.length();
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 0);
}

TEST(SignalGen, InvalidSpec) {
  auto spec = small_spec(1);
  spec.counts[2] = 0;
  EXPECT_THROW(gen_signal_dataset(spec), Error);
  spec = small_spec(1);
  spec.durations[0] = {0.3, 1.0};
  try {
    gen_signal_dataset(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
  }
}

TEST(Apportion, PaperProportionsAt300k) {
  MomentSpec m;
  const auto counts = apportion(m.proportions, 300000);
  const auto expected = oracle::apportion(paper_base_counts(), 300000);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(static_cast<long>(counts[k]), expected[k]);
  EXPECT_EQ(counts[0], 84346u);
  EXPECT_EQ(counts[1], 73724u);
  EXPECT_EQ(counts[2], 81326u);
  EXPECT_EQ(counts[3], 60604u);
}

TEST(Apportion, SumsExactlyForManyTotals) {
  MomentSpec m;
  for (std::size_t total : {4u, 7u, 101u, 2881u, 49999u, 123457u}) {
    const auto counts = apportion(m.proportions, total);
    std::size_t sum = 0;
    for (auto c : counts) sum += c;
    EXPECT_EQ(sum, total);
    const auto expected = oracle::apportion(paper_base_counts(), static_cast<long>(total));
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_LE(std::abs(static_cast<long>(counts[k]) - expected[k]), 1) << total;
    }
  }
}

TEST(FeatureGen, OneRowPerLabel) {
  auto m = toy_moments(4, 3);
  m.proportions = {0.25, 0.25, 0.25, 0.25};
  const auto fm = gen_feature_dataset(m);
  EXPECT_EQ(fm.windows(), 4);
  std::array<int, 4> seen{};
  for (auto l : fm.window_label) ++seen[static_cast<std::size_t>(code(l))];
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(FeatureGen, MeansWithinCltBoundAndProportions) {
  const auto m = toy_moments(300000, 6);
  const auto fm = gen_feature_dataset(m);
  EXPECT_EQ(fm.windows(), 300000);
  std::array<double, 4> n{};
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 6);
  for (Eigen::Index w = 0; w < fm.windows(); ++w) {
    const int k = code(fm.window_label[static_cast<std::size_t>(w)]);
    n[static_cast<std::size_t>(k)] += 1.0;
    sum.row(k) += fm.x.row(w);
  }
  for (int k = 0; k < 4; ++k) {
    const double nk = n[static_cast<std::size_t>(k)];
    EXPECT_LT(std::abs(nk / 300000.0 - m.proportions[static_cast<std::size_t>(k)]), 0.005);
    for (Eigen::Index f = 0; f < 6; ++f) {
      const double bound = 3.0 * std::sqrt(m.variance(k, f)) / std::sqrt(nk);
      EXPECT_LT(std::abs(sum(k, f) / nk - m.mean(k, f)), bound);
    }
  }
}

TEST(FeatureGen, InvalidSpec) {
  auto m = toy_moments(100, 2);
  m.proportions = {0.5, 0.5, 0.5, 0.0};
  EXPECT_THROW(gen_feature_dataset(m), Error);
  m = toy_moments(100, 2);
  m.variance(0, 0) = -1.0;
  EXPECT_THROW(gen_feature_dataset(m), Error);
}

TEST(EstimateMoments, RoundTripWithinTwoPercent) {
  const auto m = toy_moments(300000, 5);
  const auto est = estimate_moments(gen_feature_dataset(m));
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(est.proportions[static_cast<std::size_t>(k)], m.proportions[static_cast<std::size_t>(k)], 1e-4);
    for (Eigen::Index f = 0; f < 5; ++f) {
      EXPECT_LT(std::abs(est.mean(k, f) / m.mean(k, f) - 1.0), 0.02);
      EXPECT_LT(std::abs(est.variance(k, f) / m.variance(k, f) - 1.0), 0.02);
    }
  }
}

TEST(EstimateMoments, SegmentMeansAndSampleVariance) {
  // Two windows per segment; the estimate works on segment means.
  FeatureMatrix fm;
  fm.x.resize(16, 1);
  for (int s = 0; s < 8; ++s) {
    const int k = s % 4;
    const double centre = 10.0 * k + static_cast<double>(s / 4);
    fm.x(2 * s, 0) = centre - 1.0;
    fm.x(2 * s + 1, 0) = centre + 1.0;
    for (int w = 0; w < 2; ++w) {
      fm.window_label.push_back(label_from_code(k));
      fm.window_segment.push_back(static_cast<std::size_t>(s));
    }
  }
  const auto est = estimate_moments(fm);
  for (int k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(est.mean(k, 0), 10.0 * k + 0.5);
    // segment means differ by 1, sample variance of {a, a+1} is 0.5
    EXPECT_DOUBLE_EQ(est.variance(k, 0), 0.5);
    EXPECT_DOUBLE_EQ(est.proportions[static_cast<std::size_t>(k)], 0.25);
  }
}

TEST(EstimateMoments, ConstantFeaturesGiveZeroVariance) {
  FeatureMatrix fm;
  fm.x = RowMatrix::Constant(8, 2, 3.5);
  for (int s = 0; s < 8; ++s) {
    fm.window_label.push_back(label_from_code(s % 4));
    fm.window_segment.push_back(static_cast<std::size_t>(s));
  }
  const auto est = estimate_moments(fm);
  EXPECT_TRUE((est.variance.array() == 0.0).all());
}

TEST(EstimateMoments, SingleSegmentLabel) {
  FeatureMatrix fm;
  fm.x = RowMatrix::Zero(7, 1);
  const int labels[] = {0, 0, 1, 1, 2, 2, 3};
  for (int s = 0; s < 7; ++s) {
    fm.window_label.push_back(label_from_code(labels[s]));
    fm.window_segment.push_back(static_cast<std::size_t>(s));
  }
  try {
    estimate_moments(fm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelTooSmall);
  }
}
