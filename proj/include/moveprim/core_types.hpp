#pragma once

// Shared vocabulary: labels, sensor layout, channel indexing and the
// in-memory dataset container.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace moveprim {

inline constexpr int kNumClasses = 4;
inline constexpr int kNumSites = 11;
inline constexpr int kImuChannels = 10;
inline constexpr int kAccelChannels = 3;
inline constexpr int kRecordingColumns = kNumSites * kImuChannels;
inline constexpr double kDefaultSampleRateHz = 240.0;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ClassScores = std::array<double, kNumClasses>;

// ---------------------------------------------------------------------------
// Labels

enum class PrimitiveLabel : std::uint8_t { Reach = 0, Transport = 1, Reposition = 2, Idle = 3 };

inline constexpr std::array<PrimitiveLabel, kNumClasses> kAllLabels = {
    PrimitiveLabel::Reach, PrimitiveLabel::Transport, PrimitiveLabel::Reposition,
    PrimitiveLabel::Idle};

constexpr int code(PrimitiveLabel label) { return static_cast<int>(label); }

inline PrimitiveLabel label_from_code(int c) {
  if (c < 0 || c >= kNumClasses) {
    throw Error(ErrorCode::InvalidArgument, "label code out of range: " + std::to_string(c));
  }
  return static_cast<PrimitiveLabel>(c);
}

constexpr std::string_view label_name(PrimitiveLabel label) {
  constexpr std::array<std::string_view, kNumClasses> names = {"reach", "transport",
                                                               "reposition", "idle"};
  return names[static_cast<std::size_t>(label)];
}

inline std::optional<PrimitiveLabel> parse_label(std::string_view name) {
  for (auto label : kAllLabels) {
    if (label_name(label) == name) return label;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sensor layout

enum class SensorSite : std::uint8_t {
  Head = 0,
  Sternum,
  Pelvis,
  LScapula,
  LArm,
  LForearm,
  LHand,
  RScapula,
  RArm,
  RForearm,
  RHand,
};

inline constexpr std::array<SensorSite, kNumSites> kAllSites = {
    SensorSite::Head,     SensorSite::Sternum, SensorSite::Pelvis,   SensorSite::LScapula,
    SensorSite::LArm,     SensorSite::LForearm, SensorSite::LHand,   SensorSite::RScapula,
    SensorSite::RArm,     SensorSite::RForearm, SensorSite::RHand};

constexpr int site_index(SensorSite site) { return static_cast<int>(site); }

constexpr std::string_view site_name(SensorSite site) {
  constexpr std::array<std::string_view, kNumSites> names = {
      "Head", "Sternum", "Pelvis",   "LScapula", "LArm", "LForearm",
      "LHand", "RScapula", "RArm", "RForearm", "RHand"};
  return names[static_cast<std::size_t>(site)];
}

inline std::optional<SensorSite> parse_site(std::string_view name) {
  for (auto site : kAllSites) {
    if (site_name(site) == name) return site;
  }
  return std::nullopt;
}

enum class Side : std::uint8_t { Left, Right };

inline constexpr std::array<std::string_view, kImuChannels> kChannelNames = {
    "ax", "ay", "az", "gx", "gy", "gz", "qw", "qx", "qy", "qz"};

enum class DataKind : std::uint8_t { Imu, Accelerometer };

constexpr int channel_count(DataKind kind) {
  return kind == DataKind::Imu ? kImuChannels : kAccelChannels;
}

constexpr std::string_view kind_name(DataKind kind) {
  return kind == DataKind::Imu ? "imu" : "accelerometer";
}

inline std::optional<DataKind> parse_kind(std::string_view name) {
  if (name == "imu") return DataKind::Imu;
  if (name == "accelerometer" || name == "accel") return DataKind::Accelerometer;
  return std::nullopt;
}

/// A non-empty, duplicate-free set of sites kept in canonical order, plus the
/// channel subset read from each site.
class SensorConfig {
 public:
  static SensorConfig create(std::vector<SensorSite> sites, DataKind kind) {
    if (sites.empty()) throw Error(ErrorCode::InvalidArgument, "sensor config has no sites");
    std::sort(sites.begin(), sites.end());
    if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) {
      throw Error(ErrorCode::InvalidArgument, "sensor config lists a site twice");
    }
    return SensorConfig(std::move(sites), kind);
  }

  static SensorConfig all(DataKind kind = DataKind::Imu) {
    return SensorConfig({kAllSites.begin(), kAllSites.end()}, kind);
  }

  static SensorConfig from_mask(std::uint16_t mask, DataKind kind) {
    std::vector<SensorSite> sites;
    for (auto site : kAllSites) {
      if (mask & (1u << site_index(site))) sites.push_back(site);
    }
    return create(std::move(sites), kind);
  }

  const std::vector<SensorSite>& sites() const { return sites_; }
  DataKind kind() const { return kind_; }
  std::size_t size() const { return sites_.size(); }

  std::uint16_t mask() const {
    std::uint16_t m = 0;
    for (auto site : sites_) m = static_cast<std::uint16_t>(m | (1u << site_index(site)));
    return m;
  }

  SensorConfig with_kind(DataKind kind) const { return SensorConfig(sites_, kind); }

  /// Site names joined with ';' (CSV-safe).
  std::string sites_string() const {
    std::string out;
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      if (i) out += ';';
      out += site_name(sites_[i]);
    }
    return out;
  }

  friend bool operator==(const SensorConfig&, const SensorConfig&) = default;

 private:
  SensorConfig(std::vector<SensorSite> sites, DataKind kind)
      : sites_(std::move(sites)), kind_(kind) {}

  std::vector<SensorSite> sites_;
  DataKind kind_;
};

/// Parse a comma/semicolon separated list of site names.
inline std::vector<SensorSite> parse_site_list(std::string_view text) {
  std::vector<SensorSite> sites;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    auto site = parse_site(token);
    if (!site) throw Error(ErrorCode::InvalidArgument, "unknown sensor site '" + token + "'");
    sites.push_back(*site);
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ';') {
      flush();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += c;
    }
  }
  flush();
  return sites;
}

/// Column indices of `config` inside the 110-wide recording matrix.
inline std::vector<int> channel_columns(const SensorConfig& config) {
  const int per_site = channel_count(config.kind());
  std::vector<int> cols;
  cols.reserve(config.size() * static_cast<std::size_t>(per_site));
  for (auto site : config.sites()) {
    for (int ch = 0; ch < per_site; ++ch) cols.push_back(site_index(site) * kImuChannels + ch);
  }
  return cols;
}

// ---------------------------------------------------------------------------
// Recordings and datasets

struct Recording {
  double sample_rate_hz = kDefaultSampleRateHz;
  Eigen::MatrixXd samples;  // T x 110, column-major so each channel is contiguous
  std::vector<double> timestamps;
  std::string subject_id;
  std::string trial_id;

  Eigen::Index length() const { return samples.rows(); }
  std::string id() const { return subject_id + "_" + trial_id; }
};

struct LabeledSegment {
  Eigen::Index start_idx = 0;  // half-open [start_idx, end_idx)
  Eigen::Index end_idx = 0;
  PrimitiveLabel label = PrimitiveLabel::Idle;

  Eigen::Index length() const { return end_idx - start_idx; }
  friend bool operator==(const LabeledSegment&, const LabeledSegment&) = default;
};

struct LabeledRecording {
  Recording recording;
  std::vector<LabeledSegment> segments;
};

struct Dataset {
  std::vector<LabeledRecording> recordings;

  std::size_t segment_count() const {
    std::size_t n = 0;
    for (const auto& r : recordings) n += r.segments.size();
    return n;
  }

  std::array<std::size_t, kNumClasses> label_counts() const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& r : recordings) {
      for (const auto& s : r.segments) ++counts[static_cast<std::size_t>(code(s.label))];
    }
    return counts;
  }
};

/// Global segment id: position in the recording-major enumeration of all
/// segments in a dataset.
struct SegmentRef {
  std::size_t recording = 0;
  std::size_t segment = 0;
};

inline std::vector<SegmentRef> enumerate_segments(const Dataset& d) {
  std::vector<SegmentRef> refs;
  refs.reserve(d.segment_count());
  for (std::size_t r = 0; r < d.recordings.size(); ++r) {
    for (std::size_t s = 0; s < d.recordings[r].segments.size(); ++s) refs.push_back({r, s});
  }
  return refs;
}

struct Violation {
  std::string recording;
  std::string message;
};

struct ValidationOptions {
  bool check_quaternions = true;
  double quaternion_tolerance = 1e-3;
  double timestamp_tolerance_s = 1e-6;
};

/// Reports every invariant breach; never throws.
inline std::vector<Violation> validate_dataset(const Dataset& d, ValidationOptions opts = {}) {
  std::vector<Violation> out;
  for (const auto& lr : d.recordings) {
    const Recording& rec = lr.recording;
    const std::string id = rec.id();
    auto report = [&](std::string msg) { out.push_back({id, std::move(msg)}); };
    const Eigen::Index T = rec.length();

    if (rec.samples.cols() != kRecordingColumns) {
      report("expected " + std::to_string(kRecordingColumns) + " columns, found " +
             std::to_string(rec.samples.cols()));
    }
    if (!(rec.sample_rate_hz > 0.0)) report("sample rate must be positive");
    if (static_cast<Eigen::Index>(rec.timestamps.size()) != T) {
      report("timestamp count " + std::to_string(rec.timestamps.size()) +
             " differs from sample count " + std::to_string(T));
    } else if (rec.sample_rate_hz > 0.0) {
      const double dt = 1.0 / rec.sample_rate_hz;
      for (std::size_t i = 1; i < rec.timestamps.size(); ++i) {
        const double gap = rec.timestamps[i] - rec.timestamps[i - 1];
        if (!(gap > 0.0) || std::abs(gap - dt) > opts.timestamp_tolerance_s) {
          report("timestamp spacing at index " + std::to_string(i) + " is " +
                 std::to_string(gap) + " s, expected " + std::to_string(dt));
        }
      }
    }

    if (opts.check_quaternions && rec.samples.cols() == kRecordingColumns) {
      for (int site = 0; site < kNumSites; ++site) {
        const int q0 = site * kImuChannels + 6;
        for (Eigen::Index t = 0; t < T; ++t) {
          const double norm = rec.samples.row(t).segment(q0, 4).norm();
          if (std::isnan(norm)) continue;  // accelerometer-only export
          if (std::abs(norm - 1.0) > opts.quaternion_tolerance) {
            report("quaternion of " + std::string(site_name(kAllSites[site])) + " at index " +
                   std::to_string(t) + " has norm " + std::to_string(norm));
            break;
          }
        }
      }
    }

    for (std::size_t i = 0; i < lr.segments.size(); ++i) {
      const auto& s = lr.segments[i];
      if (s.start_idx < 0 || s.start_idx >= s.end_idx || s.end_idx > T) {
        report("segment " + std::to_string(i) + " [" + std::to_string(s.start_idx) + "," +
               std::to_string(s.end_idx) + ") out of range for T=" + std::to_string(T));
      }
      if (i > 0) {
        const auto& prev = lr.segments[i - 1];
        if (s.start_idx < prev.end_idx) {
          report("segments " + std::to_string(i - 1) + " [" + std::to_string(prev.start_idx) +
                 "," + std::to_string(prev.end_idx) + ") and " + std::to_string(i) + " [" +
                 std::to_string(s.start_idx) + "," + std::to_string(s.end_idx) +
                 ") overlap or are unsorted");
        }
      }
    }
  }
  return out;
}

}  // namespace moveprim
