#pragma once

// Text formats for recordings, labels, datasets and reports.
//
// sensors.csv (long format, one row per sensor per timestamp):
//   t,sensor,ax,ay,az,gx,gy,gz,qw,qx,qy,qz
// labels.csv:
//   start_t,end_t,primitive,subject,trial
// A dataset directory holds <id>.sensors.csv / <id>.labels.csv pairs plus
// recordings.txt listing the ids in order.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "core_types.hpp"
#include "csv.hpp"
#include "report.hpp"

namespace moveprim {

inline constexpr std::string_view kSensorCsvHeader = "t,sensor,ax,ay,az,gx,gy,gz,qw,qx,qy,qz";
inline constexpr std::string_view kLabelCsvHeader = "start_t,end_t,primitive,subject,trial";
inline constexpr std::string_view kRocCsvHeader = "algorithm,primitive,fpr,tpr,threshold";

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  auto in = csv::open_for_read(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

/// Calls fn(line_number, line) for every line (1-based, CR stripped).
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    fn(line_no, csv::strip_cr(text.substr(pos, end - pos)));
    pos = end + 1;
  }
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

/// "S1_T2" -> ("S1", "T2"); no underscore -> (id, "").
inline std::pair<std::string, std::string> split_id(const std::string& id) {
  const auto us = id.find('_');
  if (us == std::string::npos) return {id, ""};
  return {id.substr(0, us), id.substr(us + 1)};
}

inline std::string stem_before(const std::filesystem::path& path, std::string_view suffix) {
  std::string name = path.filename().string();
  if (name.size() > suffix.size() && name.ends_with(suffix)) name.resize(name.size() - suffix.size());
  return name;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Recordings

inline void write_recording(const Recording& rec, const std::filesystem::path& path) {
  if (rec.samples.cols() != kRecordingColumns ||
      static_cast<Eigen::Index>(rec.timestamps.size()) != rec.length()) {
    throw Error(ErrorCode::InvalidArgument, "recording shape does not match the sensor layout");
  }
  auto out = csv::open_for_write(path);
  std::string buf;
  buf.reserve(1 << 20);
  buf.append(kSensorCsvHeader);
  buf += '\n';
  for (Eigen::Index t = 0; t < rec.length(); ++t) {
    const std::string ts = csv::format(rec.timestamps[static_cast<std::size_t>(t)]);
    for (int s = 0; s < kNumSites; ++s) {
      buf += ts;
      buf += ',';
      buf += site_name(kAllSites[static_cast<std::size_t>(s)]);
      for (int c = 0; c < kImuChannels; ++c) {
        buf += ',';
        csv::append(buf, rec.samples(t, s * kImuChannels + c));
      }
      buf += '\n';
    }
    if (buf.size() > (1 << 20) - 4096) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

/// Regroup the long-format rows into a T x 110 recording. Subject and trial
/// come from the file name (<subject>_<trial>.sensors.csv).
inline Recording read_recording(const std::filesystem::path& path,
                                double sample_rate_hz = kDefaultSampleRateHz) {
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  const std::string text = detail::read_file(path);
  Recording rec;
  rec.sample_rate_hz = sample_rate_hz;
  std::tie(rec.subject_id, rec.trial_id) = detail::split_id(detail::stem_before(path, ".sensors.csv"));

  std::vector<double> values;  // row-major T x 110
  std::array<bool, kNumSites> seen{};
  std::size_t present = 0;
  bool header_ok = false;
  bool have_group = false;
  double group_t = 0.0;
  std::size_t group_line = 0;
  std::vector<std::string_view> fields;

  auto close_group = [&] {
    if (!have_group) return;
    if (present != kNumSites) {
      for (int s = 0; s < kNumSites; ++s) {
        if (!seen[static_cast<std::size_t>(s)]) {
          throw Error(ErrorCode::MissingSensorAtTimestamp,
                      detail::where(path, group_line) + "no " +
                          std::string(site_name(kAllSites[static_cast<std::size_t>(s)])) +
                          " row at t=" + csv::format(group_t));
        }
      }
    }
  };

  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_ok) {
      if (line != kSensorCsvHeader) {
        throw Error(ErrorCode::MalformedHeader,
                    detail::where(path, line_no) + "expected header '" + std::string(kSensorCsvHeader) + "'");
      }
      header_ok = true;
      return;
    }
    if (line.empty()) return;
    csv::split(line, fields);
    if (fields.size() != 2 + kImuChannels) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "expected " +
                                               std::to_string(2 + kImuChannels) + " fields");
    }
    double t = 0.0;
    if (!csv::parse(fields[0], t) || !std::isfinite(t) || t < 0.0) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "bad timestamp");
    }
    const auto site = parse_site(fields[1]);
    if (!site) {
      throw Error(ErrorCode::MalformedRow,
                  detail::where(path, line_no) + "unknown sensor '" + std::string(fields[1]) + "'");
    }
    if (!have_group || t != group_t) {
      if (have_group && t < group_t) {
        throw Error(ErrorCode::NonMonotoneTimestamps,
                    detail::where(path, line_no) + "timestamp " + csv::format(t) +
                        " precedes " + csv::format(group_t));
      }
      close_group();
      have_group = true;
      group_t = t;
      group_line = line_no;
      seen.fill(false);
      present = 0;
      rec.timestamps.push_back(t);
      values.resize(values.size() + kRecordingColumns, std::numeric_limits<double>::quiet_NaN());
    }
    const auto si = static_cast<std::size_t>(site_index(*site));
    if (seen[si]) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "duplicate " +
                                               std::string(fields[1]) + " row at t=" +
                                               csv::format(t));
    }
    seen[si] = true;
    ++present;
    double* row = values.data() + values.size() - kRecordingColumns + si * kImuChannels;
    for (int c = 0; c < kImuChannels; ++c) {
      if (!csv::parse(fields[static_cast<std::size_t>(2 + c)], row[c])) {
        throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "bad value in column " +
                                                 std::string(kChannelNames[static_cast<std::size_t>(c)]));
      }
    }
  });
  if (!header_ok) throw Error(ErrorCode::MalformedHeader, path.string() + ": empty file");
  close_group();

  const double dt = 1.0 / sample_rate_hz;
  for (std::size_t i = 1; i < rec.timestamps.size(); ++i) {
    const double gap = rec.timestamps[i] - rec.timestamps[i - 1];
    if (std::abs(gap - dt) > 1e-3 * dt) {
      throw Error(ErrorCode::SampleRateMismatch,
                  path.string() + ": spacing " + csv::format(gap) + " s after t=" +
                      csv::format(rec.timestamps[i - 1]) + " does not match " +
                      csv::format(sample_rate_hz) + " Hz");
    }
  }
  const auto T = static_cast<Eigen::Index>(rec.timestamps.size());
  rec.samples = Eigen::Map<const RowMatrix>(values.data(), T, kRecordingColumns);
  return rec;
}

// ---------------------------------------------------------------------------
// Labels

/// Seconds to sample index, rounding half away from zero.
inline Eigen::Index time_to_index(double t, double rate_hz) {
  return static_cast<Eigen::Index>(std::round(t * rate_hz));
}

inline void write_labels(const LabeledRecording& lr, const std::filesystem::path& path) {
  auto out = csv::open_for_write(path);
  const double rate = lr.recording.sample_rate_hz;
  out << kLabelCsvHeader << '\n';
  for (const auto& s : lr.segments) {
    out << csv::format(static_cast<double>(s.start_idx) / rate) << ','
        << csv::format(static_cast<double>(s.end_idx) / rate) << ',' << label_name(s.label) << ','
        << lr.recording.subject_id << ',' << lr.recording.trial_id << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

inline std::vector<LabeledSegment> read_labels(const std::filesystem::path& path,
                                               const Recording& rec) {
  const std::string text = detail::read_file(path);
  std::vector<LabeledSegment> segs;
  bool header_ok = false;
  double prev_start = -1.0;
  std::vector<std::string_view> fields;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_ok) {
      if (line != kLabelCsvHeader) {
        throw Error(ErrorCode::MalformedHeader,
                    detail::where(path, line_no) + "expected header '" + std::string(kLabelCsvHeader) + "'");
      }
      header_ok = true;
      return;
    }
    if (line.empty()) return;
    csv::split(line, fields);
    if (fields.size() != 5) throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "expected 5 fields");
    double start = 0.0;
    double end = 0.0;
    if (!csv::parse(fields[0], start) || !csv::parse(fields[1], end) || !std::isfinite(start) ||
        !std::isfinite(end) || start < 0.0 || !(start < end)) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "need 0 <= start_t < end_t");
    }
    const auto label = parse_label(fields[2]);
    if (!label) {
      throw Error(ErrorCode::UnknownLabel,
                  detail::where(path, line_no) + "unknown primitive '" + std::string(fields[2]) + "'");
    }
    if (!rec.subject_id.empty() && (fields[3] != rec.subject_id || fields[4] != rec.trial_id)) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "row belongs to " +
                                               std::string(fields[3]) + "_" + std::string(fields[4]) +
                                               ", not " + rec.id());
    }
    if (start < prev_start) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "rows must be sorted by start_t");
    }
    prev_start = start;
    LabeledSegment seg{time_to_index(start, rec.sample_rate_hz), time_to_index(end, rec.sample_rate_hz), *label};
    if (seg.start_idx >= seg.end_idx) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "segment is empty after rounding");
    }
    if (seg.end_idx > rec.length()) {
      throw Error(ErrorCode::MalformedRow, detail::where(path, line_no) + "segment ends past the recording");
    }
    if (!segs.empty() && seg.start_idx < segs.back().end_idx) {
      throw Error(ErrorCode::OverlapAfterRounding,
                  detail::where(path, line_no) + "rows " + std::to_string(segs.size() - 1) + " and " +
                      std::to_string(segs.size()) + " overlap after rounding: [" +
                      std::to_string(segs.back().start_idx) + "," + std::to_string(segs.back().end_idx) +
                      ") vs [" + std::to_string(seg.start_idx) + "," + std::to_string(seg.end_idx) + ")");
    }
    segs.push_back(seg);
  });
  if (!header_ok) throw Error(ErrorCode::MalformedHeader, path.string() + ": empty file");
  return segs;
}

// ---------------------------------------------------------------------------
// Dataset directories

inline constexpr std::string_view kDatasetIndex = "recordings.txt";

inline std::vector<std::filesystem::path> write_dataset(const Dataset& d,
                                                        const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  auto index = csv::open_for_write(dir / kDatasetIndex);
  for (const auto& lr : d.recordings) {
    const auto id = lr.recording.id();
    files.push_back(dir / (id + ".sensors.csv"));
    write_recording(lr.recording, files.back());
    files.push_back(dir / (id + ".labels.csv"));
    write_labels(lr, files.back());
    index << id << '\n';
  }
  if (!index) throw Error(ErrorCode::IoError, "failed writing the dataset index");
  files.push_back(dir / kDatasetIndex);
  return files;
}

/// Recording order follows recordings.txt when present, otherwise the
/// sorted file names.
inline Dataset read_dataset(const std::filesystem::path& dir,
                            double sample_rate_hz = kDefaultSampleRateHz) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  }
  std::vector<std::string> ids;
  if (std::filesystem::exists(dir / kDatasetIndex)) {
    const auto text = detail::read_file(dir / kDatasetIndex);
    detail::for_each_line(text, [&](std::size_t, std::string_view line) {
      if (!line.empty()) ids.emplace_back(line);
    });
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.ends_with(".sensors.csv")) ids.push_back(detail::stem_before(entry.path(), ".sensors.csv"));
    }
    std::sort(ids.begin(), ids.end());
  }
  if (ids.empty()) throw Error(ErrorCode::IoError, "no recordings in " + dir.string());
  Dataset d;
  for (const auto& id : ids) {
    LabeledRecording lr;
    lr.recording = read_recording(dir / (id + ".sensors.csv"), sample_rate_hz);
    const auto labels = dir / (id + ".labels.csv");
    if (!std::filesystem::exists(labels)) throw Error(ErrorCode::IoError, "missing " + labels.string());
    lr.segments = read_labels(labels, lr.recording);
    d.recordings.push_back(std::move(lr));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Reports

inline std::filesystem::path roc_csv_path(const std::filesystem::path& report_json) {
  auto p = report_json;
  p.replace_extension();
  p += ".roc.csv";
  return p;
}

inline void write_roc_csv(const EvalReport& r, const std::filesystem::path& path) {
  auto out = csv::open_for_write(path);
  out << kRocCsvHeader << '\n';
  for (const auto& s : r.algorithms) {
    for (int k = 0; k < kNumClasses; ++k) {
      for (const auto& p : s.roc[static_cast<std::size_t>(k)].points) {
        out << algorithm_name(s.algorithm) << ',' << label_name(label_from_code(k)) << ','
            << csv::format(p.fpr) << ',' << csv::format(p.tpr) << ',' << csv::format(p.threshold)
            << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

/// Writes the JSON document and its sibling ROC CSV; returns both paths.
inline std::vector<std::filesystem::path> write_report(const EvalReport& r,
                                                       const std::filesystem::path& path) {
  {
    auto out = csv::open_for_write(path);
    out << report_to_json(r).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
  const auto roc = roc_csv_path(path);
  write_roc_csv(r, roc);
  return {path, roc};
}

inline EvalReport read_report(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace moveprim
