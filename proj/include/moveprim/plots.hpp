#pragma once

// Static SVG charts rendered from an EvalReport. Output depends only on the
// report, so the same report always yields byte-identical files.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "report.hpp"

namespace moveprim {

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Tick label: up to four significant digits, scientific for extremes.
inline std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (a != 0.0 && (a < 1e-3 || a >= 1e5)) {
    std::snprintf(buf, sizeof buf, "%.1e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

inline constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                        "#9467bd", "#ff7f0e", "#8c564b"};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  std::vector<std::pair<double, double>> markers;  // drawn as open circles
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  bool log_y = false;
  int x_ticks = 5;
  bool diagonal = false;  // chance line from (x_min, y_min) to (x_max, y_max)
  std::vector<Series> series;
};

inline std::string render(const Chart& c) {
  constexpr double W = 560, H = 420, L = 70, R = 150, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;
  auto ty = [&](double y) { return c.log_y ? std::log10(y) : y; };
  const double y0 = ty(c.y_min), y1 = ty(c.y_max);
  auto px = [&](double x) { return L + (x - c.x_min) / (c.x_max - c.x_min) * pw; };
  auto py = [&](double y) { return T + ph - (ty(y) - y0) / (y1 - y0) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
       "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(L + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(c.title) + "</text>\n";
  s += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= c.x_ticks; ++i) {
    const double xv = c.x_min + (c.x_max - c.x_min) * i / c.x_ticks;
    s += "<line x1=\"" + num(px(xv)) + "\" y1=\"" + num(T + ph) + "\" x2=\"" + num(px(xv)) + "\" y2=\"" +
         num(T + ph + 4) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(T + ph + 16) + "\" text-anchor=\"middle\">" +
         tick_label(xv) + "</text>\n";
  }
  std::vector<double> yticks;
  if (c.log_y) {
    for (double e = std::ceil(y0); e <= std::floor(y1); e += 1.0) yticks.push_back(std::pow(10.0, e));
  } else {
    for (int i = 0; i <= 5; ++i) yticks.push_back(c.y_min + (c.y_max - c.y_min) * i / 5.0);
  }
  for (double yv : yticks) {
    s += "<line x1=\"" + num(L - 4) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(L) + "\" y2=\"" +
         num(py(yv)) + "\" stroke=\"black\"/>\n";
    std::string label = tick_label(yv);
    if (c.log_y) label = "1e" + std::to_string(std::lround(std::log10(yv)));
    s += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + label +
         "</text>\n";
  }
  s += "<text x=\"" + num(L + pw / 2) + "\" y=\"" + num(H - 15) + "\" text-anchor=\"middle\">" +
       escape(c.x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num(T + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num(T + ph / 2) + ")\">" + escape(c.y_label) + "</text>\n";
  if (c.diagonal) {
    s += "<line x1=\"" + num(px(c.x_min)) + "\" y1=\"" + num(py(c.y_min)) + "\" x2=\"" + num(px(c.x_max)) +
         "\" y2=\"" + num(py(c.y_max)) + "\" stroke=\"#999999\" stroke-dasharray=\"4 4\"/>\n";
  }

  for (std::size_t i = 0; i < c.series.size(); ++i) {
    const auto& ser = c.series[i];
    const std::string color = kPalette[i % kPalette.size()];
    if (!ser.points.empty()) {
      s += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"";
      if (ser.dashed) s += " stroke-dasharray=\"6 3\"";
      s += " points=\"";
      for (std::size_t k = 0; k < ser.points.size(); ++k) {
        if (k) s += ' ';
        s += num(px(ser.points[k].first)) + "," + num(py(ser.points[k].second));
      }
      s += "\"/>\n";
    }
    for (const auto& m : ser.markers) {
      s += "<circle cx=\"" + num(px(m.first)) + "\" cy=\"" + num(py(m.second)) + "\" r=\"4\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = T + 12 + 16.0 * static_cast<double>(i);
    s += "<line x1=\"" + num(L + pw + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(L + pw + 30) +
         "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"";
    if (ser.dashed) s += " stroke-dasharray=\"6 3\"";
    s += "/>\n";
    s += "<text x=\"" + num(L + pw + 35) + "\" y=\"" + num(ly) + "\">" + escape(ser.name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void write(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace svg

struct PlotOutput {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> notes;  // skipped panels and why
};

inline svg::Chart roc_chart(const EvalReport& r, int k, std::vector<std::string>& notes) {
  const auto name = std::string(label_name(label_from_code(k)));
  svg::Chart c;
  c.title = "ROC: " + name;
  c.x_label = "false positive rate";
  c.y_label = "true positive rate";
  c.diagonal = true;
  for (const auto& a : r.algorithms) {
    const auto& curve = a.roc[static_cast<std::size_t>(k)];
    const auto algo = std::string(algorithm_name(a.algorithm));
    if (curve.empty()) {
      notes.push_back("roc_" + name + ": no curve for " + algo);
      continue;
    }
    svg::Series ser;
    ser.name = algo + " (AUC " + svg::num(curve.auc) + ")";
    for (const auto& p : curve.points) ser.points.emplace_back(p.fpr, p.tpr);
    const auto& op = curve.optimal();
    ser.markers.emplace_back(op.fpr, op.tpr);
    c.series.push_back(std::move(ser));
  }
  return c;
}

inline svg::Chart timing_chart(const EvalReport& r, Phase phase) {
  svg::Chart c;
  const bool train = phase == Phase::Train;
  c.title = train ? "Training time" : "Testing time per sample";
  c.x_label = "fraction of dataset";
  c.y_label = train ? "train time (s)" : "test time per sample (s)";
  c.log_y = true;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  c.x_min = 0.0;
  c.x_max = 1.0;
  for (const auto& t : r.timings) {
    svg::Series ser;
    ser.name = std::string(algorithm_name(t.run.algorithm));
    for (const auto& p : t.run.points) {
      const double v = train ? p.train_s : p.test_s;
      if (!(v > 0.0)) continue;
      ser.points.emplace_back(p.fraction, v);
      ser.markers.emplace_back(p.fraction, v);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    c.series.push_back(std::move(ser));
  }
  if (!(hi > 0.0)) {
    lo = 1e-9;
    hi = 1.0;
  }
  c.y_min = std::pow(10.0, std::floor(std::log10(lo)));
  c.y_max = std::pow(10.0, std::ceil(std::log10(hi)));
  if (c.y_max <= c.y_min) c.y_max = c.y_min * 10.0;
  return c;
}

/// Overall PPV against sensor count, one series per data kind.
inline svg::Chart ablation_chart(const EvalReport& r) {
  svg::Chart c;
  c.title = "Overall PPV by sensor count";
  c.x_label = "number of sensors";
  c.y_label = "overall PPV";
  c.x_min = 0.0;
  c.x_max = static_cast<double>(kNumSites + 1);
  c.x_ticks = 6;
  double lo = 1.0;
  std::map<DataKind, svg::Series> by_kind;
  for (const auto& s : r.ablation) {
    if (!s.overall_ppv) continue;
    auto& ser = by_kind[s.config.kind()];
    ser.name = std::string(kind_name(s.config.kind()));
    const double x = static_cast<double>(s.config.size());
    ser.points.emplace_back(x, *s.overall_ppv);
    ser.markers.emplace_back(x, *s.overall_ppv);
    lo = std::min(lo, *s.overall_ppv);
  }
  for (auto& [kind, ser] : by_kind) {
    std::stable_sort(ser.points.begin(), ser.points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    ser.dashed = kind == DataKind::Accelerometer;
    c.series.push_back(std::move(ser));
  }
  c.y_min = std::max(0.0, std::floor(lo * 10.0) / 10.0 - 0.1);
  c.y_max = 1.0;
  return c;
}

/// Writes roc_<primitive>.svg for each primitive, time_train.svg and
/// time_test.svg when timings exist, and ablation.svg when ablation results
/// exist. Panels without data are skipped and listed in the notes.
inline PlotOutput emit_plots(const EvalReport& r, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  PlotOutput out;
  for (int k = 0; k < kNumClasses; ++k) {
    const auto name = std::string(label_name(label_from_code(k)));
    const auto chart = roc_chart(r, k, out.notes);
    if (chart.series.empty()) {
      out.notes.push_back("roc_" + name + ".svg skipped: no ROC curve for this primitive");
      continue;
    }
    const auto path = out_dir / ("roc_" + name + ".svg");
    svg::write(path, svg::render(chart));
    out.files.push_back(path);
  }
  if (r.timings.empty()) {
    out.notes.push_back("time_train.svg and time_test.svg skipped: report has no timings");
  } else {
    for (Phase p : {Phase::Train, Phase::Test}) {
      const auto path = out_dir / (p == Phase::Train ? "time_train.svg" : "time_test.svg");
      svg::write(path, svg::render(timing_chart(r, p)));
      out.files.push_back(path);
    }
  }
  if (r.ablation.empty()) {
    out.notes.push_back("ablation.svg skipped: report has no ablation results");
  } else {
    const auto path = out_dir / "ablation.svg";
    svg::write(path, svg::render(ablation_chart(r)));
    out.files.push_back(path);
  }
  return out;
}

}  // namespace moveprim
