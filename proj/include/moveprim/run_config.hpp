#pragma once

// Run configuration: one JSON document, every field optional, unknown keys
// rejected. The CLI merges its flags into the document before parsing, and the
// parsed config is echoed in full into every report and manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bench.hpp"
#include "classifier.hpp"
#include "core_types.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "synth.hpp"

namespace moveprim {

enum class SearchMode : std::uint8_t { Domain, Exhaustive };
enum class BenchScale : std::uint8_t { Sample, Realworld };

struct SearchSettings {
  SearchMode mode = SearchMode::Domain;
  std::vector<SensorSite> whitelist;  // empty: all sites
  std::optional<std::size_t> budget;
  Algorithm algorithm = Algorithm::Lda;
  bool compare_kinds = true;  // domain mode: also score accelerometer-only
};

struct BenchSettings {
  BenchScale scale = BenchScale::Sample;
  std::size_t sample_rows = 50000;
  std::size_t realworld_rows = 300000;
  int reps = 3;
  double wall_s = 1800.0;
  SensorConfig sensors = SensorConfig::create({SensorSite::RForearm}, DataKind::Accelerometer);
};

struct RunConfig {
  std::optional<std::filesystem::path> data_dir;  // unset: simulate in memory
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  double sample_rate_hz = kDefaultSampleRateHz;
  WindowSpec window;
  SensorConfig sensors = SensorConfig::all();
  double train_frac = 0.6;
  int repeats = 10;
  std::vector<Algorithm> algorithms{kAllAlgorithms.begin(), kAllAlgorithms.end()};
  SignalGenSpec synth;
  SearchSettings search;
  BenchSettings bench;
  std::optional<std::filesystem::path> report_input;

  SplitPlan split_plan() const {
    SplitPlan p;
    p.train_frac = train_frac;
    p.repeats = repeats;
    p.seed = seed;
    return p;
  }

  SignalGenSpec synth_spec() const {
    SignalGenSpec s = synth;
    s.seed = seed;
    s.sample_rate_hz = sample_rate_hz;
    return s;
  }

  void validate() const {
    if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be at least 1");
    window.validate(sample_rate_hz);
    split_plan().validate();
    synth_spec().validate();
    if (algorithms.empty()) throw Error(ErrorCode::InvalidArgument, "no algorithms selected");
    if (bench.reps < 1) throw Error(ErrorCode::InvalidArgument, "bench reps must be at least 1");
    if (!(bench.wall_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "bench wall must be positive");
    if (bench.sample_rows < 8 || bench.realworld_rows < 8) {
      throw Error(ErrorCode::InvalidArgument, "bench row counts are too small");
    }
  }
};

namespace detail {

inline std::string sites_text(const std::vector<SensorSite>& sites) {
  std::string out;
  for (auto s : sites) {
    if (!out.empty()) out += ',';
    out += site_name(s);
  }
  return out;
}

inline nlohmann::json sensors_json(const SensorConfig& c) {
  return {{"sites", c.sites_string()}, {"kind", std::string(kind_name(c.kind()))}};
}

/// Throws on any key of `j` outside `allowed`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read_if(const nlohmann::json& j, std::string_view key, T& out) {
  const auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + std::string(key) + "' has the wrong type");
  }
}

inline SensorConfig sensors_from_json(const nlohmann::json& j, const SensorConfig& fallback,
                                      const std::string& where) {
  check_keys(j, {"sites", "kind"}, where);
  std::string sites = fallback.sites_string();
  std::string kind(kind_name(fallback.kind()));
  read_if(j, "sites", sites);
  read_if(j, "kind", kind);
  const auto k = parse_kind(kind);
  if (!k) throw Error(ErrorCode::InvalidArgument, "unknown data kind '" + kind + "' (imu, accelerometer)");
  if (sites == "all") return SensorConfig::all(*k);
  return SensorConfig::create(parse_site_list(sites), *k);
}

inline Algorithm algorithm_or_throw(const std::string& name) {
  const auto a = parse_algorithm(name);
  if (!a) {
    throw Error(ErrorCode::InvalidArgument,
                "unknown algorithm '" + name + "'; valid names: " + algorithm_names());
  }
  return *a;
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json algos = nlohmann::json::array();
  for (auto a : c.algorithms) algos.push_back(std::string(algorithm_name(a)));
  nlohmann::json counts = nlohmann::json::array();
  nlohmann::json durations = nlohmann::json::array();
  for (int k = 0; k < kNumClasses; ++k) {
    counts.push_back(c.synth.counts[static_cast<std::size_t>(k)]);
    const auto& d = c.synth.durations[static_cast<std::size_t>(k)];
    durations.push_back({d.min_s, d.max_s});
  }
  return {
      {"data_dir", c.data_dir ? nlohmann::json(c.data_dir->string()) : nlohmann::json(nullptr)},
      {"out", c.out_dir.string()},
      {"seed", c.seed},
      {"threads", c.threads},
      {"sample_rate_hz", c.sample_rate_hz},
      {"window", {{"width_s", c.window.width_s}, {"stride_s", c.window.stride_s}}},
      {"sensors", detail::sensors_json(c.sensors)},
      {"split", {{"train_frac", c.train_frac}, {"repeats", c.repeats}}},
      {"algorithms", algos},
      {"synth",
       {{"counts", counts},
        {"durations_s", durations},
        {"noise_std", c.synth.noise_std},
        {"subjects", c.synth.subjects},
        {"trials", c.synth.trials},
        {"active_side", c.synth.active_side == Side::Right ? "right" : "left"}}},
      {"search",
       {{"mode", c.search.mode == SearchMode::Domain ? "domain" : "exhaustive"},
        {"whitelist", detail::sites_text(c.search.whitelist)},
        {"budget", c.search.budget ? nlohmann::json(*c.search.budget) : nlohmann::json(nullptr)},
        {"algorithm", std::string(algorithm_name(c.search.algorithm))},
        {"compare_kinds", c.search.compare_kinds}}},
      {"bench",
       {{"scale", c.bench.scale == BenchScale::Sample ? "sample" : "realworld"},
        {"sample_rows", c.bench.sample_rows},
        {"realworld_rows", c.bench.realworld_rows},
        {"reps", c.bench.reps},
        {"wall_s", c.bench.wall_s},
        {"sensors", detail::sensors_json(c.bench.sensors)}}},
      {"report_input",
       c.report_input ? nlohmann::json(c.report_input->string()) : nlohmann::json(nullptr)},
  };
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::read_if;
  detail::check_keys(j,
                     {"data_dir", "out", "seed", "threads", "sample_rate_hz", "window", "sensors",
                      "split", "algorithms", "synth", "search", "bench", "report_input"},
                     "");
  RunConfig c;
  std::string text;
  if (j.contains("data_dir") && !j["data_dir"].is_null()) {
    read_if(j, "data_dir", text);
    c.data_dir = text;
  }
  if (j.contains("out")) {
    read_if(j, "out", text);
    c.out_dir = text;
  }
  read_if(j, "seed", c.seed);
  read_if(j, "threads", c.threads);
  read_if(j, "sample_rate_hz", c.sample_rate_hz);
  if (j.contains("window")) {
    const auto& w = j["window"];
    detail::check_keys(w, {"width_s", "stride_s"}, "window.");
    read_if(w, "width_s", c.window.width_s);
    read_if(w, "stride_s", c.window.stride_s);
  }
  if (j.contains("sensors")) c.sensors = detail::sensors_from_json(j["sensors"], c.sensors, "sensors.");
  if (j.contains("split")) {
    const auto& s = j["split"];
    detail::check_keys(s, {"train_frac", "repeats"}, "split.");
    read_if(s, "train_frac", c.train_frac);
    read_if(s, "repeats", c.repeats);
  }
  if (j.contains("algorithms")) {
    std::vector<std::string> names;
    read_if(j, "algorithms", names);
    c.algorithms.clear();
    for (const auto& n : names) {
      const auto a = detail::algorithm_or_throw(n);
      if (std::find(c.algorithms.begin(), c.algorithms.end(), a) == c.algorithms.end()) {
        c.algorithms.push_back(a);
      }
    }
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    detail::check_keys(s, {"counts", "durations_s", "noise_std", "subjects", "trials", "active_side"},
                       "synth.");
    if (s.contains("counts")) {
      std::vector<std::size_t> counts;
      read_if(s, "counts", counts);
      if (counts.size() != kNumClasses) throw Error(ErrorCode::InvalidArgument, "synth.counts needs 4 values");
      for (int k = 0; k < kNumClasses; ++k) c.synth.counts[static_cast<std::size_t>(k)] = counts[static_cast<std::size_t>(k)];
    }
    if (s.contains("durations_s")) {
      std::vector<std::array<double, 2>> d;
      read_if(s, "durations_s", d);
      if (d.size() != kNumClasses) {
        throw Error(ErrorCode::InvalidArgument, "synth.durations_s needs 4 [min, max] pairs");
      }
      for (int k = 0; k < kNumClasses; ++k) {
        c.synth.durations[static_cast<std::size_t>(k)] = {d[static_cast<std::size_t>(k)][0], d[static_cast<std::size_t>(k)][1]};
      }
    }
    read_if(s, "noise_std", c.synth.noise_std);
    read_if(s, "subjects", c.synth.subjects);
    read_if(s, "trials", c.synth.trials);
    if (s.contains("active_side")) {
      read_if(s, "active_side", text);
      if (text == "right") c.synth.active_side = Side::Right;
      else if (text == "left") c.synth.active_side = Side::Left;
      else throw Error(ErrorCode::InvalidArgument, "synth.active_side must be 'left' or 'right'");
    }
  }
  if (j.contains("search")) {
    const auto& s = j["search"];
    detail::check_keys(s, {"mode", "whitelist", "budget", "algorithm", "compare_kinds"}, "search.");
    if (s.contains("mode")) {
      read_if(s, "mode", text);
      if (text == "domain") c.search.mode = SearchMode::Domain;
      else if (text == "exhaustive") c.search.mode = SearchMode::Exhaustive;
      else throw Error(ErrorCode::InvalidArgument, "search.mode must be 'domain' or 'exhaustive'");
    }
    if (s.contains("whitelist")) {
      text.clear();
      read_if(s, "whitelist", text);
      c.search.whitelist = text == "all" ? std::vector<SensorSite>{} : parse_site_list(text);
    }
    if (s.contains("budget") && !s["budget"].is_null()) {
      std::size_t b = 0;
      read_if(s, "budget", b);
      c.search.budget = b;
    }
    if (s.contains("algorithm")) {
      read_if(s, "algorithm", text);
      c.search.algorithm = detail::algorithm_or_throw(text);
    }
    read_if(s, "compare_kinds", c.search.compare_kinds);
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    detail::check_keys(b, {"scale", "sample_rows", "realworld_rows", "reps", "wall_s", "sensors"}, "bench.");
    if (b.contains("scale")) {
      read_if(b, "scale", text);
      if (text == "sample") c.bench.scale = BenchScale::Sample;
      else if (text == "realworld") c.bench.scale = BenchScale::Realworld;
      else throw Error(ErrorCode::InvalidArgument, "bench.scale must be 'sample' or 'realworld'");
    }
    read_if(b, "sample_rows", c.bench.sample_rows);
    read_if(b, "realworld_rows", c.bench.realworld_rows);
    read_if(b, "reps", c.bench.reps);
    read_if(b, "wall_s", c.bench.wall_s);
    if (b.contains("sensors")) c.bench.sensors = detail::sensors_from_json(b["sensors"], c.bench.sensors, "bench.sensors.");
  }
  if (j.contains("report_input") && !j["report_input"].is_null()) {
    read_if(j, "report_input", text);
    c.report_input = text;
  }
  c.validate();
  return c;
}

/// Set `value` at a dotted path ("bench.reps") inside `j`, creating objects.
inline void set_path(nlohmann::json& j, std::string_view dotted, nlohmann::json value) {
  nlohmann::json* node = &j;
  while (true) {
    const auto dot = dotted.find('.');
    const std::string key(dotted.substr(0, dot));
    if (dot == std::string_view::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = nlohmann::json::object();
    node = &(*node)[key];
    dotted.remove_prefix(dot + 1);
  }
}

}  // namespace moveprim
