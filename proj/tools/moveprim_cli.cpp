// moveprim: command-line front end for simulation, featurization, evaluation,
// sensor search, timing benchmarks and report rendering.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <moveprim/bench.hpp>
#include <moveprim/eval.hpp>
#include <moveprim/ingest.hpp>
#include <moveprim/plots.hpp>
#include <moveprim/run_config.hpp>
#include <moveprim/sensorsearch.hpp>
#include <moveprim/synth.hpp>

namespace fs = std::filesystem;
using namespace moveprim;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

/// manifest.json: command, config echo, seed, and a hash of every artifact.
void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<fs::path>& artifacts) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : artifacts) {
    files.push_back({{"path", fs::relative(p, cfg.out_dir).generic_string()}, {"sha256", sha256_file(p)}});
  }
  const nlohmann::json m = {{"command", command}, {"seed", cfg.seed}, {"config", to_json(cfg)}, {"artifacts", files}};
  auto out = csv::open_for_write(cfg.out_dir / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing the manifest");
}

void ensure_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + cfg.out_dir.string() + ": " + ec.message());
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data_dir) return read_dataset(*cfg.data_dir, cfg.sample_rate_hz);
  return gen_signal_dataset(cfg.synth_spec(), cfg.threads);
}

EvalReport base_report(const RunConfig& cfg) {
  EvalReport r;
  r.config = to_json(cfg);
  return r;
}

std::vector<fs::path> cmd_synth(const RunConfig& cfg) {
  const auto d = gen_signal_dataset(cfg.synth_spec(), cfg.threads);
  auto files = write_dataset(d, cfg.out_dir / "data");
  std::cerr << "wrote " << d.recordings.size() << " recordings, " << d.segment_count()
            << " segments to " << (cfg.out_dir / "data").string() << '\n';
  return files;
}

std::vector<fs::path> cmd_featurize(const RunConfig& cfg) {
  const auto d = load_dataset(cfg);
  const auto fm = featurize_all(d, cfg.sensors, cfg.window, cfg.threads);
  const auto path = cfg.out_dir / "features.csv";
  write_feature_csv(fm, path.string());
  std::cerr << "wrote " << fm.windows() << " windows x " << fm.features() << " features\n";
  return {path};
}

std::vector<fs::path> cmd_eval(const RunConfig& cfg) {
  const auto d = load_dataset(cfg);
  ExperimentOptions opts;
  opts.threads = cfg.threads;
  auto r = run_experiment(d, cfg.sensors, cfg.window, cfg.algorithms, cfg.split_plan(), opts);
  r.config = to_json(cfg);
  for (const auto& s : r.algorithms) {
    std::cerr << algorithm_name(s.algorithm) << ": overall PPV "
              << (s.overall_ppv.mean ? csv::format(*s.overall_ppv.mean) : "undefined") << '\n';
  }
  return write_report(r, cfg.out_dir / "report.json");
}

std::vector<fs::path> cmd_search(const RunConfig& cfg) {
  const auto d = load_dataset(cfg);
  ExperimentOptions opts;
  opts.threads = cfg.threads;
  const auto evaluate = make_evaluator(d, cfg.window, cfg.split_plan(), cfg.search.algorithm, opts);
  auto r = base_report(cfg);
  if (cfg.search.mode == SearchMode::Exhaustive) {
    const auto res = exhaustive_search(cfg.search.whitelist, cfg.sensors.kind(), evaluate, cfg.search.budget);
    r.ablation = res.steps;
    const auto& best = res.best_step();
    r.notes.push_back("best configuration: " + best.config.sites_string() + " (" +
                      std::to_string(best.config.size()) + " sensors)");
  } else {
    const auto path = domain_knowledge_path(cfg.synth.active_side, cfg.sensors.kind());
    if (cfg.search.compare_kinds) {
      for (const auto& c : compare_data_kinds(path, evaluate)) {
        r.ablation.push_back(c.imu);
        r.ablation.push_back(c.accelerometer);
      }
    } else {
      r.ablation = evaluate_all(path, evaluate);
    }
  }
  r.notes.push_back("sensor configurations scored with " +
                    std::string(algorithm_name(cfg.search.algorithm)) + " on identical splits");
  const auto csv_path = cfg.out_dir / "search.csv";
  write_search_csv(r.ablation, csv_path);
  std::cerr << "evaluated " << r.ablation.size() << " configurations\n";
  auto files = write_report(r, cfg.out_dir / "report.json");
  files.insert(files.begin(), csv_path);
  return files;
}

std::vector<fs::path> cmd_bench(const RunConfig& cfg) {
  const auto d = load_dataset(cfg);
  const auto fm = featurize_all(d, cfg.bench.sensors, cfg.window, cfg.threads);
  auto spec = estimate_moments(fm);
  spec.seed = cfg.seed;
  const bool realworld = cfg.bench.scale == BenchScale::Realworld;
  spec.total = realworld ? cfg.bench.realworld_rows : cfg.bench.sample_rows;
  BenchOptions opts;
  opts.reps = cfg.bench.reps;
  opts.wall_s = cfg.bench.wall_s;
  const double res = clock_resolution();
  const auto fractions = realworld ? quartile_fractions() : default_fractions();
  const auto data = gen_feature_dataset(spec);

  auto r = base_report(cfg);
  r.clock_resolution_s = res;
  for (auto a : cfg.algorithms) {
    std::cerr << "timing " << algorithm_name(a) << " on " << spec.total << " rows x " << spec.features()
              << " features\n";
    r.timings.push_back(time_training(a, data, fractions, cfg.seed, opts, res));
    const auto& t = r.timings.back();
    if (t.exceeds_wall) {
      r.notes.push_back(std::string(algorithm_name(a)) + ": stopped at the " + csv::format(cfg.bench.wall_s) +
                        " s wall after " + std::to_string(t.run.points.size()) + " fractions; projected full-size train time " +
                        csv::format(t.projected_full_train_s.value_or(0.0)) + " s");
    }
  }
  r.notes.push_back("times are wall-clock medians over " + std::to_string(cfg.bench.reps) +
                    " fits after a discarded warm-up; featurization is not timed");
  const auto csv_path = cfg.out_dir / "timing.csv";
  write_timing_csv(r.timings, csv_path);
  auto files = write_report(r, cfg.out_dir / "report.json");
  files.insert(files.begin(), csv_path);
  return files;
}

std::vector<fs::path> cmd_report(const RunConfig& cfg) {
  const fs::path input = cfg.report_input ? *cfg.report_input : cfg.out_dir / "report.json";
  const auto r = read_report(input);
  const auto plots = emit_plots(r, cfg.out_dir);
  for (const auto& n : plots.notes) std::cerr << "note: " << n << '\n';
  std::vector<fs::path> files = plots.files;
  const auto tuning_path = cfg.out_dir / "tuning.csv";
  {
    auto out = csv::open_for_write(tuning_path);
    out << "algorithm,parameter_count,domain_knowledge,parameters\n";
    for (const auto& e : tuning_table()) {
      std::string params;
      for (const auto& p : e.parameters) params += (params.empty() ? "" : ";") + p;
      out << algorithm_name(e.algorithm) << ',' << e.parameter_count() << ',' << e.domain_knowledge << ','
          << params << '\n';
    }
  }
  files.push_back(tuning_path);
  return files;
}

struct Overrides {
  nlohmann::json j = nlohmann::json::object();

  template <typename T>
  void add(CLI::App* app, const std::string& flag, const std::string& path, const std::string& help) {
    app->add_option_function<T>(flag, [this, path](const T& v) { set_path(j, path, v); }, help);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Movement-primitive classification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  Overrides ov;
  app.add_option("--config", config_path, "JSON run configuration; flags override its values")
      ->check(CLI::ExistingFile);
  ov.add<std::uint64_t>(&app, "--seed", "seed", "Seed for simulation, splits and subsampling (default 1)");
  ov.add<std::string>(&app, "--out", "out", "Output directory (default out)");
  ov.add<int>(&app, "--threads", "threads", "Worker threads (default 1)");

  auto data_flags = [&](CLI::App* sub) {
    ov.add<std::string>(sub, "--data", "data_dir", "Dataset directory; simulated in memory when omitted");
    ov.add<double>(sub, "--rate", "sample_rate_hz", "Sample rate in Hz (default 240)");
    ov.add<double>(sub, "--noise", "synth.noise_std", "Simulator noise scale (default 2)");
  };
  auto window_flags = [&](CLI::App* sub) {
    ov.add<double>(sub, "--window", "window.width_s", "Window width in seconds (default 0.25)");
    ov.add<double>(sub, "--stride", "window.stride_s", "Window stride in seconds (default 0.1)");
  };
  auto sensor_flags = [&](CLI::App* sub) {
    ov.add<std::string>(sub, "--sites", "sensors.sites", "Comma-separated sensor sites, or 'all'");
    ov.add<std::string>(sub, "--kind", "sensors.kind", "Data kind: imu or accelerometer");
  };
  auto split_flags = [&](CLI::App* sub) {
    ov.add<int>(sub, "--repeats", "split.repeats", "Random train/test splits (default 10)");
    ov.add<double>(sub, "--train-frac", "split.train_frac", "Training fraction of segments (default 0.6)");
  };
  std::string algorithms_csv;
  auto algorithm_flag = [&](CLI::App* sub) {
    sub->add_option("--algorithms", algorithms_csv,
                    "Comma-separated algorithms: " + algorithm_names() + " (default all)");
  };

  auto* synth = app.add_subcommand("synth", "Simulate a labeled multi-sensor dataset into <out>/data");
  ov.add<double>(synth, "--noise", "synth.noise_std", "Noise scale (default 2)");
  ov.add<int>(synth, "--subjects", "synth.subjects", "Simulated subjects (default 6)");
  ov.add<int>(synth, "--trials", "synth.trials", "Trials per subject (default 5)");
  ov.add<double>(synth, "--rate", "sample_rate_hz", "Sample rate in Hz (default 240)");
  ov.add<std::string>(synth, "--active-side", "synth.active_side", "Active side: left or right");

  auto* featurize = app.add_subcommand("featurize", "Write the window feature matrix to <out>/features.csv");
  data_flags(featurize);
  window_flags(featurize);
  sensor_flags(featurize);

  auto* eval = app.add_subcommand("eval", "Repeated train/test evaluation; writes <out>/report.json");
  data_flags(eval);
  window_flags(eval);
  sensor_flags(eval);
  split_flags(eval);
  algorithm_flag(eval);

  auto* search = app.add_subcommand("search", "Sensor-subset search; writes <out>/search.csv and report.json");
  data_flags(search);
  window_flags(search);
  split_flags(search);
  ov.add<std::string>(search, "--mode", "search.mode", "domain (hand-ordered path) or exhaustive");
  ov.add<std::string>(search, "--whitelist", "search.whitelist", "Sites searched exhaustively (default all)");
  ov.add<std::size_t>(search, "--budget", "search.budget", "Maximum number of configurations to evaluate");
  ov.add<std::string>(search, "--algorithm", "search.algorithm", "Algorithm used to score configurations (default lda)");
  ov.add<std::string>(search, "--kind", "sensors.kind", "Data kind: imu or accelerometer");
  ov.add<bool>(search, "--compare-kinds", "search.compare_kinds", "Domain mode: also score accelerometer-only (default true)");

  auto* bench = app.add_subcommand("bench", "Train/test timing against data size; writes <out>/timing.csv and report.json");
  data_flags(bench);
  window_flags(bench);
  algorithm_flag(bench);
  ov.add<std::string>(bench, "--scale", "bench.scale", "sample (0.2..1.0 of sample_rows) or realworld (quartiles of realworld_rows)");
  ov.add<std::size_t>(bench, "--rows", "bench.sample_rows", "Rows of the sample-scale dataset (default 50000)");
  ov.add<std::size_t>(bench, "--realworld-rows", "bench.realworld_rows", "Rows of the realworld-scale dataset (default 300000)");
  ov.add<int>(bench, "--reps", "bench.reps", "Timed fits per fraction after the warm-up (default 3)");
  ov.add<double>(bench, "--wall", "bench.wall_s", "Per-algorithm time budget in seconds (default 1800)");
  ov.add<std::string>(bench, "--bench-sites", "bench.sensors.sites", "Sites whose feature moments seed the dataset (default RForearm)");
  ov.add<std::string>(bench, "--bench-kind", "bench.sensors.kind", "Data kind for the bench features (default accelerometer)");

  auto* report = app.add_subcommand("report", "Render SVG figures and the tuning table from a report");
  ov.add<std::string>(report, "--input", "report_input", "Report JSON (default <out>/report.json)");

  for (auto* sub : app.get_subcommands({})) {
    sub->footer("Global options (accepted before or after the subcommand): --config <json>, --seed <u64>, "
                "--out <dir>, --threads <n>. See 'moveprim --help'.");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, config_path + ": " + e.what());
      }
    }
    if (!algorithms_csv.empty()) {
      nlohmann::json names = nlohmann::json::array();
      std::stringstream ss(algorithms_csv);
      for (std::string tok; std::getline(ss, tok, ',');) {
        if (!tok.empty()) names.push_back(tok);
      }
      j["algorithms"] = names;
    }
    std::vector<std::pair<std::string, nlohmann::json>> flat;
    std::function<void(const nlohmann::json&, const std::string&)> walk = [&](const nlohmann::json& node,
                                                                               const std::string& prefix) {
      for (const auto& [k, v] : node.items()) {
        const auto key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) walk(v, key);
        else flat.emplace_back(key, v);
      }
    };
    walk(ov.j, "");
    for (auto& [k, v] : flat) set_path(j, k, v);

    const RunConfig cfg = run_config_from_json(j);
    ensure_out(cfg);
    std::vector<fs::path> files;
    std::string command;
    if (synth->parsed()) command = "synth", files = cmd_synth(cfg);
    else if (featurize->parsed()) command = "featurize", files = cmd_featurize(cfg);
    else if (eval->parsed()) command = "eval", files = cmd_eval(cfg);
    else if (search->parsed()) command = "search", files = cmd_search(cfg);
    else if (bench->parsed()) command = "bench", files = cmd_bench(cfg);
    else if (report->parsed()) command = "report", files = cmd_report(cfg);
    write_manifest(cfg, command, files);
    for (const auto& f : files) std::cout << f.string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
