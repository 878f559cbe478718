// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here
// and never relaxed at run time.

#include <moveprim/bench.hpp>
#include <moveprim/classifiers.hpp>
#include <moveprim/eval.hpp>
#include <moveprim/features.hpp>
#include <moveprim/metrics.hpp>
#include <moveprim/rng.hpp>
#include <moveprim/sensorsearch.hpp>
#include <moveprim/synth.hpp>

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"

using namespace moveprim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

/// Collects failed checks; the criterion passes when none failed.
struct Verdict {
  std::vector<std::string> failures;
  std::vector<std::string> facts;

  void check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& fact) { facts.push_back(fact); }
  bool ok() const { return failures.empty(); }
};

int failed_criteria = 0;

void run_criterion(int n, const std::string& name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = Clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.failures.push_back(std::string("exception: ") + e.what());
  }
  std::ostringstream line;
  line << (v.ok() ? "PASS" : "FAIL") << " [" << n << "] " << name << " (" << num(since(t0), 3) << " s)";
  const auto& parts = v.ok() ? v.facts : v.failures;
  for (std::size_t i = 0; i < parts.size(); ++i) line << (i == 0 ? ": " : "; ") << parts[i];
  std::cout << line.str() << std::endl;
  if (!v.ok()) ++failed_criteria;
}

SamplesPtr make_samples(RowMatrix x, std::vector<int> y) {
  auto s = std::make_shared<LabeledSamples>();
  s->x = std::move(x);
  s->y = std::move(y);
  return s;
}

const Dataset& default_dataset() {
  static const Dataset d = [] {
    SignalGenSpec spec;
    spec.seed = 1;
    return gen_signal_dataset(spec);
  }();
  return d;
}

// ---------------------------------------------------------------------------
// 1. classifiers against direct computations

void oracle_equivalence(Verdict& v) {
  const auto t0 = Clock::now();

  {
    Rng rng(101);
    std::vector<std::vector<double>> train(200, std::vector<double>(10));
    std::vector<int> y(200);
    RowMatrix x(200, 10);
    for (int i = 0; i < 200; ++i) {
      for (int f = 0; f < 10; ++f) {
        x(i, f) = train[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)] = rng.normal();
      }
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(4));
    }
    KnnModel m;
    m.fit(make_samples(x, y));
    int agree = 0;
    for (int i = 0; i < 200; ++i) {
      std::vector<double> q(10);
      for (auto& e : q) e = rng.normal();
      const auto nn = m.neighbors(q);
      const auto ref = oracle::nearest(train, q, 5);
      bool same = m.predict(q) == oracle::knn_label(train, y, q, 5);
      for (int j = 0; j < 5; ++j) same = same && nn[static_cast<std::size_t>(j)].index == ref[static_cast<std::size_t>(j)].second;
      agree += same ? 1 : 0;
    }
    v.check(agree == 200, "KNN agreed with the brute-force scan on " + std::to_string(agree) + "/200 queries");
    v.note("KNN " + std::to_string(agree) + "/200");
  }

  {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int F = 1 + trial % 6;
      const int per = 8 + trial;
      RowMatrix x(4 * per, F);
      std::vector<int> y;
      for (int i = 0; i < 4 * per; ++i) {
        const int c = i % 4;
        for (int f = 0; f < F; ++f) x(i, f) = rng.normal(0.5 * c - f, 0.4 + 0.2 * c);
        y.push_back(c);
      }
      NbcModel m;
      m.fit(x, y);
      for (int probe = 0; probe < 10; ++probe) {
        std::vector<double> q(static_cast<std::size_t>(F));
        for (auto& e : q) e = rng.normal(0.0, 2.0);
        const auto s = m.score(q);
        for (int c = 0; c < 4; ++c) {
          double expected = std::log(0.25);
          for (int f = 0; f < F; ++f) {
            double mean = 0.0;
            for (int i = c; i < 4 * per; i += 4) mean += x(i, f);
            mean /= per;
            double var = 0.0;
            for (int i = c; i < 4 * per; i += 4) var += (x(i, f) - mean) * (x(i, f) - mean);
            var /= per - 1;
            expected += oracle::gaussian_log_density(q[static_cast<std::size_t>(f)], mean, var);
          }
          worst = std::max(worst, std::abs(s[static_cast<std::size_t>(c)] - expected));
        }
      }
    }
    v.check(worst <= 1e-9, "NBC log-score differs from the direct sum by " + num(worst));
    v.note("NBC max |diff| " + num(worst, 3));
  }

  {
    Rng rng(303);
    double worst = 1.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int F = 2 + trial % 5;
      RowMatrix x(300, F);
      std::vector<int> y;
      for (int i = 0; i < 300; ++i) {
        const int c = i % 2;
        for (int f = 0; f < F; ++f) x(i, f) = rng.normal(c * (1.0 + 0.3 * f), 1.0 + 0.5 * f);
        x(i, 0) += 0.5 * x(i, F - 1);
        y.push_back(c);
      }
      LdaModel m;
      m.fit(x, y);
      const Eigen::VectorXd w = m.projection().col(0);
      const Eigen::VectorXd ref = oracle::fisher_direction(x, y);
      worst = std::min(worst, std::abs(w.dot(ref)) / (w.norm() * ref.norm()));
    }
    v.check(worst >= 0.999, "LDA direction cosine " + num(worst, 6));
    v.note("LDA min cosine " + num(worst, 6));
  }

  {
    RowMatrix x(2, 1);
    x << -1, 1;
    SvmOptions opts;
    opts.c = 1e6;
    const auto m = svm_fit_binary(x, std::vector<int>{-1, 1}, opts);
    v.check(std::abs(m.w[0] - 1.0) <= 1e-2 && std::abs(m.b) <= 1e-2,
            "SVM recovered w=" + num(m.w[0]) + " b=" + num(m.b));
    v.note("SVM w=" + num(m.w[0]) + " b=" + num(m.b, 2));
  }

  const double elapsed = since(t0);
  v.check(elapsed < 10.0, "took " + num(elapsed) + " s, limit 10 s");
}

// ---------------------------------------------------------------------------
// 2. metrics against recounts

void metric_correctness(Verdict& v) {
  Rng rng(404);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<int, int>> pairs;
    for (int t = 0; t < 4; ++t) {
      for (int p = 0; p < 4; ++p) {
        const auto n = static_cast<int>(rng.below(trial % 5 == 0 ? 3 : 40)) + (t == p ? 1 : 0);
        for (int i = 0; i < n; ++i) pairs.emplace_back(t, p);
      }
    }
    Confusion c;
    for (const auto& [t, p] : pairs) c.add(t, p);
    for (int k = 0; k < 4; ++k) {
      std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (const auto& [t, p] : pairs) {
        if (p == k && t == k) ++tp;
        else if (p == k) ++fp;
        else if (t == k) ++fn;
        else ++tn;
      }
      const auto pv = ppv(c, k);
      if (!pv || *pv != static_cast<double>(tp) / static_cast<double>(tp + fp)) ++mismatches;
      const auto ss = sensitivity_specificity(c, k);
      if (ss.sensitivity != static_cast<double>(tp) / static_cast<double>(tp + fn)) ++mismatches;
      if (ss.specificity != static_cast<double>(tn) / static_cast<double>(tn + fp)) ++mismatches;
    }
  }
  v.check(mismatches == 0, std::to_string(mismatches) + " confusion metrics disagreed with the recount");
  v.note("50 confusions recounted exactly");

  std::vector<bool> truth;
  std::vector<double> ordered, inverted;
  for (int i = 0; i < 100; ++i) {
    truth.push_back(i >= 60);
    ordered.push_back(i);
    inverted.push_back(-i);
  }
  const double a_perfect = roc_curve(truth, ordered).auc;
  const double a_inverted = roc_curve(truth, inverted).auc;
  v.check(a_perfect == 1.0, "AUC on ordered scores " + num(a_perfect));
  v.check(a_inverted == 0.0, "AUC on inverted scores " + num(a_inverted));

  double lo = 1.0, hi = 0.0, worst_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng r(seed);
    std::vector<bool> pos(2000);
    std::vector<double> s(2000), neg(2000);
    for (std::size_t i = 0; i < 2000; ++i) {
      pos[i] = r.uniform() < 0.5;
      s[i] = r.uniform();
      neg[i] = -s[i];
    }
    const double a = roc_curve(pos, s).auc;
    const double b = roc_curve(pos, neg).auc;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    worst_sum = std::max(worst_sum, std::abs(a + b - 1.0));
  }
  v.check(lo >= 0.45 && hi <= 0.55, "random-score AUC range [" + num(lo) + ", " + num(hi) + "]");
  v.check(worst_sum <= 1e-12, "AUC(s)+AUC(-s) off by " + num(worst_sum));
  v.note("random AUC in [" + num(lo) + ", " + num(hi) + "], max |AUC(s)+AUC(-s)-1| " + num(worst_sum, 3));
}

// ---------------------------------------------------------------------------
// 3. full pipeline on the default simulator

void pipeline_trends(Verdict& v) {
  const auto t0 = Clock::now();
  const auto& d = default_dataset();
  v.check(d.segment_count() == 2881, "dataset has " + std::to_string(d.segment_count()) + " segments");
  const std::vector<Algorithm> algos = {Algorithm::Lda, Algorithm::Nbc, Algorithm::Svm, Algorithm::Knn};
  SplitPlan plan;
  plan.train_frac = 0.6;
  plan.repeats = 10;
  plan.seed = 1;
  const auto r = run_experiment(d, SensorConfig::all(DataKind::Imu), WindowSpec{}, algos, plan);
  for (const auto& s : r.algorithms) {
    const std::string name(algorithm_name(s.algorithm));
    const double overall = s.overall_ppv.mean.value_or(0.0);
    const bool strong = s.algorithm == Algorithm::Lda || s.algorithm == Algorithm::Svm;
    v.check(overall >= (strong ? 0.90 : 0.75), name + " overall PPV " + num(overall));
    std::string aucs;
    for (int k = 0; k < kNumClasses; ++k) {
      const double auc = s.auc[static_cast<std::size_t>(k)].mean.value_or(0.0);
      aucs += (k ? "/" : "") + num(auc, 3);
      if (strong) {
        v.check(auc >= 0.95, name + " AUC " + std::string(label_name(label_from_code(k))) + " " + num(auc));
      }
    }
    v.note(name + " PPV " + num(overall, 3) + " AUC " + aucs);
  }
  const double elapsed = since(t0);
  v.check(elapsed < 600.0, "took " + num(elapsed) + " s, limit 600 s");
}

// ---------------------------------------------------------------------------
// 4. training and test time scaling

void complexity_scaling(Verdict& v) {
  const auto t0 = Clock::now();
  const auto fm = featurize_all(default_dataset(), SensorConfig::create({SensorSite::RForearm}, DataKind::Accelerometer),
                                WindowSpec{});
  auto spec = estimate_moments(fm);
  spec.total = 50000;
  spec.seed = 1;
  const auto data = gen_feature_dataset(spec);
  const double res = clock_resolution();
  v.note("resolution " + num(res, 2) + " s");

  BenchOptions opts;
  opts.reps = 3;
  opts.wall_s = 600.0;
  auto slope_of = [](const std::optional<ScalingFit>& f) { return f ? f->slope : std::nan(""); };
  auto test_spread = [](const TimingSummary& t) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& p : t.run.points) {
      lo = std::min(lo, p.test_s);
      hi = std::max(hi, p.test_s);
    }
    return hi / lo;
  };

  for (auto a : {Algorithm::Lda, Algorithm::Nbc, Algorithm::Knn, Algorithm::Svm}) {
    const std::string name(algorithm_name(a));
    const auto t = time_training(a, data, default_fractions(), 1, opts, res);
    const double train_slope = slope_of(t.train_fit);
    const double spread = test_spread(t);
    switch (a) {
      case Algorithm::Svm:
        v.check(train_slope >= 1.5, "svm train slope " + num(train_slope));
        break;
      case Algorithm::Knn: {
        double worst = 0.0;
        for (const auto& p : t.run.points) worst = std::max(worst, p.train_s);
        v.check(worst < 10.0 * res, "knn train time " + num(worst) + " s against " + num(10.0 * res) + " s");
        const double test_slope = slope_of(t.test_fit);
        v.check(test_slope >= 0.7 && test_slope <= 1.3, "knn test slope " + num(test_slope));
        v.note("knn max train " + num(worst, 2) + " s, test slope " + num(test_slope, 3));
        continue;
      }
      default:
        v.check(train_slope >= 0.7 && train_slope <= 1.4, name + " train slope " + num(train_slope));
    }
    v.check(spread < 2.0, name + " per-sample test time varies " + num(spread) + "x");
    std::string note = name + " train slope " + num(train_slope, 3) + ", test spread " + num(spread, 3) + "x";
    if (t.exceeds_wall) {
      note += ", stopped after " + std::to_string(t.run.points.size()) + " fractions, projected " +
              num(t.projected_full_train_s.value_or(0.0), 3) + " s at full size";
    }
    v.note(note);
  }
  const double elapsed = since(t0);
  v.check(elapsed < 1800.0, "took " + num(elapsed) + " s, limit 1800 s");
}

// ---------------------------------------------------------------------------
// 5. sensor search

using Sites = std::set<SensorSite>;

void power_set(const std::vector<SensorSite>& list, std::size_t i, Sites current, std::vector<Sites>& out) {
  if (i == list.size()) {
    if (!current.empty()) out.push_back(current);
    return;
  }
  power_set(list, i + 1, current, out);
  current.insert(list[i]);
  power_set(list, i + 1, current, out);
}

void ablation_structure(Verdict& v) {
  const std::vector<SensorSite> four = {SensorSite::RScapula, SensorSite::RArm, SensorSite::RForearm,
                                        SensorSite::RHand};
  int calls = 0;
  std::vector<Sites> seen;
  const Evaluator counting = [&](const SensorConfig& c) {
    ++calls;
    seen.emplace_back(c.sites().begin(), c.sites().end());
    AblationStep s;
    s.config = c;
    s.overall_ppv = 1.0 / static_cast<double>(c.size());
    return s;
  };
  const auto r = exhaustive_search(four, DataKind::Imu, counting);
  std::vector<Sites> expected;
  power_set(four, 0, {}, expected);
  const std::set<Sites> got(seen.begin(), seen.end());
  v.check(r.steps.size() == 15 && calls == 15, "exhaustive search ran " + std::to_string(calls) + " evaluations");
  v.check(got.size() == seen.size() && got == std::set<Sites>(expected.begin(), expected.end()),
          "exhaustive configs differ from the independent enumerator");
  v.note("15/15 subsets match");

  SplitPlan plan;
  plan.repeats = 3;
  plan.seed = 1;
  const auto evaluate = make_evaluator(default_dataset(), WindowSpec{}, plan, Algorithm::Lda);
  const auto pairs = compare_data_kinds(domain_knowledge_path(Side::Right), evaluate);
  std::string line;
  for (const auto& p : pairs) {
    const double imu = p.imu.overall_ppv.value_or(0.0);
    const double acc = p.accelerometer.overall_ppv.value_or(0.0);
    v.check(acc <= imu + 0.02, std::to_string(p.imu.config.size()) + "-site accel " + num(acc) + " vs imu " + num(imu));
    line += (line.empty() ? "" : " ") + std::to_string(p.imu.config.size()) + ":" + num(imu, 3) + "/" + num(acc, 3);
  }
  const double eleven = pairs.at(0).imu.overall_ppv.value_or(0.0);
  const double seven = pairs.at(1).imu.overall_ppv.value_or(0.0);
  v.check(seven >= eleven - 0.05, "7-site PPV " + num(seven) + " vs 11-site " + num(eleven));
  v.note("imu/accel PPV by sites " + line);
}

// ---------------------------------------------------------------------------
// 6. repeated CLI runs

const fs::path kWork = fs::temp_directory_path() / "moveprim_acceptance";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> run_cli(const std::string& args, const fs::path& out) {
  fs::remove_all(out);
  const std::string cmd = std::string(MOVEPRIM_CLI_PATH) + " " + args + " --out " + out.string() + " >/dev/null 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("'" + args + "' failed: " + slurp(kWork / "stderr.txt"));
  }
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), out).string()] = slurp(e.path());
  }
  return files;
}

std::string without_last_field(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

// Timing values blanked, slopes pulled out for a separate comparison.
nlohmann::json mask_timings(const std::string& report_text, std::vector<double>& slopes) {
  auto j = nlohmann::json::parse(report_text);
  j["timings"].erase("clock_resolution_s");
  for (auto& run : j["timings"]["runs"]) {
    for (auto& p : run["points"]) {
      p.erase("train_s");
      p.erase("test_s");
    }
    run.erase("projected_full_train_s");
    for (const char* fit : {"train_fit", "test_fit"}) {
      if (run[fit].is_null()) continue;
      slopes.push_back(run[fit]["slope"].get<double>());
      run[fit] = "fitted";
    }
  }
  return j;
}

void determinism(Verdict& v) {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const auto cfg = kWork / "config.json";
  std::ofstream(cfg) << R"({"synth": {"counts": [30, 30, 30, 30], "subjects": 2, "trials": 2},
                           "split": {"repeats": 2},
                           "bench": {"sample_rows": 50000, "reps": 3}})";
  const std::string base = "--config " + cfg.string() + " --seed 11";
  const fs::path data = kWork / "synth";
  run_cli("synth " + base, data);
  const std::string with_data = base + " --data " + (data / "data").string();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "synth " + base},
      {"featurize", "featurize " + with_data},
      {"eval", "eval " + with_data},
      {"search-domain", "search " + with_data + " --mode domain"},
      {"search-exhaustive", "search " + with_data + " --mode exhaustive --whitelist RArm,RForearm,RHand"},
  };
  std::size_t compared = 0;
  for (const auto& [name, args] : commands) {
    const auto out = kWork / name;
    const auto a = run_cli(args, out);
    const auto b = run_cli(args, out);
    v.check(a == b, name + " outputs differ between runs");
    compared += a.size();
  }

  // The report command reads report.json from its output directory.
  {
    const auto out = kWork / "report";
    run_cli("eval " + with_data + " --algorithms lda,nbc", kWork / "report_input");
    std::map<std::string, std::string> runs[2];
    for (auto& r : runs) {
      fs::remove_all(out);
      fs::create_directories(out);
      fs::copy_file(kWork / "report_input" / "report.json", out / "report.json");
      const std::string cmd = std::string(MOVEPRIM_CLI_PATH) + " report --out " + out.string() + " >/dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) throw std::runtime_error("report command failed");
      for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (e.is_regular_file()) r[fs::relative(e.path(), out).string()] = slurp(e.path());
      }
    }
    v.check(runs[0] == runs[1], "report outputs differ between runs");
    compared += runs[0].size();
  }

  {
    const std::string args = "bench " + with_data + " --algorithms lda,nbc,knn";
    const auto out = kWork / "bench";
    auto a = run_cli(args, out);
    auto b = run_cli(args, out);
    std::vector<double> sa, sb;
    v.check(without_last_field(a.at("timing.csv")) == without_last_field(b.at("timing.csv")),
            "timing.csv structure differs between runs");
    v.check(mask_timings(a.at("report.json"), sa) == mask_timings(b.at("report.json"), sb),
            "bench report differs outside timing values");
    v.check(a.at("report.roc.csv") == b.at("report.roc.csv"), "bench report.roc.csv differs");
    auto manifest = [](const std::string& text) {
      auto j = nlohmann::json::parse(text);
      for (auto& art : j["artifacts"]) art.erase("sha256");
      return j;
    };
    v.check(manifest(a.at("manifest.json")) == manifest(b.at("manifest.json")), "bench manifest differs");
    // Slopes are held to the same byte-identity as every other output.
    double worst = sa.size() == sb.size() && !sa.empty() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(sa.size(), sb.size()); ++i) worst = std::max(worst, std::abs(sa[i] - sb[i]));
    v.check(sa == sb, "bench slopes differ between runs (max |difference| " + num(worst, 3) + ")");
    v.note("bench slopes identical");
    compared += a.size();
  }
  v.note(std::to_string(compared) + " files byte-identical across runs");
}

// ---------------------------------------------------------------------------
// 7. window and feature arithmetic

void window_arithmetic(Verdict& v) {
  // Windows of 60 samples every 24 samples inside 2400 samples.
  const long direct = (2400 - 60) / 24 + 1;
  const auto got = window_count(2400, WindowSpec{}, 240.0);
  v.check(got == 98 && direct == 98, "window count " + std::to_string(got));

  const auto right7 = domain_knowledge_path(Side::Right).at(1);
  const std::vector<std::pair<SensorConfig, std::size_t>> widths = {
      {SensorConfig::all(DataKind::Imu), 880},
      {right7, 560},
      {right7.with_kind(DataKind::Accelerometer), 168},
  };
  SignalGenSpec spec;
  spec.counts = {4, 4, 4, 4};
  spec.subjects = 1;
  spec.trials = 1;
  spec.seed = 3;
  const auto d = gen_signal_dataset(spec);
  for (const auto& [cfg, width] : widths) {
    const auto names = feature_names(cfg);
    const auto fm = featurize_all(d, cfg, WindowSpec{});
    v.check(names.size() == width && static_cast<std::size_t>(fm.features()) == width,
            cfg.sites_string() + " width " + std::to_string(names.size()) + "/" + std::to_string(fm.features()));
  }
  v.note("98 windows, widths 880/560/168");
}

}  // namespace

int main() {
  run_criterion(1, "oracle equivalence", oracle_equivalence);
  run_criterion(2, "metric correctness", metric_correctness);
  run_criterion(3, "pipeline trends on the default simulator", pipeline_trends);
  run_criterion(4, "complexity scaling", complexity_scaling);
  run_criterion(5, "ablation structure", ablation_structure);
  run_criterion(6, "determinism", determinism);
  run_criterion(7, "window arithmetic", window_arithmetic);
  std::cout << (7 - failed_criteria) << "/7 criteria passed" << std::endl;
  return failed_criteria == 0 ? 0 : 1;
}
