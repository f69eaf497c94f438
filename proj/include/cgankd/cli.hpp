#pragma once

// Command implementations behind tools/cgankd. Each command reads its inputs,
// writes every output under its --out-dir, and returns a process exit status:
//   0 success, 2 configuration or usage error, 3 pipeline stage failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cgankd/config.hpp"
#include "cgankd/csv.hpp"
#include "cgankd/distill.hpp"
#include "cgankd/theory.hpp"

namespace cgankd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStage = 3;

// ---------------------------------------------------------------------------
// Report rows

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> c{"task",         "N_r",
                                          "N_g",          "M_g",
                                          "rho",          "theta",
                                          "teacher_metric", "student_nokd_metric",
                                          "student_cgankd_metric", "consistency_before",
                                          "consistency_after", "seed"};
  return c;
}

inline std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::vector<std::string> report_row(const PipelineReport& r) {
  return {r.task.is_classification() ? "classification" : "regression",
          std::to_string(r.n_real),
          std::to_string(r.n_fake),
          std::to_string(r.m_fake),
          format_double(r.rho),
          format_double(r.theta),
          format_double(r.teacher.value()),
          format_double(r.student_nokd.value()),
          format_double(r.student_cgankd.value()),
          opt_double(r.filter.consistency_before),
          opt_double(r.filter.consistency_after),
          std::to_string(r.seed)};
}

inline CsvTable report_table(const PipelineReport& r) { return {report_columns(), {report_row(r)}}; }

struct MeanStd {
  double mean = 0.0;
  std::optional<double> stddev;  // sample standard deviation; absent for n < 2
  std::size_t n = 0;
};

inline MeanStd mean_stddev(const std::vector<double>& v) {
  MeanStd m;
  m.n = v.size();
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Parallel cells

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the exception
/// of the lowest failing index.
template <class Fn>
void run_cells(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParam { mg, rho, teacher_epochs };

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "mg") return SweepParam::mg;
  if (s == "rho") return SweepParam::rho;
  if (s == "teacher-epochs") return SweepParam::teacher_epochs;
  throw ConfigError("unknown sweep parameter '" + s + "' (expected mg, rho or teacher-epochs)");
}

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::mg: return "mg";
    case SweepParam::rho: return "rho";
    case SweepParam::teacher_epochs: return "teacher-epochs";
  }
  return "";
}

inline void check_sweep_value(SweepParam p, double v) {
  const bool integral = v == std::floor(v) && v >= 0.0;
  if (p == SweepParam::rho && !(v >= 0.0 && v <= 1.0)) throw ConfigError("rho sweep values must lie in [0,1]");
  if (p == SweepParam::mg && !integral) throw ConfigError("mg sweep values must be nonnegative integers");
  if (p == SweepParam::teacher_epochs && !integral) throw ConfigError("teacher-epochs values must be nonnegative integers");
}

inline std::vector<std::string> sweep_columns() {
  std::vector<std::string> c{"param", "value", "stat"};
  for (const auto& r : report_columns())
    if (r != "seed") c.push_back(r);
  c.push_back("seed");
  return c;
}

/// Numeric report columns averaged in mean/stddev rows.
inline const std::vector<std::string>& aggregated_columns() {
  static const std::vector<std::string> c{"M_g", "theta", "teacher_metric", "student_nokd_metric",
                                          "student_cgankd_metric", "consistency_before", "consistency_after"};
  return c;
}

/// Appends mean and stddev rows computed from `runs` (rows in `columns` layout).
inline void append_summary_rows(std::vector<std::vector<std::string>>& out, const std::vector<std::string>& columns,
                                const std::vector<std::vector<std::string>>& runs, const std::vector<std::string>& keep,
                                const std::vector<std::string>& numeric, std::size_t stat_col) {
  if (runs.empty()) return;
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(columns.begin(), columns.end(), name) - columns.begin());
  };
  std::vector<std::string> mean_row(columns.size()), std_row(columns.size());
  for (const auto& k : keep) mean_row[col(k)] = std_row[col(k)] = runs.front()[col(k)];
  mean_row[stat_col] = "mean";
  std_row[stat_col] = "stddev";
  for (const auto& name : numeric) {
    const auto c = col(name);
    std::vector<double> v;
    for (const auto& r : runs)
      if (!r[c].empty()) v.push_back(parse_double(r[c]));
    if (v.size() != runs.size()) continue;  // blank when any run lacks the value
    const auto ms = mean_stddev(v);
    mean_row[c] = format_double(ms.mean);
    std_row[c] = opt_double(ms.stddev);
  }
  out.push_back(std::move(mean_row));
  out.push_back(std::move(std_row));
}

struct SweepRun {
  double value = 0.0;
  std::uint64_t seed = 0;
  PipelineReport report;
};

/// One pipeline per (value, seed). rho and mg cells share the stages that
/// precede filtering across values.
inline std::vector<SweepRun> run_sweep_cells(const PipelineConfig& base, SweepParam param,
                                             const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
                                             std::size_t jobs) {
  for (double v : values) check_sweep_value(param, v);
  std::vector<SweepRun> runs(values.size() * seeds.size());
  if (param == SweepParam::teacher_epochs) {
    run_cells(runs.size(), jobs, [&](std::size_t i) {
      PipelineConfig cfg = base;
      cfg.seed = seeds[i % seeds.size()];
      cfg.teacher.train.epochs = static_cast<std::size_t>(values[i / seeds.size()]);
      runs[i] = {values[i / seeds.size()], cfg.seed, run_pipeline(cfg)};
    });
  } else {
    run_cells(seeds.size(), jobs, [&](std::size_t s) {
      PipelineConfig cfg = base;
      cfg.seed = seeds[s];
      PrepareOptions opt;
      opt.need_m1 = cfg.use_m1;
      opt.need_raw = !cfg.use_m1;
      const auto st = prepare_stages(cfg, opt);
      for (std::size_t v = 0; v < values.size(); ++v) {
        auto var = variant_of(cfg);
        if (param == SweepParam::rho) var.rho = values[v];
        else var.mg_cap = static_cast<std::size_t>(values[v]);
        runs[v * seeds.size() + s] = {values[v], cfg.seed, finish_pipeline(cfg, st, var).report};
      }
    });
  }
  return runs;
}

/// Sweep CSV: run rows ordered by (value, seed), each value followed by its
/// mean and stddev rows.
inline CsvTable sweep_table(SweepParam param, std::vector<SweepRun> runs) {
  std::sort(runs.begin(), runs.end(),
            [](const SweepRun& a, const SweepRun& b) { return std::tie(a.value, a.seed) < std::tie(b.value, b.seed); });
  CsvTable t{sweep_columns(), {}};
  std::size_t i = 0;
  while (i < runs.size()) {
    std::vector<std::vector<std::string>> group;
    const double v = runs[i].value;
    for (; i < runs.size() && runs[i].value == v; ++i) {
      std::vector<std::string> row{to_string(param), format_double(v), "run"};
      const auto r = report_row(runs[i].report);
      row.insert(row.end(), r.begin(), r.end());
      group.push_back(row);
    }
    t.rows.insert(t.rows.end(), group.begin(), group.end());
    append_summary_rows(t.rows, t.header, group, {"param", "value", "task", "N_r", "N_g"}, aggregated_columns(), 2);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Ablation

inline std::vector<std::string> ablation_columns() { return {"variant", "stat", "seed", "task", "fake_count", "metric"}; }

inline CsvTable ablation_table(const PipelineConfig& base, const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  std::vector<std::vector<AblationRow>> per_seed(seeds.size());
  run_cells(seeds.size(), jobs, [&](std::size_t s) {
    PipelineConfig cfg = base;
    cfg.seed = seeds[s];
    per_seed[s] = run_ablation(cfg);
  });
  std::vector<std::size_t> order(seeds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seeds[a] < seeds[b]; });
  CsvTable t{ablation_columns(), {}};
  const std::string task = base.data.is_classification() ? "classification" : "regression";
  for (std::size_t v = 0; v < std::size(kAblationVariants); ++v) {
    std::vector<std::vector<std::string>> group;
    for (auto s : order) {
      const auto& row = per_seed[s][v];
      group.push_back({row.variant, "run", std::to_string(seeds[s]), task, std::to_string(row.fake_count),
                       format_double(row.metrics.value())});
    }
    t.rows.insert(t.rows.end(), group.begin(), group.end());
    append_summary_rows(t.rows, t.header, group, {"variant", "task"}, {"fake_count", "metric"}, 1);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Bound verification

inline CsvTable bound_table(const theory::VerifyReport& rep) {
  CsvTable t{{"kind", "trial", "lhs", "rhs", "rademacher", "complexity_term", "statistical_term", "gap_term",
              "approx_term", "tv", "theta", "holds", "holds_fraction"},
             {}};
  for (const auto& tr : rep.trials) {
    const double complexity = 4.0 * rep.terms.bound_c * tr.rademacher;
    t.rows.push_back({"trial", std::to_string(tr.trial), format_double(tr.lhs), format_double(tr.rhs),
                      format_double(tr.rademacher), format_double(complexity), format_double(rep.terms.statistical_term),
                      format_double(rep.terms.gap_term), format_double(rep.terms.approx_term), format_double(rep.tv),
                      format_double(rep.theta), tr.holds ? "1" : "0", ""});
  }
  t.rows.push_back({"summary", "", "", "", "", "", format_double(rep.terms.statistical_term),
                    format_double(rep.terms.gap_term), format_double(rep.terms.approx_term), format_double(rep.tv),
                    format_double(rep.theta), "", format_double(rep.holds_fraction)});
  return t;
}

// ---------------------------------------------------------------------------
// Plot data

inline std::vector<std::string> plot_columns() { return {"x", "series", "mean", "stddev", "n"}; }

/// Long-format (x, series, mean, stddev, n) rows recomputed from the run rows
/// of a sweep or ablation CSV. Header-only or empty input gives header-only
/// output.
inline CsvTable plotdata(const CsvTable& in, const std::string& kind) {
  CsvTable out{plot_columns(), {}};
  if (kind != "sweep" && kind != "ablation") throw ConfigError("unknown plot kind '" + kind + "'");
  if (in.header.empty()) return out;
  const auto expected = kind == "sweep" ? sweep_columns() : ablation_columns();
  if (in.header != expected) throw FormatError("input is not a " + kind + " CSV (header mismatch)");
  const auto stat = in.column("stat");
  const std::string xcol = kind == "sweep" ? "value" : "variant";
  const std::vector<std::pair<std::string, std::string>> series =
      kind == "sweep" ? std::vector<std::pair<std::string, std::string>>{{"teacher", "teacher_metric"},
                                                                         {"student_nokd", "student_nokd_metric"},
                                                                         {"student_cgankd", "student_cgankd_metric"}}
                      : std::vector<std::pair<std::string, std::string>>{{"student", "metric"}};
  const auto x = in.column(xcol);
  std::vector<std::string> xs;  // first-appearance order
  std::map<std::string, std::vector<const std::vector<std::string>*>> by_x;
  for (const auto& r : in.rows) {
    if (r[stat] != "run") continue;
    if (!by_x.count(r[x])) xs.push_back(r[x]);
    by_x[r[x]].push_back(&r);
  }
  if (kind == "sweep")
    std::stable_sort(xs.begin(), xs.end(), [](const std::string& a, const std::string& b) {
      return parse_double(a) < parse_double(b);
    });
  for (const auto& xv : xs)
    for (const auto& [name, col] : series) {
      const auto c = in.column(col);
      std::vector<double> v;
      for (const auto* r : by_x[xv]) v.push_back(parse_double((*r)[c]));
      const auto ms = mean_stddev(v);
      out.rows.push_back({xv, name, format_double(ms.mean), opt_double(ms.stddev), std::to_string(ms.n)});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_snapshot;  // file name inside the output directory
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::string started_at;
  std::string finished_at;
};

inline std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "manifest=cgankd-manifest v1\ncommand=" << m.command << "\nconfig_path=" << m.config_path
     << "\nconfig_snapshot=" << m.config_snapshot << "\nseed=" << m.seed << '\n';
  for (const auto& [k, v] : m.artifacts) os << "artifact." << k << '=' << v << '\n';
  os << "started_at=" << m.started_at << "\nfinished_at=" << m.finished_at << '\n';
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
  const auto kv = load_key_values(path.string());
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("manifest " + path.string() + " lacks '" + k + "'");
    return it->second;
  };
  if (get("manifest") != "cgankd-manifest v1") throw ConfigError("unsupported manifest version");
  RunManifest m;
  m.command = get("command");
  m.config_path = get("config_path");
  m.config_snapshot = get("config_snapshot");
  try {
    m.seed = parse_u64(get("seed"));
  } catch (const FormatError& e) {
    throw ConfigError(std::string("manifest seed: ") + e.what());
  }
  for (const auto& [k, v] : kv)
    if (k.rfind("artifact.", 0) == 0) m.artifacts.emplace_back(k.substr(9), v);
  m.started_at = kv.count("started_at") ? kv.at("started_at") : "";
  m.finished_at = kv.count("finished_at") ? kv.at("finished_at") : "";
  return m;
}

// ---------------------------------------------------------------------------
// Commands

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

inline void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

/// Maps exceptions to exit codes with a one-line diagnostic on `err`.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const StageError& e) {
    err << "stage failure [" << e.stage() << "]: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    err << "stage failure [cli]: " << e.what() << '\n';
    return kExitStage;
  }
}

struct RunArgs {
  std::string config_path;
  std::string manifest_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool checkpoints = true;
};

struct LoadedConfig {
  PipelineConfig cfg;
  std::string source;
};

inline LoadedConfig load_run_config(const std::string& config_path, const std::string& manifest_path,
                                    std::optional<std::uint64_t> seed) {
  LoadedConfig out;
  if (!manifest_path.empty()) {
    if (!config_path.empty()) throw ConfigError("give either a config file or --manifest, not both");
    const auto m = read_manifest(manifest_path);
    const auto snap = std::filesystem::path(manifest_path).parent_path() / m.config_snapshot;
    out.cfg = load_pipeline_config(snap.string());
    out.cfg.seed = m.seed;
    out.source = snap.string();
  } else {
    if (config_path.empty()) throw ConfigError("no config file given");
    out.cfg = load_pipeline_config(config_path);
    out.source = config_path;
  }
  if (seed) out.cfg.seed = *seed;
  return out;
}

inline int cmd_run(const RunArgs& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto loaded = load_run_config(a.config_path, a.manifest_path, a.seed);
    const std::filesystem::path dir(a.out_dir);
    prepare_out_dir(dir);
    RunManifest m{"run", loaded.source, "config.cfg", loaded.cfg.seed, {}, utc_timestamp(), ""};
    write_text(dir / m.config_snapshot, snapshot(loaded.cfg));
    std::optional<std::filesystem::path> ck;
    if (a.checkpoints) ck = dir / "artifacts";
    const auto rep = run_pipeline(loaded.cfg, ck);
    write_text(dir / "report.csv", to_csv(report_table(rep)));
    std::string filter_kv = rep.filter.to_kv();
    write_text(dir / "filter_report.txt", filter_kv);
    std::string timing;
    for (const auto& t : rep.timings) timing += t.stage + '=' + format_double(t.seconds) + '\n';
    write_text(dir / "timings.txt", timing);
    m.artifacts = {{"report", "report.csv"}, {"filter_report", "filter_report.txt"}, {"timings", "timings.txt"}};
    if (ck) m.artifacts.emplace_back("checkpoints", "artifacts");
    m.finished_at = utc_timestamp();
    write_manifest(m, dir / "manifest.txt");
    out << (dir / "report.csv").string() << '\n';
    return kExitOk;
  });
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> v;
  try {
    for (auto part : split_view(s, ',')) {
      if constexpr (std::is_same_v<T, double>) v.push_back(parse_double(part));
      else v.push_back(parse_u64(part));
    }
  } catch (const FormatError& e) {
    throw ConfigError(std::string("bad ") + what + " list: " + e.what());
  }
  if (v.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return v;
}

struct SweepArgs {
  std::string config_path;
  std::string param;
  std::string values;
  std::string seeds;
  std::size_t jobs = 1;
  std::string out_dir;
};

inline int cmd_sweep(const SweepArgs& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto param = parse_sweep_param(a.param);
    const auto values = parse_list<double>(a.values, "value");
    const auto seeds = parse_list<std::uint64_t>(a.seeds, "seed");
    for (double v : values) check_sweep_value(param, v);
    const auto cfg = load_pipeline_config(a.config_path);
    const std::filesystem::path dir(a.out_dir);
    prepare_out_dir(dir);
    RunManifest m{"sweep " + std::string(to_string(param)), a.config_path, "config.cfg", cfg.seed, {}, utc_timestamp(), ""};
    write_text(dir / m.config_snapshot, snapshot(cfg));
    const auto table = sweep_table(param, run_sweep_cells(cfg, param, values, seeds, a.jobs));
    write_text(dir / "sweep.csv", to_csv(table));
    m.artifacts = {{"sweep", "sweep.csv"}};
    m.finished_at = utc_timestamp();
    write_manifest(m, dir / "manifest.txt");
    out << (dir / "sweep.csv").string() << '\n';
    return kExitOk;
  });
}

struct AblationArgs {
  std::string config_path;
  std::string seeds;
  std::size_t jobs = 1;
  std::string out_dir;
};

inline int cmd_ablation(const AblationArgs& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto seeds = parse_list<std::uint64_t>(a.seeds, "seed");
    const auto cfg = load_pipeline_config(a.config_path);
    const std::filesystem::path dir(a.out_dir);
    prepare_out_dir(dir);
    RunManifest m{"ablation", a.config_path, "config.cfg", cfg.seed, {}, utc_timestamp(), ""};
    write_text(dir / m.config_snapshot, snapshot(cfg));
    write_text(dir / "ablation.csv", to_csv(ablation_table(cfg, seeds, a.jobs)));
    m.artifacts = {{"ablation", "ablation.csv"}};
    m.finished_at = utc_timestamp();
    write_manifest(m, dir / "manifest.txt");
    out << (dir / "ablation.csv").string() << '\n';
    return kExitOk;
  });
}

struct VerifyArgs {
  std::string setup_path;
  std::size_t trials = 200;
  double delta = 0.1;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

inline int cmd_verify_bound(const VerifyArgs& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    auto setup = load_bound_setup(a.setup_path);
    if (a.seed) setup.seed = *a.seed;
    if (a.trials == 0) throw ConfigError("--trials must be positive");
    if (!(a.delta > 0.0 && a.delta < 1.0)) throw ConfigError("--delta must be in (0,1)");
    const std::filesystem::path dir(a.out_dir);
    prepare_out_dir(dir);
    RunManifest m{"verify-bound", a.setup_path, "setup.cfg", setup.seed, {}, utc_timestamp(), ""};
    write_text(dir / m.config_snapshot, snapshot(setup));
    const auto rep = theory::verify_bound(setup.setup, a.trials, a.delta, setup.seed);
    write_text(dir / "bound.csv", to_csv(bound_table(rep)));
    m.artifacts = {{"bound", "bound.csv"}};
    m.finished_at = utc_timestamp();
    write_manifest(m, dir / "manifest.txt");
    out << "holds_fraction=" << format_double(rep.holds_fraction) << '\n';
    return kExitOk;
  });
}

struct PlotArgs {
  std::string input_csv;
  std::string kind;
  std::string out_dir;
};

inline int cmd_plotdata(const PlotArgs& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    std::ifstream is(a.input_csv, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + a.input_csv);
    CsvTable result;
    try {
      result = plotdata(read_csv(is), a.kind);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    const std::filesystem::path dir(a.out_dir);
    prepare_out_dir(dir);
    write_text(dir / "plotdata.csv", to_csv(result));
    out << (dir / "plotdata.csv").string() << '\n';
    return kExitOk;
  });
}

}  // namespace cgankd::cli
