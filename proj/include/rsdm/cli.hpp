#pragma once

// Subcommands behind the `rsdm` executable. Each returns a process exit code:
// 0 success, 1 verification failure, 2 invalid configuration, 3 runtime error.

#include <rsdm/experiment.hpp>
#include <rsdm/suites.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace rsdm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct CliOptions {
  int jobs = 1;
  std::optional<std::string> output_dir;
  double perturb_gradient = 0.0;  // verify only
};

namespace detail {

inline int report_config_error(const ConfigError& e, std::ostream& err) {
  err << "config error: " << e.what() << '\n';
  return kExitConfig;
}

/// Loads, applies overrides and validates. Nothing is written to disk here.
inline ExperimentConfig prepare_config(const std::string& path, const CliOptions& opts) {
  ExperimentConfig c = load_config(path);
  apply_env_overrides(c);
  if (opts.output_dir) c.output_dir = *opts.output_dir;
  if (opts.jobs < 1) throw ConfigError("--jobs", "must be >= 1");
  validate(c);
  return c;
}

inline std::filesystem::path make_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("output_dir", "cannot create '" + dir + "'");
  return dir;
}

inline std::vector<RunJob> repeat_jobs(const ExperimentConfig& c, const std::string& tag) {
  std::vector<RunJob> jobs;
  for (int k = 0; k < c.repeats; ++k) jobs.push_back({c, c.solver.seed + static_cast<std::uint64_t>(k), tag});
  return jobs;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const CliOptions& opts, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  ExperimentConfig c;
  std::filesystem::path dir;
  try {
    c = detail::prepare_config(config_path, opts);
    dir = detail::make_output_dir(c.output_dir);
  } catch (const ConfigError& e) {
    return detail::report_config_error(e, err);
  }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = execute_jobs(detail::repeat_jobs(c, ""), dir, c.emit != Emit::Json, opts.jobs);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.emit != Emit::Csv) write_json(dir / "meta.json", make_meta(c, runs, elapsed));
    for (const auto& r : runs) {
      out << r.file << ": " << r.trace.records.size() << " records, final value "
          << detail::format_double(r.trace.records.back().value);
      if (const auto& g = r.trace.records.back().optgap) out << ", optgap " << detail::format_double(*g);
      out << '\n';
    }
  } catch (const ConfigError& e) {
    return detail::report_config_error(e, err);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

inline int cmd_sweep(const std::string& config_path, const std::string& param, const std::string& values,
                     const CliOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  ExperimentConfig base;
  std::vector<RunJob> work;
  std::vector<std::string> cells;
  std::filesystem::path dir;
  try {
    if (param != "eta" && param != "r") throw ConfigError("--param", "expected eta or r, got '" + param + "'");
    base = detail::prepare_config(config_path, opts);
    cells = detail::split_list(values);
    if (cells.empty()) throw ConfigError("--values", "at least one value is required");
    for (const auto& v : cells) {
      ExperimentConfig c = base;
      apply_setting(c, "solver." + param, v);
      validate(c);
      auto jobs = detail::repeat_jobs(c, param + v);
      work.insert(work.end(), jobs.begin(), jobs.end());
    }
    dir = detail::make_output_dir(base.output_dir);
  } catch (const ConfigError& e) {
    return detail::report_config_error(e, err);
  }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = execute_jobs(work, dir, base.emit != Emit::Json, opts.jobs);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream summary(dir / "summary.csv", std::ios::binary);
    if (!summary) throw Error("cannot write summary.csv");
    summary << "param,value,seed,final_value,final_optgap,file\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i];
      const std::string& v = cells[i / static_cast<std::size_t>(base.repeats)];
      const auto& last = r.trace.records.back();
      summary << param << ',' << v << ',' << r.seed << ',' << detail::format_double(last.value) << ','
              << (last.optgap ? detail::format_double(*last.optgap) : "") << ',' << r.file << '\n';
    }
    if (base.emit != Emit::Csv) {
      auto meta = make_meta(base, runs, elapsed);
      meta["sweep"] = {{"param", param}, {"values", cells}};
      write_json(dir / "meta.json", meta);
    }
    out << "sweep over " << param << ": " << cells.size() << " values x " << base.repeats << " repeats -> "
        << (dir / "summary.csv").string() << '\n';
  } catch (const ConfigError& e) {
    return detail::report_config_error(e, err);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

inline int cmd_verify(const std::string& suite, std::uint64_t seed, const CliOptions& opts,
                      std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (!is_suite(suite)) {
    err << "config error: suite: unknown suite '" << suite << "'\n";
    return kExitConfig;
  }
  std::filesystem::path dir;
  try {
    if (opts.jobs < 1) throw ConfigError("--jobs", "must be >= 1");
    dir = detail::make_output_dir(opts.output_dir.value_or("."));
  } catch (const ConfigError& e) {
    return detail::report_config_error(e, err);
  }
  SuiteOptions so;
  so.seed = seed;
  so.threads = opts.jobs;
  so.gradient_offset = opts.perturb_gradient;
  std::vector<CheckResult> results;
  try {
    results = run_suite(suite, so);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  bool all_pass = true;
  nlohmann::json report;
  report["library"] = "rsdm";
  report["version"] = kVersion;
  report["suite"] = suite;
  report["seed"] = seed;
  auto& checks = report["checks"] = nlohmann::json::array();
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    out << (r.pass ? "PASS  " : "FAIL  ") << r.suite << '/' << r.name << "  " << r.detail << '\n';
    checks.push_back({{"suite", r.suite}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"data", r.data}});
  }
  report["passed"] = all_pass;
  try {
    write_json(dir / "verify_report.json", report);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  if (!all_pass) {
    for (const auto& r : results)
      if (!r.pass) err << "failed: " << r.suite << " (" << r.name << ") " << r.detail << '\n';
    return kExitVerifyFailed;
  }
  return kExitOk;
}

}  // namespace rsdm
