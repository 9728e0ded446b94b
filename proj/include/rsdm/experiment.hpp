#pragma once

// Experiment configuration, trace serialization and batch execution.

#include <rsdm/core.hpp>
#include <rsdm/problems.hpp>
#include <rsdm/solvers.hpp>

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rsdm {

enum class ProblemKind { Procrustes, PCA, QAP, StochasticPCA };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Procrustes: return "procrustes";
    case ProblemKind::PCA: return "pca";
    case ProblemKind::QAP: return "qap";
    case ProblemKind::StochasticPCA: return "spca";
  }
  return "?";
}

inline bool parse_problem_kind(std::string_view s, ProblemKind& out) {
  for (auto k : {ProblemKind::Procrustes, ProblemKind::PCA, ProblemKind::QAP, ProblemKind::StochasticPCA}) {
    if (s == to_string(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

struct ProblemSpec {
  ProblemKind kind = ProblemKind::PCA;
  Index n = 0;
  Index p = 0;  // 0: same as n
  std::uint64_t seed = 0;
  double condition_number = 1000.0;
  Index samples = 1000;
  bool noise_free = false;

  Index cols() const { return p == 0 ? n : p; }
};

inline void validate(const ProblemSpec& s) {
  if (s.n < 1) throw ConfigError("problem.n", "must be >= 1");
  if (s.p < 0 || s.cols() > s.n) throw ConfigError("problem.p", "need 1 <= p <= n");
  if (s.kind == ProblemKind::QAP && s.cols() != s.n) throw ConfigError("problem.p", "qap requires p == n");
  if (!(s.condition_number >= 1.0)) throw ConfigError("problem.condition_number", "must be >= 1");
  if (s.samples < 1) throw ConfigError("problem.samples", "must be >= 1");
}

inline ProblemPtr make_problem(const ProblemSpec& s) {
  validate(s);
  Rng rng(s.seed);
  switch (s.kind) {
    case ProblemKind::Procrustes: return make_procrustes(s.n, s.cols(), rng);
    case ProblemKind::PCA: return make_pca(s.n, s.cols(), s.condition_number, rng);
    case ProblemKind::QAP: return make_qap(s.n, rng);
    case ProblemKind::StochasticPCA:
      return make_stochastic_pca(s.n, s.cols(), s.samples, s.noise_free, rng, s.condition_number);
  }
  throw ConfigError("problem.kind", "unknown kind");
}

enum class Emit { Csv, Json, Both };

struct ExperimentConfig {
  ProblemSpec problem;
  SolverConfig solver;
  int repeats = 1;
  std::string output_dir = "out";
  Emit emit = Emit::Both;
};

// ---------------------------------------------------------------- parsing

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError(key, "cannot parse '" + text + "' as a number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

}  // namespace detail

/// Applies one dotted key. Throws ConfigError naming the key on failure.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  auto& s = c.solver;
  auto& pr = c.problem;
  if (key == "problem.kind") {
    if (!parse_problem_kind(value, pr.kind)) throw ConfigError(key, "unknown problem kind '" + value + "'");
  } else if (key == "problem.n") {
    pr.n = parse_number<Index>(key, value);
  } else if (key == "problem.p") {
    pr.p = parse_number<Index>(key, value);
  } else if (key == "problem.seed") {
    pr.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "problem.condition_number") {
    pr.condition_number = parse_number<double>(key, value);
  } else if (key == "problem.samples") {
    pr.samples = parse_number<Index>(key, value);
  } else if (key == "problem.noise_free") {
    pr.noise_free = detail::parse_bool(key, value);
  } else if (key == "solver.family") {
    if (!parse_family(value, s.family)) throw ConfigError(key, "unknown solver family '" + value + "'");
  } else if (key == "solver.sampler") {
    if (!parse_sampler(value, s.sampler)) throw ConfigError(key, "unknown sampler '" + value + "'");
  } else if (key == "solver.r") {
    s.r = parse_number<Index>(key, value);
  } else if (key == "solver.eta") {
    s.eta = parse_number<double>(key, value);
  } else if (key == "solver.retraction") {
    if (!parse_retraction(value, s.retraction)) throw ConfigError(key, "unknown retraction '" + value + "'");
  } else if (key == "solver.max_iters") {
    s.max_iters = parse_number<std::int64_t>(key, value);
  } else if (key == "solver.seed") {
    s.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "solver.beta") {
    s.beta = parse_number<double>(key, value);
  } else if (key == "solver.inner_iters") {
    s.inner_iters = parse_number<int>(key, value);
  } else if (key == "solver.batch_size") {
    s.batch_size = parse_number<Index>(key, value);
  } else if (key == "solver.log_every") {
    s.log_every = parse_number<int>(key, value);
  } else if (key == "solver.grad_norm_mode") {
    if (!parse_grad_norm_mode(value, s.grad_norm_mode)) throw ConfigError(key, "expected full or skipped");
  } else if (key == "solver.enumeration_limit") {
    s.enumeration_limit = parse_number<std::uint64_t>(key, value);
  } else if (key == "repeats") {
    c.repeats = parse_number<int>(key, value);
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else if (key == "emit") {
    if (value == "csv") c.emit = Emit::Csv;
    else if (value == "json") c.emit = Emit::Json;
    else if (value == "both") c.emit = Emit::Both;
    else throw ConfigError(key, "expected csv, json or both");
  } else {
    throw ConfigError(key, "unknown key");
  }
}

/// Flat "dotted.key = value" lines; '#' starts a comment.
inline ExperimentConfig parse_key_value(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key=value");
    apply_setting(c, detail::trim(std::string_view(t).substr(0, eq)), detail::trim(std::string_view(t).substr(eq + 1)));
  }
  return c;
}

namespace detail {

inline void flatten_json(const nlohmann::json& j, const std::string& prefix,
                         std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto& v = it.value();
    if (v.is_object()) flatten_json(v, key, out);
    else if (v.is_string()) out.emplace_back(key, v.get<std::string>());
    else if (v.is_boolean()) out.emplace_back(key, v.get<bool>() ? "true" : "false");
    else if (v.is_number()) out.emplace_back(key, v.dump());
    else throw ConfigError(key, "unsupported JSON value");
  }
}

}  // namespace detail

/// Same keys as the key-value format, either nested or dotted.
inline ExperimentConfig parse_json_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("json", e.what());
  }
  if (!j.is_object()) throw ConfigError("json", "top level must be an object");
  std::vector<std::pair<std::string, std::string>> kv;
  detail::flatten_json(j, "", kv);
  ExperimentConfig c;
  for (const auto& [k, v] : kv) apply_setting(c, k, v);
  return c;
}

inline ExperimentConfig parse_config_text(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') return parse_json_config(text);
  return parse_key_value(text);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline void apply_env_overrides(ExperimentConfig& c) {
  if (const char* seed = std::getenv("RSDM_SEED"); seed && *seed)
    c.solver.seed = detail::parse_number<std::uint64_t>("RSDM_SEED", seed);
}

inline void validate(const ExperimentConfig& c) {
  if (c.problem.n == 0) throw ConfigError("problem.n", "missing");
  validate(c.problem);
  if (c.repeats < 1) throw ConfigError("repeats", "must be >= 1");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  validate(c.solver, c.problem.n, c.problem.cols(), c.problem.kind == ProblemKind::StochasticPCA);
}

/// Resolved configuration as dotted keys.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  const auto& s = c.solver;
  const auto& p = c.problem;
  j["problem.kind"] = to_string(p.kind);
  j["problem.n"] = p.n;
  j["problem.p"] = p.cols();
  j["problem.seed"] = p.seed;
  j["problem.condition_number"] = p.condition_number;
  j["problem.samples"] = p.samples;
  j["problem.noise_free"] = p.noise_free;
  j["solver.family"] = to_string(s.family);
  j["solver.sampler"] = to_string(s.sampler);
  j["solver.r"] = s.r;
  j["solver.eta"] = s.eta;
  j["solver.retraction"] = to_string(s.retraction);
  j["solver.max_iters"] = s.max_iters;
  j["solver.seed"] = s.seed;
  j["solver.beta"] = s.beta;
  j["solver.inner_iters"] = s.inner_iters;
  j["solver.batch_size"] = s.batch_size;
  j["solver.log_every"] = s.log_every;
  j["solver.grad_norm_mode"] = to_string(s.grad_norm_mode);
  j["solver.enumeration_limit"] = s.enumeration_limit;
  j["repeats"] = c.repeats;
  j["output_dir"] = c.output_dir;
  j["emit"] = c.emit == Emit::Csv ? "csv" : c.emit == Emit::Json ? "json" : "both";
  return j;
}

// ---------------------------------------------------------------- CSV traces

inline constexpr const char* kTraceHeader = "iter,time_ns,value,optgap,grad_norm_sq,sub_grad_norm_sq,feasibility";

namespace detail {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void put_optional(std::string& line, const std::optional<double>& v) {
  line += ',';
  if (v) line += format_double(*v);
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string format_record(const TraceRecord& r) {
  std::string line = std::to_string(r.iter);
  line += ',';
  line += std::to_string(r.time_ns);
  line += ',';
  line += detail::format_double(r.value);
  detail::put_optional(line, r.optgap);
  detail::put_optional(line, r.grad_norm_sq);
  detail::put_optional(line, r.sub_grad_norm_sq);
  line += ',';
  line += detail::format_double(r.feasibility);
  return line;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << kTraceHeader << '\n';
  for (const auto& r : records) out << format_record(r) << '\n';
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_trace_csv(out, records);
}

inline std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("trace csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw Error("trace csv: unexpected header '" + line + "'");
  std::vector<TraceRecord> out;
  auto opt = [](const std::string& field, const std::string& text) -> std::optional<double> {
    if (text.empty()) return std::nullopt;
    return detail::parse_number<double>(field, text);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != 7) throw Error("trace csv: expected 7 columns, got " + std::to_string(f.size()));
    TraceRecord r;
    r.iter = detail::parse_number<std::int64_t>("iter", f[0]);
    r.time_ns = detail::parse_number<std::int64_t>("time_ns", f[1]);
    r.value = detail::parse_number<double>("value", f[2]);
    r.optgap = opt("optgap", f[3]);
    r.grad_norm_sq = opt("grad_norm_sq", f[4]);
    r.sub_grad_norm_sq = opt("sub_grad_norm_sq", f[5]);
    r.feasibility = detail::parse_number<double>("feasibility", f[6]);
    if (!out.empty() && r.iter <= out.back().iter) throw Error("trace csv: iter not strictly increasing");
    out.push_back(r);
  }
  return out;
}

inline std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return read_trace_csv(in);
}

// ---------------------------------------------------------------- execution

inline std::string lowercase(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline std::string trace_file_name(const ExperimentConfig& c, std::uint64_t seed, const std::string& tag = "") {
  std::string name = std::string(to_string(c.problem.kind)) + "_" + lowercase(solver_label(c.solver));
  if (!tag.empty()) name += "_" + tag;
  return name + "_" + std::to_string(seed) + ".csv";
}

struct RunResult {
  std::uint64_t seed = 0;
  std::string file;
  std::string tag;
  Trace trace;
  double elapsed_seconds = 0.0;
};

inline nlohmann::json to_json(const RunResult& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["file"] = r.file;
  if (!r.tag.empty()) j["tag"] = r.tag;
  j["iterations"] = r.trace.records.empty() ? 0 : r.trace.records.back().iter;
  j["elapsed_seconds"] = r.elapsed_seconds;
  if (!r.trace.records.empty()) {
    const auto& last = r.trace.records.back();
    j["final_value"] = last.value;
    j["final_optgap"] = last.optgap ? nlohmann::json(*last.optgap) : nlohmann::json(nullptr);
    j["final_feasibility"] = last.feasibility;
  }
  if (!r.trace.sweeps.empty()) {
    auto& arr = j["sweeps"] = nlohmann::json::array();
    for (const auto& s : r.trace.sweeps)
      arr.push_back({{"outer", s.outer}, {"lhs", s.lhs}, {"rhs_full", s.rhs_full}, {"ratio", s.ratio()},
                     {"c_p", s.constant}, {"inner_sum", s.inner_sum}});
  }
  return j;
}

/// One unit of work: a concrete config, its problem and a file tag.
struct RunJob {
  ExperimentConfig config;
  std::uint64_t seed;
  std::string tag;
};

/// Runs jobs on up to `jobs` worker threads; results keep job order.
/// Each worker builds its own problem instance and writes its own file.
inline std::vector<RunResult> execute_jobs(const std::vector<RunJob>& work, const std::filesystem::path& dir,
                                           bool write_csv, int jobs) {
  std::vector<RunResult> results(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        const auto& job = work[i];
        const ProblemPtr problem = make_problem(job.config.problem);
        SolverConfig sc = job.config.solver;
        sc.seed = job.seed;
        const auto t0 = std::chrono::steady_clock::now();
        RunResult res;
        res.seed = job.seed;
        res.tag = job.tag;
        res.trace = run_solver(*problem, sc);
        res.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ExperimentConfig named = job.config;
        named.solver = sc;
        res.file = trace_file_name(named, job.seed, job.tag);
        if (write_csv) write_trace_csv(dir / res.file, res.trace.records);
        res.trace.final_point.resize(0, 0);
        results[i] = std::move(res);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json make_meta(const ExperimentConfig& c, const std::vector<RunResult>& runs, double elapsed) {
  nlohmann::json meta;
  meta["library"] = "rsdm";
  meta["version"] = kVersion;
  meta["config"] = to_json(c);
  meta["ignored_fields"] = ignored_fields(c.solver);
  meta["elapsed_seconds"] = elapsed;
  meta["trace_columns"] = kTraceHeader;
  auto& arr = meta["runs"] = nlohmann::json::array();
  for (const auto& r : runs) arr.push_back(to_json(r));
  return meta;
}

}  // namespace rsdm
