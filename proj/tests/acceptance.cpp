// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <rsdm/cli.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

using namespace rsdm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

int hardware_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

SolverConfig solver(SolverFamily family, SamplerKind sampler, Index r, double eta, std::int64_t iters,
                    std::uint64_t seed = 0) {
  SolverConfig c;
  c.family = family;
  c.sampler = sampler;
  c.r = r;
  c.eta = eta;
  c.max_iters = iters;
  c.seed = seed;
  c.grad_norm_mode = GradNormMode::Skipped;
  return c;
}

std::vector<double> values(const Trace& t) {
  std::vector<double> v;
  v.reserve(t.records.size());
  for (const auto& r : t.records) v.push_back(r.value);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

bool monotone(const Trace& t) {
  for (std::size_t k = 1; k < t.records.size(); ++k) {
    const double prev = t.records[k - 1].value;
    if (t.records[k].value > prev + 1e-12 * std::max(1.0, std::abs(prev))) return false;
  }
  return true;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- criteria

Outcome projection_ratio() {
  std::ostringstream d;
  bool ok = true;
  Rng rng = Rng(1).split(100);
  for (auto [n, r] : {std::pair<Index, Index>{10, 3}, {10, 4}, {20, 5}}) {
    const Matrix x = random_stiefel(n, n / 2, rng).matrix();
    const Matrix g = rng.gaussian(n, n / 2);
    for (auto sampler : {SamplerKind::HaarOrthogonal, SamplerKind::UniformPermutation}) {
      const auto t0 = Clock::now();
      const auto rep = prop1_ratio(x, g, sampler, r, 100'000, rng, hardware_threads());
      const double secs = seconds_since(t0);
      const bool cell = std::abs(rep.z_score) <= 4.0 && secs <= 60.0;
      ok = ok && cell;
      d << " (" << n << "," << r << "," << (sampler == SamplerKind::HaarOrthogonal ? "O" : "P") << ") est "
        << sci(rep.estimate) << " target " << sci(rep.target) << " z " << sci(rep.z_score) << " " << sci(secs)
        << "s" << (cell ? "" : " <-");
    }
  }
  return {ok, d.str()};
}

Outcome exact_sweep_equality() {
  const auto t0 = Clock::now();
  Rng rng = Rng(2).split(100);
  const auto frames = enumerate_truncated_permutations(5, 2);
  const double c_p = sweep_constant(5, 2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Matrix x = random_stiefel(5, 1 + t % 5, rng).matrix();
    const Matrix g = rng.gaussian(5, x.cols());
    const auto c7 = condition7_lhs(frames, x, g);
    worst = std::max(worst, std::abs(c7.lhs - 2.0 * c7.rhs_full));
  }
  // the solver's own sweep diagnostics
  const auto pca = make_pca(5, 2, 10.0, rng);
  const auto trace = run_rsdm_exact(*pca, solver(SolverFamily::RSDM_Exact, SamplerKind::ExhaustivePermutation, 2, 0.1, 5));
  for (const auto& s : trace.sweeps) worst = std::max(worst, std::abs(s.lhs - 2.0 * s.rhs_full));
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && c_p == 2.0 && secs <= 1.0,
          "frames " + std::to_string(frames.size()) + " C_p " + sci(c_p) + " max |lhs - 2 rhs| " + sci(worst) + " " +
              sci(secs) + "s"};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  SuiteOptions o;
  o.seed = 3;
  bool ok = true;
  std::string d;
  for (const auto& r : run_suite("gradients", o)) {
    ok = ok && r.pass;
    d += " " + r.name + ": " + r.detail + ";";
  }
  const double secs = seconds_since(t0);
  return {ok && secs <= 30.0, d + " " + sci(secs) + "s"};
}

Outcome feasibility_closure() {
  Rng rng = Rng(4).split(100);
  const auto pca = make_pca(128, 96, 100.0, rng);
  bool ok = true;
  std::string d;
  for (auto sampler : {SamplerKind::UniformPermutation, SamplerKind::HaarOrthogonal}) {
    const auto t = run_rsdm(*pca, solver(SolverFamily::RSDM, sampler, 48, 0.5, 10'000, 4));
    const double feas = t.records.back().feasibility;
    ok = ok && feas <= 1e-8;
    d += " " + t.label + " final ||X^T X - I|| " + sci(feas) + ";";
  }
  return {ok, d};
}

Outcome lemma2_slack() {
  Rng rng = Rng(5).split(100);
  const std::vector<ProblemPtr> problems{make_procrustes(30, 12, rng), make_pca(30, 12, 100.0, rng), make_qap(12, rng)};
  double worst = std::numeric_limits<double>::infinity();
  int count = 0;
  for (const auto& problem : problems) {
    for (int t = 0; t < 1000; ++t) {
      const Matrix x = random_stiefel(problem->n(), problem->p(), rng).matrix();
      const auto res = lemma2_check(x, problem->gradient(x));
      worst = std::min(worst, res.lhs - res.rhs);
      ++count;
    }
  }
  return {worst >= -1e-10, std::to_string(count) + " instances, min slack " + sci(worst)};
}

Outcome block_embedding() {
  Rng rng = Rng(6).split(100);
  bool ok = true;
  std::string d;
  for (auto sampler : {SamplerKind::UniformPermutation, SamplerKind::HaarOrthogonal}) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Index n = 2 + static_cast<Index>(rng.below(63));
      const Index p = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Index r = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Matrix x = random_stiefel(n, p, rng).matrix();
      const Matrix y = qf(rng.gaussian(r, r));
      worst = std::max(worst, block_embedding_equivalence(sample_frame(sampler, n, r, rng), y, x));
    }
    ok = ok && worst <= 1e-11;
    d += std::string(" ") + std::string(to_string(sampler)) + " max residual " + sci(worst) + ";";
  }
  return {ok, d};
}

Outcome reduction_identities() {
  Rng rng = Rng(7).split(100);
  const auto pca = make_pca(25, 6, 100.0, rng);
  const auto spca = make_stochastic_pca(20, 5, 100, true, rng);
  const auto pr = make_procrustes(16, 6, rng);
  double mom = 0.0, sto = 0.0, rgdm = 0.0;
  for (auto sampler : {SamplerKind::HaarOrthogonal, SamplerKind::UniformPermutation}) {
    auto base = solver(SolverFamily::RSDM, sampler, 6, 0.4, 500, 5);
    auto m = base;
    m.family = SolverFamily::RSDM_Momentum;
    m.beta = 0.0;
    m.inner_iters = 1;
    mom = std::max(mom, max_abs_diff(values(run_rsdm(*pca, base)), values(run_rsdm_momentum(*pca, m))));

    auto sbase = solver(SolverFamily::RSDM, sampler, 5, 0.3, 500, 9);
    auto s = sbase;
    s.family = SolverFamily::RSDM_Stochastic;
    s.batch_size = 4;
    sto = std::max(sto, max_abs_diff(values(run_rsdm(*spca, sbase)), values(run_rsdm_stochastic(*spca, s))));
  }
  auto g = solver(SolverFamily::RGD, SamplerKind::UniformPermutation, 2, 0.01, 500);
  auto gm = g;
  gm.family = SolverFamily::RGD_Momentum;
  gm.beta = 0.0;
  rgdm = max_abs_diff(values(run_rgd(*pr, g)), values(run_rgd_momentum(*pr, gm)));
  return {mom <= 1e-12 && sto <= 1e-12 && rgdm <= 1e-12,
          "momentum " + sci(mom) + ", noise-free stochastic " + sci(sto) + ", rgd-momentum " + sci(rgdm)};
}

Outcome givens_structure() {
  Rng rng = Rng(8).split(100);
  const Index n = 30;
  const auto pr = make_procrustes(n, 10, rng);
  const StiefelPoint x0 = random_stiefel(n, 10, rng);
  auto c = solver(SolverFamily::RSDM, SamplerKind::UniformPermutation, 2, 0.01, 1000, 8);
  Matrix x = x0.matrix();
  Rng frames = Rng(c.seed).split(1);
  int most = 0;
  for (int k = 0; k < 1000; ++k) {
    const Frame f = sample_permutation_frame(n, 2, frames);
    const auto step = rsdm_step(StiefelPoint::adopt(x), pr->gradient(x), f, c.eta, RetractionKind::QR);
    int changed = 0;
    for (Index i = 0; i < n; ++i) changed += step.next.matrix().row(i) != x.row(i) ? 1 : 0;
    most = std::max(most, changed);
    x = step.next.matrix();
  }
  const double replay = (run_rsdm(*pr, c, x0).final_point - x).norm();
  return {most <= 2 && replay <= 1e-12,
          "max rows changed " + std::to_string(most) + " over 1000 iterations, replay drift " + sci(replay)};
}

Outcome convergence_to_optima() {
  // Frozen budgets, calibrated once on these instances with about 3x headroom.
  struct Case {
    std::string name;
    ProblemPtr problem;
    double eta;
    std::int64_t rsdm_budget, rgd_budget;
  };
  Rng rng(2024);
  std::vector<Case> cases;
  cases.push_back({"procrustes 64x64", make_procrustes(64, 64, rng), 0.004, 12'000, 6'000});
  cases.push_back({"pca 64x48", make_pca(64, 48, 1000.0, rng), 1.0, 12'000, 2'000});
  bool ok = true;
  std::string d;
  for (const auto& cs : cases) {
    for (int v = 0; v < 3; ++v) {
      SolverConfig c = v == 2 ? solver(SolverFamily::RGD, SamplerKind::UniformPermutation, 2, cs.eta, cs.rgd_budget, 1)
                              : solver(SolverFamily::RSDM,
                                       v == 0 ? SamplerKind::UniformPermutation : SamplerKind::HaarOrthogonal, 32,
                                       cs.eta, cs.rsdm_budget, 1);
      const auto t0 = Clock::now();
      const auto t = run_solver(*cs.problem, c);
      const double secs = seconds_since(t0);
      const double gap = *t.records.back().optgap;
      const bool mono = monotone(t);
      const bool run_ok = gap <= 1e-4 && mono && secs <= 120.0;
      ok = ok && run_ok;
      d += " " + cs.name + " " + t.label + " optgap " + sci(gap) + (mono ? " monotone " : " NOT monotone ") +
           sci(secs) + "s;";
    }
  }
  return {ok, d};
}

double median_step_ns(const Trace& t) {
  std::vector<double> d;
  for (std::size_t k = 1; k < t.records.size(); ++k)
    d.push_back(static_cast<double>(t.records[k].time_ns - t.records[k - 1].time_ns));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

Outcome relative_speed() {
  Rng rng = Rng(10).split(100);
  const auto pr = make_procrustes(1024, 1024, rng);
  const auto a = run_rsdm(*pr, solver(SolverFamily::RSDM, SamplerKind::UniformPermutation, 256, 1e-4, 100));
  const auto b = run_rgd(*pr, solver(SolverFamily::RGD, SamplerKind::UniformPermutation, 2, 1e-4, 100));
  const double ta = median_step_ns(a), tb = median_step_ns(b);
  return {tb >= 1.5 * ta, "median per-iteration RSDM-P " + sci(ta / 1e6) + " ms, RGD " + sci(tb / 1e6) +
                              " ms, speedup " + sci(tb / ta)};
}

std::string strip_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    out += line.substr(0, first) + line.substr(second) + "\n";
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("rsdm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "c.conf") << "problem.kind = procrustes\nproblem.n = 24\nproblem.p = 8\n"
                                    "solver.family = rsdm\nsolver.sampler = haar\nsolver.r = 6\nsolver.eta = 0.01\n"
                                    "solver.max_iters = 500\nrepeats = 2\n";
  std::ostringstream sink;
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    CliOptions opts;
    opts.output_dir = (root / run).string();
    opts.jobs = 2;
    ok = ok && cmd_run((root / "c.conf").string(), opts, sink, sink) == kExitOk;
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const std::string a = slurp(entry.path()), b = slurp(root / "b" / entry.path().filename());
    ok = ok && !a.empty() && strip_timing(a) == strip_timing(b);
    ++files;
  }
  fs::remove_all(root);
  return {ok && files == 2, std::to_string(files) + " trace files compared without time_ns"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"projection-ratio", projection_ratio},     {"exact-sweep-equality", exact_sweep_equality},
      {"gradient-checks", gradient_checks},       {"feasibility-closure", feasibility_closure},
      {"lemma2-slack", lemma2_slack},             {"block-embedding", block_embedding},
      {"reduction-identities", reduction_identities}, {"givens-structure", givens_structure},
      {"convergence-to-optima", convergence_to_optima}, {"relative-speed", relative_speed},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << "  " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
