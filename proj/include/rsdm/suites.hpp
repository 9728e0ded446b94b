#pragma once

// Named oracle suites at fixed desk-scale dimensions, run by `rsdm verify`.

#include <rsdm/verify.hpp>

#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace rsdm {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
  nlohmann::json data;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  double gradient_offset = 0.0;  // nonzero corrupts every gradient (mutation check)
  std::int64_t prop1_trials = 100'000;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"gradients", "prop1", "lemma2", "prop2", "embedding"};
  return names;
}

inline bool is_suite(const std::string& s) {
  if (s == "all") return true;
  for (const auto& n : suite_names())
    if (n == s) return true;
  return false;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

/// One small instance per problem family, for the gradient and gradient-bound sweeps.
inline std::vector<ProblemPtr> suite_problems(Index n, Index p, Rng& rng, double offset) {
  std::vector<ProblemPtr> out{make_procrustes(n, p, rng), make_pca(n, p, 100.0, rng), make_qap(p, rng),
                              make_stochastic_pca(n, p, 50, false, rng)};
  if (offset != 0.0)
    for (auto& pr : out) pr = std::make_shared<PerturbedGradientProblem>(pr, offset);
  return out;
}

inline std::vector<CheckResult> suite_gradients(const SuiteOptions& o) {
  Rng rng = Rng(o.seed).split(10);
  std::vector<CheckResult> out;
  for (const auto& problem : suite_problems(12, 5, rng, o.gradient_offset)) {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto x = random_stiefel(problem->n(), problem->p(), rng);
      worst = std::max(worst, gradient_relative_error(*problem, x.matrix(), 1e-6));
    }
    CheckResult c{"gradients", std::string(problem->name()), worst <= 1e-5,
                  "max rel err " + fmt("%.3e", worst), {}};
    c.data = {{"problem", problem->name()}, {"n", problem->n()}, {"p", problem->p()},
              {"points", 20}, {"h", 1e-6}, {"max_rel_err", worst}, {"tolerance", 1e-5}};
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<CheckResult> suite_prop1(const SuiteOptions& o) {
  const std::vector<std::pair<Index, Index>> cells{{10, 3}, {10, 4}, {20, 5}, {16, 16}};
  std::vector<CheckResult> out;
  Rng rng = Rng(o.seed).split(11);
  for (const auto& [n, r] : cells) {
    const Index p = std::max<Index>(1, n / 2);
    const Matrix x = random_stiefel(n, p, rng).matrix();
    const Matrix g = rng.gaussian(n, p);
    for (auto sampler : {SamplerKind::HaarOrthogonal, SamplerKind::UniformPermutation}) {
      const auto rep = prop1_ratio(x, g, sampler, r, o.prop1_trials, rng, o.threads);
      const bool pass = std::abs(rep.z_score) <= 4.0;
      CheckResult c{"prop1",
                    "n=" + std::to_string(n) + ",r=" + std::to_string(r) + "," + std::string(to_string(sampler)),
                    pass,
                    "estimate " + fmt("%.6f", rep.estimate) + " target " + fmt("%.6f", rep.target) + " z " +
                        fmt("%.2f", rep.z_score),
                    {}};
      c.data = {{"n", n},
                {"r", r},
                {"sampler", to_string(sampler)},
                {"estimate", rep.estimate},
                {"std_error", rep.std_error},
                {"trials", rep.trials},
                {"target", rep.target},
                {"z_score", std::isfinite(rep.z_score) ? nlohmann::json(rep.z_score) : nlohmann::json("inf")}};
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline std::vector<CheckResult> suite_lemma2(const SuiteOptions& o) {
  Rng rng = Rng(o.seed).split(12);
  std::vector<CheckResult> out;
  // three problem families at n=30, p=12 plus unstructured Gaussian G
  auto problems = suite_problems(30, 12, rng, 0.0);
  problems.resize(3);
  auto record = [&](const std::string& name, Index n, Index p, auto&& draw_g) {
    double worst = std::numeric_limits<double>::infinity();
    int failures = 0;
    for (int t = 0; t < 1000; ++t) {
      const Matrix x = random_stiefel(n, p, rng).matrix();
      const Matrix g = draw_g(x);
      const auto res = lemma2_check(x, g);
      worst = std::min(worst, res.lhs - res.rhs);
      failures += res.ok ? 0 : 1;
    }
    CheckResult c{"lemma2", name, failures == 0, "min slack " + fmt("%.3e", worst), {}};
    c.data = {{"case", name}, {"n", n}, {"p", p}, {"trials", 1000}, {"min_slack", worst}, {"failures", failures}};
    out.push_back(std::move(c));
  };
  for (const auto& pr : problems)
    record(std::string(pr->name()), pr->n(), pr->p(), [&](const Matrix& x) { return pr->gradient(x); });
  record("gaussian", 30, 12, [&](const Matrix&) { return rng.gaussian(30, 12); });
  return out;
}

inline std::vector<CheckResult> suite_prop2(const SuiteOptions& o) {
  Rng rng = Rng(o.seed).split(13);
  std::vector<CheckResult> out;
  const Index n = 10, p = 5;
  const Matrix x = random_stiefel(n, p, rng).matrix();
  const Matrix g = rng.gaussian(n, p);
  auto add = [&](const std::string& name, const TailReport& rep, bool pass, const std::string& detail) {
    CheckResult c{"prop2", name, pass, detail, {}};
    c.data = {{"case", name},
              {"trials", rep.trials},
              {"fraction", rep.fraction},
              {"std_error", rep.std_error},
              {"median_ratio", rep.median_ratio},
              {"expected_ratio", rep.expected_ratio}};
    out.push_back(std::move(c));
  };
  const auto r8 = prop2_tail(x, g, 8, 10'000, rng, o.threads);
  add("n=10,r=8,fraction", r8, r8.fraction >= 0.5, "fraction " + fmt("%.4f", r8.fraction));
  const auto r5 = prop2_tail(x, g, 5, 10'000, rng, o.threads);
  const double rel = r5.median_ratio / r5.expected_ratio;
  add("n=10,r=5,median", r5, rel >= 0.5 && rel <= 2.0, "median/mean " + fmt("%.4f", rel));
  const auto r10 = prop2_tail(x, g, 10, 1'000, rng, o.threads);
  add("n=10,r=10,fraction", r10, r10.fraction == 1.0, "fraction " + fmt("%.4f", r10.fraction));
  return out;
}

inline std::vector<CheckResult> suite_embedding(const SuiteOptions& o) {
  Rng rng = Rng(o.seed).split(14);
  std::vector<CheckResult> out;
  for (auto sampler : {SamplerKind::UniformPermutation, SamplerKind::HaarOrthogonal}) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Index n = 2 + static_cast<Index>(rng.below(63));
      const Index p = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Index r = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Matrix x = random_stiefel(n, p, rng).matrix();
      const Frame f = sample_frame(sampler, n, r, rng);
      const Matrix y = qf(rng.gaussian(r, r));
      worst = std::max(worst, block_embedding_equivalence(f, y, x));
    }
    CheckResult c{"embedding", std::string(to_string(sampler)), worst <= 1e-11,
                  "max residual " + fmt("%.3e", worst), {}};
    c.data = {{"sampler", to_string(sampler)}, {"trials", 100}, {"max_residual", worst}, {"tolerance", 1e-11}};
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

inline std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& o) {
  if (suite == "all") {
    std::vector<CheckResult> all;
    for (const auto& s : suite_names()) {
      auto part = run_suite(s, o);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  if (suite == "gradients") return detail::suite_gradients(o);
  if (suite == "prop1") return detail::suite_prop1(o);
  if (suite == "lemma2") return detail::suite_lemma2(o);
  if (suite == "prop2") return detail::suite_prop2(o);
  if (suite == "embedding") return detail::suite_embedding(o);
  throw ConfigError("suite", "unknown suite '" + suite + "'");
}

}  // namespace rsdm
